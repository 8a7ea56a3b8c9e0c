#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/georesolve.hpp"
#include "s2l/pipeline.hpp"
#include "s2l/seqnet.hpp"
#include "s2l/toyfont.hpp"

namespace {

using namespace s2l;
namespace fs = std::filesystem;

constexpr int kUsageError = 1;

struct RunArgs {
  std::string image;
  std::string batch;
  std::string config;
  std::string out;
  std::string timestamp;
  std::vector<std::pair<std::string, std::string>> overrides;
};

int do_run(const RunArgs& args) {
  pipeline::PipelineConfig cfg;
  try {
    std::ifstream in(args.config);
    if (!in) throw Error("cannot open config " + args.config);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = pipeline::parse_config(ss.str(), fs::path(args.config).parent_path());
    for (const auto& [key, value] : args.overrides) pipeline::set_config_value(cfg, key, value, fs::current_path());
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsageError;
  }

  pipeline::Resources resources;
  try {
    resources = pipeline::Resources::load(cfg);
  } catch (const std::exception& e) {
    std::cerr << "cannot load resources: " << e.what() << '\n';
    return kUsageError;
  }

  detect::FixtureBackend detector(cfg.maps_dir);
  auto clocks = pipeline::Clocks::system();
  if (!args.timestamp.empty()) clocks.wall = [ts = args.timestamp] { return ts; };

  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    if (!file) {
      std::cerr << "cannot write " << args.out << '\n';
      return kUsageError;
    }
  }
  std::ostream& out = args.out.empty() ? std::cout : file;

  if (!args.image.empty()) {
    const auto report = pipeline::run_pipeline(args.image, cfg, resources, detector, clocks);
    out << pipeline::report_to_json(report) << '\n';
    if (report.failure) std::cerr << report.image_id << ": " << *report.failure << '\n';
    return pipeline::exit_code(report);
  }
  try {
    const auto reports = pipeline::run_batch(args.batch, cfg, resources, detector, clocks, out);
    int code = 0;
    for (const auto& r : reports) {
      if (r.failure) std::cerr << r.image_id << ": " << *r.failure << '\n';
      code = std::max(code, pipeline::exit_code(r));
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "batch error: " << e.what() << '\n';
    return kUsageError;
  }
}

int do_eval(const std::string& pred, const std::string& gt, const std::string& mode, double iou) {
  nlohmann::ordered_json j;
  try {
    if (mode == "det") {
      const auto s = pipeline::eval_detection(pipeline::load_detection_pairs(pred, gt), iou);
      j = {{"precision", s.precision}, {"recall", s.recall}, {"f_score", s.f_score}};
    } else if (mode == "rec") {
      const auto s = pipeline::eval_recognition(pipeline::load_text_pairs(pred, gt));
      j = {{"precision", s.precision}, {"recall", s.recall}};
    } else {
      const auto s = pipeline::eval_location(pipeline::load_location_pairs(pred, gt));
      j = {{"mean_km", s.mean_km},
           {"resolved", s.resolved},
           {"total", s.total},
           {"resolution_rate", s.resolution_rate}};
    }
  } catch (const std::exception& e) {
    std::cerr << "eval error: " << e.what() << '\n';
    return kUsageError;
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int do_import(const std::string& source, const std::string& input, const std::string& output) {
  try {
    std::size_t n = 0;
    if (source == "csdb") {
      auto rows = georesolve::import_pincode_directory(input);
      georesolve::Gazetteer(rows, {}, {});
      georesolve::save_csdb(output, rows);
      n = rows.size();
    } else if (source == "lldb") {
      auto rows = georesolve::import_city_coordinates(input);
      georesolve::Gazetteer({}, rows, {});
      georesolve::save_lldb(output, rows);
      n = rows.size();
    } else {
      auto rows = georesolve::import_language_table(input);
      georesolve::Gazetteer({}, {}, rows);
      georesolve::save_rldb(output, rows);
      n = rows.size();
    }
    std::cerr << "wrote " << n << " rows to " << output << '\n';
  } catch (const std::exception& e) {
    std::cerr << "import error: " << e.what() << '\n';
    return kUsageError;
  }
  return 0;
}

struct TrainArgs {
  std::string out;
  std::vector<std::string> words;
  seqnet::TrainConfig train;
  double target_loss = 0.1;
};

int do_train(TrainArgs args) {
  try {
    if (args.words.empty()) args.words = toyfont::sample_words();
    for (const auto& w : args.words)
      for (char c : w)
        if (!toyfont::has_glyph(c)) throw Error("no toy glyph for '" + std::string(1, c) + "' in " + w);
    args.train.validate();
    const auto alphabet = seqnet::Alphabet::english();
    const auto data = toyfont::training_set(args.words, alphabet);
    auto params = seqnet::SeqNetParams::random(seqnet::NetShape{}, args.train.seed);
    const auto report = seqnet::train(params, data, args.train, [&](int it, double loss) {
      if (it % 100 == 0) std::cerr << "iteration " << it << " loss " << loss << '\n';
      return loss < args.target_loss;
    });
    int exact = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto best = seqnet::ctc_best_path_decode(seqnet::predict(data[i].strips, params));
      exact += alphabet.decode(best.labels) == args.words[i];
    }
    fs::create_directories(args.out);
    seqnet::save_params(fs::path(args.out) / "en.params", params);
    alphabet.save(fs::path(args.out) / "en.txt");
    std::cerr << "stopped after " << report.iterations << " iterations, loss " << report.mean_loss << ", "
              << exact << "/" << data.size() << " words exact\n";
  } catch (const std::exception& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kUsageError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene text to location and regional language"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the pipeline on one image or a directory");
  auto* image_opt = run->add_option("--image", run_args.image, "Image file");
  auto* batch_opt = run->add_option("--batch", run_args.batch, "Directory of images");
  image_opt->excludes(batch_opt);
  run->add_option("--config", run_args.config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Write JSON-lines reports here instead of stdout");
  run->add_option("--timestamp", run_args.timestamp, "Fixed resolved_at value for geotags");
  const std::vector<std::pair<std::string, std::string>> override_keys{
      {"--debug-dir", "debug_dir"},   {"--score-thresh", "score_thresh"},
      {"--nms-iou", "nms_iou"},       {"--grow-step", "grow_step"},
      {"--max-growth", "max_growth"}, {"--heads", "heads"},
      {"--gate-threshold", "gate_threshold"}, {"--csdb", "csdb"},
      {"--lldb", "lldb"},             {"--rldb", "rldb"},
      {"--maps-dir", "maps_dir"},     {"--geotag-file", "geotag_file"}};
  std::vector<std::string> override_values(override_keys.size());
  for (std::size_t i = 0; i < override_keys.size(); ++i)
    run->add_option(override_keys[i].first, override_values[i], "Overrides config key " + override_keys[i].second);

  std::string pred, gt, mode;
  double iou = 0.5;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", pred, "Predictions (JSON lines)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Ground truth (JSON lines)")->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", mode, "det, rec or loc")->required()->check(CLI::IsMember({"det", "rec", "loc"}));
  eval->add_option("--iou", iou, "Detection match threshold")->check(CLI::Range(0.0, 1.0));

  std::string source, input, output;
  auto* import = app.add_subcommand("import-db", "Convert a public source table to a database CSV");
  import->add_option("--source", source, "csdb, lldb or rldb")->required()->check(CLI::IsMember({"csdb", "lldb", "rldb"}));
  import->add_option("--input", input, "Source file")->required()->check(CLI::ExistingFile);
  import->add_option("--output", output, "Database CSV to write")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train-toy", "Train the reference English head on rendered words");
  train->add_option("--out", train_args.out, "Directory for en.params and en.txt")->required();
  train->add_option("--words", train_args.words, "Training words (A-Z, 0-9)")->delimiter(',');
  train->add_option("--iterations", train_args.train.iterations);
  train->add_option("--lr", train_args.train.learning_rate);
  train->add_option("--momentum", train_args.train.momentum);
  train->add_option("--seed", train_args.train.seed);
  train->add_option("--target-loss", train_args.target_loss);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (*run) {
    if (run_args.image.empty() == run_args.batch.empty()) {
      std::cerr << "run: exactly one of --image or --batch is required\n";
      return kUsageError;
    }
    for (std::size_t i = 0; i < override_keys.size(); ++i)
      if (run->count(override_keys[i].first)) run_args.overrides.emplace_back(override_keys[i].second, override_values[i]);
    return do_run(run_args);
  }
  if (*eval) return do_eval(pred, gt, mode, iou);
  if (*import) return do_import(source, input, output);
  return do_train(train_args);
}
