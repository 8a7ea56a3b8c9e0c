#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/pipeline.hpp"
#include "support.hpp"

using namespace s2l;
using namespace s2l::pipeline;
using detect::Quad;

namespace {

// Scratch directory with a trained head, the worked-example tables and a
// config pointing at them.
struct Env {
  std::filesystem::path dir;
  PipelineConfig cfg;
  Resources res;

  explicit Env(const std::string& name, const std::string& extra = "") {
    dir = s2l::testing::scratch_dir(name);
    s2l::testing::save_head(dir / "heads", s2l::testing::quick_head());
    const auto tables = s2l::testing::data_dir() / "fixtures" / "tables";
    std::ofstream(dir / "s2l.conf") << "# test config\n"
                                    << "head.en.params = heads/en.params\n"
                                    << "head.en.alphabet = heads/en.txt\n"
                                    << "csdb = " << (tables / "csdb.csv").string() << "\n"
                                    << "lldb = " << (tables / "lldb.csv").string() << "\n"
                                    << "rldb = " << (tables / "rldb.csv").string() << "\n"
                                    << "dictionary = "
                                    << (s2l::testing::data_dir() / "dictionaries" / "hi_en.tsv").string() << "\n"
                                    << "geotag_file = geotags.jsonl\n"
                                    << extra;
    cfg = load_config(dir / "s2l.conf");
    res = Resources::load(cfg);
  }
  ~Env() { std::filesystem::remove_all(dir); }

  PipelineReport run(const std::filesystem::path& image, const Clocks& clocks = Clocks::frozen("2026-01-01T00:00:00Z")) {
    detect::FixtureBackend backend(cfg.maps_dir);
    return run_pipeline(image, cfg, res, backend, clocks);
  }
};

s2l::testing::Sign blank_sign() {
  auto sign = s2l::testing::make_sign({"AB"});
  sign.image = RgbImage(sign.image.width, sign.image.height, 40);
  std::fill(sign.maps.score.values.begin(), sign.maps.score.values.end(), 0.0f);
  return sign;
}

std::vector<std::string> stages_until(const std::string& last) {
  std::vector<std::string> out;
  for (const auto& s : kStageOrder) {
    out.push_back(s);
    if (s == last) break;
  }
  return out;
}

}  // namespace

TEST(Exif, GpsRoundTripThroughJpeg) {
  const auto dir = s2l::testing::scratch_dir("exif");
  for (const GpsFix fix : {GpsFix{25.88, 86.59}, GpsFix{-33.8568, -151.2153}, GpsFix{0, 0}}) {
    write_jpeg(dir / "g.jpg", RgbImage(16, 8, 120), make_exif_gps(fix));
    const auto got = read_exif_gps(dir / "g.jpg");
    ASSERT_TRUE(got);
    EXPECT_NEAR(got->latitude, fix.latitude, 1e-7);
    EXPECT_NEAR(got->longitude, fix.longitude, 1e-7);
  }
  write_jpeg(dir / "plain.jpg", RgbImage(16, 8, 120));
  EXPECT_FALSE(read_exif_gps(dir / "plain.jpg"));
  write_png(dir / "p.png", RgbImage(4, 4));
  EXPECT_FALSE(read_exif_gps(dir / "p.png"));
  std::filesystem::remove_all(dir);
}

TEST(Exif, MalformedPayloadsAreIgnored) {
  const std::vector<std::uint8_t> app1 = make_exif_gps({10, 20});
  std::vector<std::uint8_t> jpeg{0xFF, 0xD8, 0xFF, 0xE1};
  const std::size_t len = app1.size() + 2;
  jpeg.push_back(static_cast<std::uint8_t>(len >> 8));
  jpeg.push_back(static_cast<std::uint8_t>(len & 0xFF));
  jpeg.insert(jpeg.end(), app1.begin(), app1.end());
  ASSERT_TRUE(read_exif_gps(jpeg));
  for (std::size_t cut = 0; cut < jpeg.size(); cut += 7) {
    const std::vector<std::uint8_t> truncated(jpeg.begin(), jpeg.begin() + static_cast<long>(cut));
    EXPECT_FALSE(read_exif_gps(truncated)) << cut;
  }
  auto bad = jpeg;
  bad[6 + 6] = 'X';  // byte order mark
  EXPECT_FALSE(read_exif_gps(bad));
}

TEST(Config, ParsesKeysAndResolvesPaths) {
  const auto cfg = parse_config(
      "correction = off\n"
      "gamma = 2.0   # brighter\n"
      "psf = box:5\n"
      "score_thresh = 0.7\n"
      "head.hi.params = h/hi.params\n"
      "head.hi.alphabet = h/hi.txt\n"
      "head.en.params = h/en.params\n"
      "head.en.alphabet = h/en.txt\n"
      "heads = en,hi\n"
      "csdb = /abs/c.csv\n",
      "/base");
  EXPECT_FALSE(cfg.correction_enabled);
  EXPECT_EQ(cfg.correction.gamma, 2.0);
  EXPECT_EQ(cfg.psf.width, 5);
  EXPECT_EQ(cfg.score_thresh, 0.7);
  ASSERT_EQ(cfg.heads.size(), 2u);
  EXPECT_EQ(cfg.heads[0].id, "en");
  EXPECT_EQ(cfg.heads[1].params, std::filesystem::path("/base/h/hi.params"));
  EXPECT_EQ(cfg.csdb, std::filesystem::path("/abs/c.csv"));
}

TEST(Config, Defaults) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.score_thresh, 0.8);
  EXPECT_EQ(cfg.nms_iou, 0.2);
  EXPECT_EQ(cfg.gate_threshold, 0.5);
  EXPECT_TRUE(cfg.correction_enabled);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("bogus = 1\n"), Error);
  EXPECT_THROW(parse_config("score_thresh\n"), Error);
  EXPECT_THROW(parse_config("score_thresh = abc\n"), Error);
  EXPECT_THROW(parse_config("heads = en\n"), Error);
  EXPECT_THROW(parse_config("psf = triangle\n"), Error);
  try {
    parse_config("\n\ngate_threshold = x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(load_config("/nonexistent/s2l.conf"), Error);
}

TEST(Config, ValidateRangesAndFiles) {
  Env env("cfgval");
  EXPECT_NO_THROW(env.cfg.validate());
  auto bad = env.cfg;
  bad.score_thresh = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = env.cfg;
  bad.nms_iou = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = env.cfg;
  bad.csdb = env.dir / "missing.csv";
  EXPECT_THROW(bad.validate(), Error);
  bad = env.cfg;
  set_config_value(bad, "grow_step", "0");
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Pipeline, GpsShortCircuit) {
  Env env("gps");
  write_jpeg(env.dir / "tagged.jpg", RgbImage(32, 32, 90), make_exif_gps({20, 89}));
  const auto r = env.run(env.dir / "tagged.jpg");
  EXPECT_EQ(r.outcome, Outcome::Resolved);
  EXPECT_EQ(r.stages, (std::vector<std::string>{"load", "exif", "reverse_geocode", "languages", "geotag"}));
  ASSERT_TRUE(r.nearest);
  EXPECT_EQ(r.nearest->city_name, "Saharsa");
  EXPECT_EQ(r.languages, (std::vector<std::string>{"Hindi", "Maithili"}));
  ASSERT_TRUE(r.geotag);
  EXPECT_EQ(r.geotag->pincode, 852201);
  EXPECT_EQ(r.geotag->resolved_at, "2026-01-01T00:00:00Z");
}

TEST(Pipeline, KaharaEndToEnd) {
  Env env("e2e", "debug_dir = debug\n");
  std::filesystem::create_directories(env.dir / "debug");
  const auto image = s2l::testing::write_sign(env.dir, "kahara", s2l::testing::make_sign({"KAHARA"}));
  const auto r = env.run(image);
  ASSERT_EQ(r.outcome, Outcome::Resolved) << r.failed_stage.value_or("") << ": " << r.failure.value_or("");
  EXPECT_EQ(exit_code(r), 0);
  EXPECT_EQ(r.stages, kStageOrder);
  EXPECT_EQ(r.text, "KAHARA");
  EXPECT_EQ(r.script, lingua::ScriptId::Latin);
  EXPECT_EQ(r.resolution_stage, georesolve::ResolutionStage::Direct);
  ASSERT_TRUE(r.resolved);
  EXPECT_DOUBLE_EQ(r.resolved->latitude, 25.88);
  EXPECT_DOUBLE_EQ(r.resolved->longitude, 86.59);
  EXPECT_EQ(r.resolved->pincode, 852201);
  EXPECT_EQ(r.languages, (std::vector<std::string>{"Hindi", "Maithili"}));

  const auto tags = georesolve::read_geotags(env.dir / "geotags.jsonl");
  ASSERT_EQ(tags.size(), 1u);
  EXPECT_EQ(tags[0].image_id, "kahara.png");
  EXPECT_EQ(tags[0].pincode, 852201);
  for (const char* suffix : {".corrected.png", ".masked.png", ".mask.png"})
    EXPECT_TRUE(std::filesystem::exists(env.dir / "debug" / (std::string("kahara.png") + suffix))) << suffix;

  const auto again = env.run(image);
  EXPECT_EQ(report_to_json(again), report_to_json(r));
}

TEST(Pipeline, ReportJsonLayout) {
  Env env("json");
  const auto image = s2l::testing::write_sign(env.dir, "kahara", s2l::testing::make_sign({"KAHARA"}));
  const auto j = nlohmann::json::parse(report_to_json(env.run(image)));
  EXPECT_EQ(report_to_json(env.run(image)).rfind("{\"image_id\":\"kahara.png\",\"outcome\":\"resolved\"", 0), 0u);
  EXPECT_EQ(j["exit_code"], 0);
  EXPECT_EQ(j["resolved"]["pincode"], 852201);
  EXPECT_EQ(j["geotag"]["place"], "Saharsa");
  EXPECT_FALSE(j.contains("failed_stage"));
  EXPECT_EQ(j["timings"].size(), kStageOrder.size());
}

TEST(Pipeline, NoTextIsStageFailure) {
  Env env("notext");
  const auto image = s2l::testing::write_sign(env.dir, "blank", blank_sign());
  const auto r = env.run(image);
  EXPECT_EQ(r.outcome, Outcome::StageFailure);
  EXPECT_EQ(exit_code(r), 3);
  EXPECT_EQ(r.failed_stage, "detection");
  EXPECT_EQ(r.failure, "no text detected");
  EXPECT_EQ(r.stages, stages_until("detection"));
  EXPECT_FALSE(std::filesystem::exists(env.dir / "geotags.jsonl"));
}

TEST(Pipeline, MissingFilesAreStageFailures) {
  Env env("missing");
  const auto r = env.run(env.dir / "nope.png");
  EXPECT_EQ(r.failed_stage, "load");
  EXPECT_EQ(exit_code(r), 3);
  write_png(env.dir / "nomaps.png", RgbImage(8, 8));
  EXPECT_EQ(env.run(env.dir / "nomaps.png").failed_stage, "detection");
}

TEST(Pipeline, UnknownPlaceIsUnresolved) {
  Env env("unresolved");
  const auto image = s2l::testing::write_sign(env.dir, "delhi", s2l::testing::make_sign({"DELHI"}));
  const auto r = env.run(image);
  EXPECT_EQ(r.text, "DELHI");
  EXPECT_EQ(r.outcome, Outcome::Unresolved);
  EXPECT_EQ(exit_code(r), 2);
  EXPECT_EQ(r.failed_stage, "keywords");
  EXPECT_EQ(r.failure, "no location keywords");
  EXPECT_FALSE(r.geotag);
}

TEST(Pipeline, CorrectionCanBeDisabled) {
  Env env("nocorr", "correction = off\n");
  const auto image = s2l::testing::write_sign(env.dir, "kahara", s2l::testing::make_sign({"KAHARA"}));
  const auto r = env.run(image);
  EXPECT_EQ(r.corrected, false);
  EXPECT_EQ(r.outcome, Outcome::Resolved);
}

TEST(Pipeline, TimingsFitInsideWallClock) {
  Env env("timing");
  const auto image = s2l::testing::write_sign(env.dir, "kahara", s2l::testing::make_sign({"KAHARA"}));
  const auto start = std::chrono::steady_clock::now();
  const auto r = env.run(image, Clocks::system());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double total = 0;
  for (const auto& t : r.timings) {
    EXPECT_GE(t.seconds, 0);
    total += t.seconds;
  }
  EXPECT_EQ(r.timings.size(), r.stages.size());
  EXPECT_LE(total, wall);
  EXPECT_GT(total, 0);
}

TEST(Batch, EveryImageReported) {
  Env env("batch");
  const auto in = env.dir / "in";
  std::filesystem::create_directories(in);
  s2l::testing::write_sign(in, "a_kahara", s2l::testing::make_sign({"KAHARA"}));
  s2l::testing::write_sign(in, "b_delhi", s2l::testing::make_sign({"DELHI"}));
  s2l::testing::write_sign(in, "c_blank", blank_sign());
  std::ofstream(in / "notes.txt") << "ignored";
  EXPECT_EQ(list_images(in).size(), 3u);
  std::ostringstream out;
  detect::FixtureBackend backend;
  const auto reports = run_batch(in, env.cfg, env.res, backend, Clocks::frozen("2026-01-01T00:00:00Z"), out);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(exit_code(reports[0]), 0);
  EXPECT_EQ(exit_code(reports[1]), 2);
  EXPECT_EQ(exit_code(reports[2]), 3);
  std::istringstream lines(out.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) EXPECT_EQ(nlohmann::json::parse(line)["image_id"], reports[n++].image_id);
  EXPECT_EQ(n, 3);
  EXPECT_EQ(georesolve::read_geotags(env.dir / "geotags.jsonl").size(), 1u);
}

TEST(EvalDetection, IdentityAndPartialMatch) {
  const auto a = Quad::axis_aligned(0, 0, 10, 10), b = Quad::axis_aligned(20, 0, 30, 10),
             c = Quad::axis_aligned(40, 0, 50, 10);
  const auto same = eval_detection({{"x", {a, b, c}, {a, b, c}}});
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f_score, 1.0);
  // IoU 0.6 for the first prediction, nothing for the far one.
  const auto part = eval_detection({{"x", {Quad::axis_aligned(0, 0, 10, 6), Quad::axis_aligned(100, 100, 110, 110)}, {a, b, c}}});
  EXPECT_DOUBLE_EQ(part.precision, 0.5);
  EXPECT_DOUBLE_EQ(part.recall, 1.0 / 3);
  EXPECT_DOUBLE_EQ(part.f_score, 0.4);
  EXPECT_EQ(eval_detection({{"x", {Quad::axis_aligned(0, 0, 10, 6)}, {a}}}, 0.7).precision, 0.0);
}

TEST(EvalDetection, OneToOneAndPooled) {
  const auto a = Quad::axis_aligned(0, 0, 10, 10);
  const auto s = eval_detection({{"x", {a, a}, {a}}, {"y", {}, {a}}});
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  const auto empty = eval_detection({{"x", {}, {}}});
  EXPECT_EQ(empty.f_score, 0.0);
}

TEST(EvalDetection, FScoreIsHarmonicMean) {
  const auto a = Quad::axis_aligned(0, 0, 10, 10), b = Quad::axis_aligned(20, 0, 30, 10);
  const auto s = eval_detection({{"x", {a}, {a, b}}});
  EXPECT_DOUBLE_EQ(s.f_score, 2 * s.precision * s.recall / (s.precision + s.recall));
}

TEST(EvalRecognition, WordMultiset) {
  const auto s = eval_recognition({{"a", "new delhi", "new delhi 110001"}});
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3);
  const auto dup = eval_recognition({{"a", "delhi delhi", "delhi"}});
  EXPECT_DOUBLE_EQ(dup.precision, 0.5);
  EXPECT_EQ(dup.recall, 1.0);
  EXPECT_EQ(eval_recognition({{"a", "Delhi", "delhi"}}).precision, 0.0);
}

TEST(EvalLocation, MeanDistanceAndRate) {
  const auto s = eval_location({{"a", georesolve::LatLon{11.67, 92.76}, georesolve::LatLon{25.88, 86.59}},
                                {"b", std::nullopt, georesolve::LatLon{25.88, 86.59}}});
  EXPECT_NEAR(s.mean_km, 1707.5209, 0.01);
  EXPECT_EQ(s.resolved, 1u);
  EXPECT_EQ(s.total, 2u);
  EXPECT_EQ(s.resolution_rate, 0.5);
  EXPECT_THROW(eval_location({{"b", std::nullopt, georesolve::LatLon{1, 2}}}), Error);
}

TEST(EvalLocation, PermutationInvariant) {
  std::vector<LocationPair> pairs{{"a", georesolve::LatLon{1, 2}, georesolve::LatLon{3, 4}},
                                  {"b", georesolve::LatLon{10, 20}, georesolve::LatLon{10, 21}},
                                  {"c", georesolve::LatLon{-5, 60}, georesolve::LatLon{0, 61}}};
  const double m = eval_location(pairs).mean_km;
  std::reverse(pairs.begin(), pairs.end());
  EXPECT_NEAR(eval_location(pairs).mean_km, m, 1e-9);
}

TEST(EvalFiles, BundledExamples) {
  const auto d = s2l::testing::data_dir() / "eval";
  const auto det = eval_detection(load_detection_pairs(d / "det_pred.jsonl", d / "det_gt.jsonl"));
  EXPECT_DOUBLE_EQ(det.f_score, 0.4);
  const auto rec = eval_recognition(load_text_pairs(d / "rec_pred.jsonl", d / "rec_gt.jsonl"));
  EXPECT_DOUBLE_EQ(rec.recall, 2.0 / 3);
  const auto loc = eval_location(load_location_pairs(d / "loc_pred.jsonl", d / "loc_gt.jsonl"));
  EXPECT_EQ(loc.resolved, 1u);
  // Records without text, such as failed run reports, count as empty predictions.
  EXPECT_EQ(load_text_pairs(d / "det_gt.jsonl", d / "rec_gt.jsonl")[0].predicted, "");
}

TEST(EvalFiles, MissingPredictionIsEmptyUnknownIdThrows) {
  const auto dir = s2l::testing::scratch_dir("evalfiles");
  std::ofstream(dir / "gt.jsonl") << "{\"image_id\":\"a\",\"text\":\"x y\"}\n{\"image_id\":\"b\",\"text\":\"z\"}\n";
  std::ofstream(dir / "pred.jsonl") << "{\"image_id\":\"b\",\"text\":\"z\"}\n";
  const auto pairs = load_text_pairs(dir / "pred.jsonl", dir / "gt.jsonl");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].predicted, "");
  std::ofstream(dir / "extra.jsonl") << "{\"image_id\":\"q\",\"text\":\"z\"}\n";
  EXPECT_THROW(load_text_pairs(dir / "extra.jsonl", dir / "gt.jsonl"), Error);
  std::filesystem::remove_all(dir);
}
