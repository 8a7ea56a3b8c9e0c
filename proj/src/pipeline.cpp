#include "s2l/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <ostream>

#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/utf8.hpp"

namespace s2l::pipeline {

using nlohmann::ordered_json;

Resources Resources::load(const PipelineConfig& cfg) {
  Resources r;
  for (const auto& entry : cfg.heads) {
    seqnet::Head head{entry.id, seqnet::Alphabet::load(entry.alphabet), seqnet::load_params(entry.params)};
    if (head.params.shape.classes != head.alphabet.size())
      throw Error("head " + entry.id + ": " + std::to_string(head.params.shape.classes) +
                  " output classes but alphabet has " + std::to_string(head.alphabet.size()));
    r.heads.push_back(std::move(head));
  }
  r.gazetteer = georesolve::Gazetteer::load(cfg.csdb, cfg.lldb, cfg.rldb);
  if (cfg.dictionary) r.dictionary = lingua::TranslationDict::load(*cfg.dictionary);
  r.places = r.gazetteer.place_index();
  return r;
}

Clocks Clocks::system() {
  Clocks c;
  c.stopwatch = [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
  return c;
}

Clocks Clocks::frozen(const std::string& timestamp) {
  Clocks c;
  c.wall = [timestamp] { return timestamp; };
  c.stopwatch = [] { return 0.0; };
  return c;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Resolved: return "resolved";
    case Outcome::Unresolved: return "unresolved";
    case Outcome::StageFailure: return "stage_failure";
  }
  return "?";
}

int exit_code(Outcome outcome) {
  switch (outcome) {
    case Outcome::Resolved: return 0;
    case Outcome::Unresolved: return 2;
    case Outcome::StageFailure: return 3;
  }
  return 3;
}

int exit_code(const PipelineReport& report) { return exit_code(report.outcome); }

namespace {

// Raised inside a stage when the location is legitimately not found, as
// opposed to the stage failing.
struct NotFound {
  std::string reason;
};

class StageRunner {
 public:
  StageRunner(PipelineReport& report, const Clocks& clocks) : report_(report), clocks_(clocks) {}

  template <class Fn>
  bool operator()(const std::string& name, Fn&& fn) {
    report_.stages.push_back(name);
    const double t0 = clocks_.stopwatch();
    bool ok = false;
    try {
      fn();
      ok = true;
    } catch (const NotFound& nf) {
      report_.outcome = Outcome::Unresolved;
      report_.failed_stage = name;
      report_.failure = nf.reason;
    } catch (const std::exception& e) {
      report_.outcome = Outcome::StageFailure;
      report_.failed_stage = name;
      report_.failure = e.what();
    }
    report_.timings.push_back({name, clocks_.stopwatch() - t0});
    return ok;
  }

 private:
  PipelineReport& report_;
  const Clocks& clocks_;
};

void dump(const PipelineConfig& cfg, const std::string& image_id, const std::string& suffix,
          const RgbImage& img) {
  if (!cfg.debug_dir) return;
  std::filesystem::create_directories(*cfg.debug_dir);
  write_png(*cfg.debug_dir / (image_id + "." + suffix + ".png"), img);
}

GrayImage mask_image(const segment::BinaryMask& mask) {
  GrayImage out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) out.data[i] = mask.bits[i] ? 255 : 0;
  return out;
}

// Smallest pincode among post offices of the city's division.
int pincode_for(const georesolve::LldbRecord& city, const georesolve::Gazetteer& gaz) {
  int best = 0;
  const std::string key = utf8::lookup_key(city.city_name);
  for (const auto& row : gaz.csdb())
    if (utf8::lookup_key(row.div_name) == key && (best == 0 || row.pincode < best)) best = row.pincode;
  return best;
}

std::mutex& geotag_mutex() {
  static std::mutex m;
  return m;
}

void locate_and_tag(StageRunner& stage, PipelineReport& report, const PipelineConfig& cfg,
                    const Resources& res, const Clocks& clocks, double lat, double lon,
                    const std::optional<georesolve::GeoTuple>& tuple) {
  if (!stage("reverse_geocode", [&] {
        report.nearest = georesolve::reverse_geocode(lat, lon, res.gazetteer.lldb());
      }))
    return;
  if (!stage("languages", [&] { report.languages = georesolve::languages_for(*report.nearest, res.gazetteer); }))
    return;
  stage("geotag", [&] {
    const georesolve::GeoTuple t = tuple ? *tuple : georesolve::GeoTuple{lat, lon, pincode_for(*report.nearest, res.gazetteer)};
    report.geotag = georesolve::geotag(report.image_id, t, report.languages, report.nearest->city_name, clocks.wall);
    if (cfg.geotag_file) {
      std::lock_guard lock(geotag_mutex());
      georesolve::append_geotag(*cfg.geotag_file, *report.geotag);
    }
    report.outcome = Outcome::Resolved;
  });
}

}  // namespace

PipelineReport run_pipeline(const std::filesystem::path& image_path, const PipelineConfig& cfg,
                            const Resources& res, detect::DetectorBackend& detector,
                            const Clocks& clocks) {
  PipelineReport report;
  report.image_id = image_path.filename().string();
  StageRunner stage(report, clocks);

  RgbImage image;
  if (!stage("load", [&] { image = read_rgb(image_path); })) return report;
  if (!stage("exif", [&] { report.exif_gps = read_exif_gps(image_path); })) return report;
  if (report.exif_gps) {
    locate_and_tag(stage, report, cfg, res, clocks, report.exif_gps->latitude, report.exif_gps->longitude,
                   std::nullopt);
    return report;
  }

  RgbImage corrected;
  if (!stage("correction", [&] {
        if (cfg.correction_enabled) {
          const auto result = imgproc::correct(image, cfg.correction, cfg.psf);
          corrected = result.image;
          report.corrected = true;
          report.brightness = result.brightness == imgproc::Brightness::Dark ? "dark" : "bright";
        } else {
          corrected = image;
          report.corrected = false;
        }
        dump(cfg, report.image_id, "corrected", corrected);
      }))
    return report;

  if (!stage("detection", [&] {
        const auto maps = detector.predict(corrected, image_path);
        const auto raw = detect::decode_rbox(maps.score, maps.geo, cfg.score_thresh, maps.scale);
        report.quads = detect::locality_aware_nms(raw, cfg.nms_iou);
        if (report.quads.empty()) throw Error("no text detected");
      }))
    return report;

  segment::Segmentation seg;
  if (!stage("segmentation", [&] {
        seg = segment::segment_text_region(corrected, report.quads, cfg.segment);
        report.detected = seg.detected;
        report.grown = seg.grown;
        report.hull = seg.hull;
        dump(cfg, report.image_id, "masked", seg.masked);
        dump(cfg, report.image_id, "mask", to_rgb(mask_image(seg.mask)));
      }))
    return report;

  if (!stage("recognition", [&] {
        const auto rec = seqnet::recognize(seg.masked, seg.detected, res.heads, cfg.gate_threshold);
        report.text = rec.text;
        report.head = rec.language;
        if (rec.text.empty()) throw Error("no text recognized");
      }))
    return report;

  if (!stage("script", [&] { report.script = lingua::detect_script(*report.text); })) return report;
  if (!stage("translation", [&] { report.translated = res.dictionary.translate(*report.text); }))
    return report;
  if (!stage("tokenize", [&] { report.tokens = lingua::tokenize(*report.translated); })) return report;
  if (!stage("keywords", [&] {
        report.keywords = lingua::filter_location_tokens(report.tokens, res.places);
        if (report.keywords.empty()) throw NotFound{"no location keywords"};
      }))
    return report;

  if (!stage("resolution", [&] {
        const auto r = georesolve::resolve_location(report.tokens, report.keywords, report.script, res.gazetteer);
        report.candidates = r.candidates;
        report.resolution_stage = r.stage;
        if (!r.chosen) throw NotFound{"Location cannot be found"};
        report.resolved = r.chosen->tuple;
      }))
    return report;

  locate_and_tag(stage, report, cfg, res, clocks, report.resolved->latitude, report.resolved->longitude,
                 report.resolved);
  return report;
}

namespace {

ordered_json box_json(const segment::BBox& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

ordered_json tuple_json(const georesolve::GeoTuple& t) {
  return {{"latitude", t.latitude}, {"longitude", t.longitude}, {"pincode", t.pincode}};
}

}  // namespace

std::string report_to_json(const PipelineReport& r) {
  ordered_json j;
  j["image_id"] = r.image_id;
  j["outcome"] = to_string(r.outcome);
  j["exit_code"] = exit_code(r);
  j["stages"] = r.stages;
  if (r.failed_stage) j["failed_stage"] = *r.failed_stage;
  if (r.failure) j["failure"] = *r.failure;
  if (r.exif_gps) j["exif_gps"] = {{"latitude", r.exif_gps->latitude}, {"longitude", r.exif_gps->longitude}};
  if (r.corrected) j["corrected"] = *r.corrected;
  if (r.brightness) j["brightness"] = *r.brightness;
  if (!r.quads.empty()) {
    auto& quads = j["quads"] = ordered_json::array();
    for (const auto& q : r.quads) {
      ordered_json pts = ordered_json::array();
      for (const auto& p : q.pts) {
        pts.push_back(p.x);
        pts.push_back(p.y);
      }
      quads.push_back({{"points", pts}, {"score", q.score}});
    }
  }
  if (!r.detected.empty()) {
    auto& a = j["detected_boxes"] = ordered_json::array();
    for (const auto& b : r.detected) a.push_back(box_json(b));
  }
  if (!r.grown.empty()) {
    auto& a = j["grown_boxes"] = ordered_json::array();
    for (const auto& b : r.grown) a.push_back(box_json(b));
  }
  if (r.hull) {
    auto& a = j["hull"] = ordered_json::array();
    for (const auto& p : r.hull->vertices) a.push_back({p.x, p.y});
  }
  if (r.text) j["text"] = *r.text;
  if (r.head) j["head"] = *r.head;
  if (r.script) j["script"] = lingua::to_string(*r.script);
  if (r.translated) j["translated"] = *r.translated;
  if (!r.tokens.empty()) {
    auto& a = j["tokens"] = ordered_json::array();
    for (const auto& t : r.tokens) a.push_back(t.text);
  }
  if (!r.keywords.empty()) {
    auto& a = j["keywords"] = ordered_json::array();
    for (const auto& t : r.keywords) a.push_back(t.text);
  }
  if (r.resolution_stage) {
    auto& a = j["candidates"] = ordered_json::array();
    for (const auto& c : r.candidates) {
      auto cj = tuple_json(c.tuple);
      cj["state"] = c.state;
      cj["place"] = c.place;
      a.push_back(cj);
    }
    j["resolution_stage"] = georesolve::to_string(*r.resolution_stage);
  }
  if (r.resolved) j["resolved"] = tuple_json(*r.resolved);
  if (r.nearest)
    j["nearest"] = {{"city_id", r.nearest->city_id},   {"city_name", r.nearest->city_name},
                    {"latitude", r.nearest->latitude}, {"longitude", r.nearest->longitude},
                    {"state", r.nearest->state}};
  if (!r.languages.empty()) j["languages"] = r.languages;
  if (r.geotag) j["geotag"] = ordered_json::parse(georesolve::geotag_to_json(*r.geotag));
  auto& timings = j["timings"] = ordered_json::object();
  for (const auto& t : r.timings) timings[t.stage] = t.seconds;
  return j.dump();
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = utf8::fold_case(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm" || ext == ".ppm")
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PipelineReport> run_batch(const std::filesystem::path& dir, const PipelineConfig& cfg,
                                      const Resources& resources, detect::DetectorBackend& detector,
                                      const Clocks& clocks, std::ostream& out) {
  std::vector<PipelineReport> reports;
  for (const auto& path : list_images(dir)) {
    reports.push_back(run_pipeline(path, cfg, resources, detector, clocks));
    out << report_to_json(reports.back()) << '\n' << std::flush;
  }
  return reports;
}

}  // namespace s2l::pipeline
