#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2l/detect.hpp"
#include "s2l/georesolve.hpp"
#include "s2l/imgproc.hpp"
#include "s2l/lingua.hpp"
#include "s2l/segment.hpp"
#include "s2l/seqnet.hpp"

namespace s2l::pipeline {

// ---------------------------------------------------------------------------
// EXIF

struct GpsFix {
  double latitude = 0;
  double longitude = 0;
};

/// GPS latitude/longitude from the Exif APP1 segment of a JPEG byte stream.
/// Returns nullopt when the data is not a JPEG, has no GPS IFD, or is
/// malformed in any way.
std::optional<GpsFix> read_exif_gps(std::span<const std::uint8_t> jpeg);
std::optional<GpsFix> read_exif_gps(const std::filesystem::path& path);

/// APP1 payload ("Exif\0\0" + little-endian TIFF) holding only a GPS IFD.
std::vector<std::uint8_t> make_exif_gps(const GpsFix& fix);

// ---------------------------------------------------------------------------
// Configuration

struct HeadSpec {
  std::string id;
  std::filesystem::path params;
  std::filesystem::path alphabet;
};

struct PipelineConfig {
  bool correction_enabled = true;
  imgproc::CorrectionConfig correction;
  imgproc::Kernel psf = imgproc::Kernel::gaussian(3, 0.6);
  double score_thresh = 0.8;
  double nms_iou = 0.2;
  std::optional<std::filesystem::path> maps_dir;
  segment::SegmentConfig segment;
  std::vector<HeadSpec> heads;
  double gate_threshold = 0.5;
  std::filesystem::path csdb;
  std::filesystem::path lldb;
  std::filesystem::path rldb;
  std::optional<std::filesystem::path> dictionary;
  std::optional<std::filesystem::path> geotag_file;
  std::optional<std::filesystem::path> debug_dir;

  /// Ranges of every numeric setting and existence of every input path.
  void validate() const;
};

/// Applies one `key = value` setting. Relative paths are taken against
/// `base_dir`. Unknown keys throw.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

/// Flat `key = value` lines; '#' starts a comment.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
/// Parses and validates a config file; relative paths resolve against its
/// directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// "identity", "box:N" or "gaussian:N:SIGMA".
imgproc::Kernel parse_kernel(const std::string& text);

// ---------------------------------------------------------------------------
// Running

/// Read-only resources shared by every image.
struct Resources {
  std::vector<seqnet::Head> heads;
  georesolve::Gazetteer gazetteer;
  lingua::TranslationDict dictionary;
  lingua::PlaceIndex places;

  static Resources load(const PipelineConfig& cfg);
};

struct Clocks {
  georesolve::Clock wall = georesolve::utc_now;
  /// Monotonic seconds, used for stage timings.
  std::function<double()> stopwatch;

  static Clocks system();
  /// Fixed timestamp and a stopwatch that never advances.
  static Clocks frozen(const std::string& timestamp);
};

enum class Outcome { Resolved, Unresolved, StageFailure };
std::string to_string(Outcome o);

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

inline const std::vector<std::string> kStageOrder{
    "load",        "exif",      "correction", "detection",  "segmentation",
    "recognition", "script",    "translation", "tokenize",  "keywords",
    "resolution",  "reverse_geocode", "languages", "geotag"};

struct PipelineReport {
  std::string image_id;
  std::vector<std::string> stages;  // stages reached, in order
  std::vector<StageTiming> timings;

  std::optional<GpsFix> exif_gps;
  std::optional<bool> corrected;
  std::optional<std::string> brightness;
  std::vector<detect::Quad> quads;
  std::vector<segment::BBox> detected;
  std::vector<segment::BBox> grown;
  std::optional<segment::HullPolygon> hull;
  std::optional<std::string> text;
  std::optional<std::string> head;
  std::optional<lingua::ScriptId> script;
  std::optional<std::string> translated;
  std::vector<lingua::Token> tokens;
  std::vector<lingua::Token> keywords;
  std::vector<georesolve::Candidate> candidates;
  std::optional<georesolve::ResolutionStage> resolution_stage;
  std::optional<georesolve::GeoTuple> resolved;
  std::optional<georesolve::LldbRecord> nearest;
  std::vector<std::string> languages;
  std::optional<georesolve::GeotagRecord> geotag;

  Outcome outcome = Outcome::StageFailure;
  std::optional<std::string> failed_stage;
  std::optional<std::string> failure;
};

/// 0 resolved, 2 unresolved location, 3 stage failure.
int exit_code(const PipelineReport& report);
int exit_code(Outcome outcome);

std::string report_to_json(const PipelineReport& report);

/// Runs every stage on one image file. Never throws for bad input: errors
/// are recorded in the report against the stage that raised them.
PipelineReport run_pipeline(const std::filesystem::path& image_path, const PipelineConfig& cfg,
                            const Resources& resources, detect::DetectorBackend& detector,
                            const Clocks& clocks);

/// Image files (png, jpg, jpeg, pgm, ppm) directly inside `dir`, sorted.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Runs every image in `dir` independently and writes one JSON line per
/// image to `out` as it finishes.
std::vector<PipelineReport> run_batch(const std::filesystem::path& dir, const PipelineConfig& cfg,
                                      const Resources& resources, detect::DetectorBackend& detector,
                                      const Clocks& clocks, std::ostream& out);

// ---------------------------------------------------------------------------
// Evaluation

struct DetectionPair {
  std::string image_id;
  std::vector<detect::Quad> predicted;
  std::vector<detect::Quad> ground_truth;
};

struct TextPair {
  std::string image_id;
  std::string predicted;
  std::string ground_truth;
};

struct LocationPair {
  std::string image_id;
  std::optional<georesolve::LatLon> predicted;
  std::optional<georesolve::LatLon> ground_truth;
};

struct DetectionScores {
  double precision = 0;
  double recall = 0;
  double f_score = 0;
};

struct RecognitionScores {
  double precision = 0;
  double recall = 0;
};

struct LocationScores {
  double mean_km = 0;
  std::size_t resolved = 0;
  std::size_t total = 0;
  double resolution_rate = 0;
};

/// Greedy one-to-one matching per image, highest IoU first, counting pairs
/// with IoU >= iou_thresh. Counts are pooled over all images.
DetectionScores eval_detection(const std::vector<DetectionPair>& pairs, double iou_thresh = 0.5);
/// Word-level exact match over tokenized texts (multiset intersection).
RecognitionScores eval_recognition(const std::vector<TextPair>& pairs);
/// Mean haversine distance over pairs where both sides are present. Throws
/// "nothing to average" when there are none.
LocationScores eval_location(const std::vector<LocationPair>& pairs);

// JSON-lines inputs keyed by image_id. Ground-truth ids without a
// prediction are paired with an empty prediction; a prediction id missing
// from the ground truth is an error.
std::vector<DetectionPair> load_detection_pairs(const std::filesystem::path& pred,
                                                const std::filesystem::path& gt);
std::vector<TextPair> load_text_pairs(const std::filesystem::path& pred, const std::filesystem::path& gt);
std::vector<LocationPair> load_location_pairs(const std::filesystem::path& pred,
                                              const std::filesystem::path& gt);

}  // namespace s2l::pipeline
