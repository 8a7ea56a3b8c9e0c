#include <algorithm>
#include <fstream>
#include <sstream>

#include "s2l/csv.hpp"
#include "s2l/error.hpp"
#include "s2l/pipeline.hpp"

namespace s2l::pipeline {

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw Error("config " + key + ": expected a number, got '" + v + "'");
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used == v.size()) return i;
  } catch (const std::logic_error&) {
  }
  throw Error("config " + key + ": expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw Error("config " + key + ": expected on/off, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = csv::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  const std::filesystem::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

HeadSpec& head_entry(PipelineConfig& cfg, const std::string& id) {
  for (auto& h : cfg.heads)
    if (h.id == id) return h;
  return cfg.heads.emplace_back(HeadSpec{id, {}, {}});
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw Error("config: " + what + " not set");
  if (!std::filesystem::is_regular_file(p)) throw Error("config: " + what + " not found: " + p.string());
}

}  // namespace

imgproc::Kernel parse_kernel(const std::string& text) {
  const auto parts = split_list(text, ':');
  if (parts.size() == 1 && parts[0] == "identity") return imgproc::Kernel::identity();
  if (parts.size() == 2 && parts[0] == "box") return imgproc::Kernel::box(to_int("psf", parts[1]));
  if (parts.size() == 3 && parts[0] == "gaussian")
    return imgproc::Kernel::gaussian(to_int("psf", parts[1]), to_double("psf", parts[2]));
  throw Error("config psf: expected identity, box:N or gaussian:N:SIGMA, got '" + text + "'");
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir) {
  const std::string& v = value;
  if (key == "correction") cfg.correction_enabled = to_bool(key, v);
  else if (key == "gamma") cfg.correction.gamma = to_double(key, v);
  else if (key == "dark_threshold") cfg.correction.dark_threshold = to_double(key, v);
  else if (key == "nlm_strength") cfg.correction.nlm_strength = to_double(key, v);
  else if (key == "nlm_patch") cfg.correction.nlm_patch = to_int(key, v);
  else if (key == "nlm_window") cfg.correction.nlm_window = to_int(key, v);
  else if (key == "wiener_balance") cfg.correction.wiener_balance = to_double(key, v);
  else if (key == "psf") cfg.psf = parse_kernel(v);
  else if (key == "score_thresh") cfg.score_thresh = to_double(key, v);
  else if (key == "nms_iou") cfg.nms_iou = to_double(key, v);
  else if (key == "maps_dir") cfg.maps_dir = resolve(base_dir, v);
  else if (key == "grow_step") cfg.segment.grow_step = to_int(key, v);
  else if (key == "max_growth") cfg.segment.max_growth = to_int(key, v);
  else if (key == "gate_threshold") cfg.gate_threshold = to_double(key, v);
  else if (key == "csdb") cfg.csdb = resolve(base_dir, v);
  else if (key == "lldb") cfg.lldb = resolve(base_dir, v);
  else if (key == "rldb") cfg.rldb = resolve(base_dir, v);
  else if (key == "dictionary") cfg.dictionary = resolve(base_dir, v);
  else if (key == "geotag_file") cfg.geotag_file = resolve(base_dir, v);
  else if (key == "debug_dir") cfg.debug_dir = resolve(base_dir, v);
  else if (key == "heads") {
    // Selects and orders previously defined heads.
    std::vector<HeadSpec> picked;
    for (const auto& id : split_list(v, ',')) {
      const auto it = std::find_if(cfg.heads.begin(), cfg.heads.end(),
                                   [&](const HeadSpec& h) { return h.id == id; });
      if (it == cfg.heads.end()) throw Error("config heads: head '" + id + "' is not defined");
      picked.push_back(*it);
    }
    if (picked.empty()) throw Error("config heads: empty list");
    cfg.heads = std::move(picked);
  } else if (key.starts_with("head.") && key.ends_with(".params") && key.size() > 12) {
    head_entry(cfg, key.substr(5, key.size() - 12)).params = resolve(base_dir, v);
  } else if (key.starts_with("head.") && key.ends_with(".alphabet") && key.size() > 14) {
    head_entry(cfg, key.substr(5, key.size() - 14)).alphabet = resolve(base_dir, v);
  } else {
    throw Error("unknown config key: " + key);
  }
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = csv::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = csv::trim(std::string_view(line).substr(0, eq));
    const std::string value = csv::trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(cfg, key, value, base_dir);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_config(ss.str(), path.parent_path());
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  correction.validate();
  psf.validate();
  if (!(score_thresh >= 0 && score_thresh <= 1)) throw Error("score_thresh outside [0,1]");
  if (!(nms_iou > 0 && nms_iou <= 1)) throw Error("nms_iou outside (0,1]");
  if (segment.grow_step <= 0) throw Error("grow_step must be positive");
  if (!(gate_threshold >= 0 && gate_threshold <= 1)) throw Error("gate_threshold outside [0,1]");
  if (heads.empty()) throw Error("config: no recognition heads defined");
  for (const auto& h : heads) {
    require_file(h.params, "head." + h.id + ".params");
    require_file(h.alphabet, "head." + h.id + ".alphabet");
  }
  require_file(csdb, "csdb");
  require_file(lldb, "lldb");
  require_file(rldb, "rldb");
  if (dictionary) require_file(*dictionary, "dictionary");
  if (maps_dir && !std::filesystem::is_directory(*maps_dir))
    throw Error("config: maps_dir not found: " + maps_dir->string());
  if (geotag_file) {
    const auto parent = geotag_file->parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
      throw Error("config: geotag_file directory not found: " + parent.string());
  }
}

}  // namespace s2l::pipeline
