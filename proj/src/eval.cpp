#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include <json.hpp>

#include "s2l/csv.hpp"
#include "s2l/error.hpp"
#include "s2l/pipeline.hpp"

namespace s2l::pipeline {

namespace {

double safe_iou(const detect::Quad& a, const detect::Quad& b) {
  try {
    return detect::iou(a, b);
  } catch (const Error&) {
    return 0.0;  // degenerate quads match nothing
  }
}

std::size_t greedy_matches(const std::vector<detect::Quad>& pred, const std::vector<detect::Quad>& gt,
                           double thresh) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double v = safe_iou(pred[i], gt[j]);
      if (v >= thresh) cand.emplace_back(v, i, j);
    }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<bool> pred_used(pred.size()), gt_used(gt.size());
  std::size_t matches = 0;
  for (const auto& [v, i, j] : cand) {
    if (pred_used[i] || gt_used[j]) continue;
    pred_used[i] = gt_used[j] = true;
    ++matches;
  }
  return matches;
}

}  // namespace

DetectionScores eval_detection(const std::vector<DetectionPair>& pairs, double iou_thresh) {
  std::size_t matches = 0, n_pred = 0, n_gt = 0;
  for (const auto& p : pairs) {
    matches += greedy_matches(p.predicted, p.ground_truth, iou_thresh);
    n_pred += p.predicted.size();
    n_gt += p.ground_truth.size();
  }
  DetectionScores s;
  if (n_pred) s.precision = static_cast<double>(matches) / static_cast<double>(n_pred);
  if (n_gt) s.recall = static_cast<double>(matches) / static_cast<double>(n_gt);
  // Same as 2PR / (P + R), without the intermediate rounding.
  if (matches) s.f_score = 2.0 * static_cast<double>(matches) / static_cast<double>(n_pred + n_gt);
  return s;
}

RecognitionScores eval_recognition(const std::vector<TextPair>& pairs) {
  std::size_t correct = 0, n_pred = 0, n_gt = 0;
  for (const auto& p : pairs) {
    std::map<std::string, std::size_t> gt_words;
    for (const auto& t : lingua::tokenize(p.ground_truth)) {
      ++gt_words[t.text];
      ++n_gt;
    }
    for (const auto& t : lingua::tokenize(p.predicted)) {
      ++n_pred;
      auto it = gt_words.find(t.text);
      if (it != gt_words.end() && it->second > 0) {
        --it->second;
        ++correct;
      }
    }
  }
  RecognitionScores s;
  if (n_pred) s.precision = static_cast<double>(correct) / static_cast<double>(n_pred);
  if (n_gt) s.recall = static_cast<double>(correct) / static_cast<double>(n_gt);
  return s;
}

LocationScores eval_location(const std::vector<LocationPair>& pairs) {
  LocationScores s;
  s.total = pairs.size();
  double sum = 0;
  for (const auto& p : pairs) {
    if (!p.predicted || !p.ground_truth) continue;
    sum += georesolve::haversine_km(*p.predicted, *p.ground_truth);
    ++s.resolved;
  }
  if (s.resolved == 0) throw Error("nothing to average");
  s.mean_km = sum / static_cast<double>(s.resolved);
  s.resolution_rate = static_cast<double>(s.resolved) / static_cast<double>(s.total);
  return s;
}

namespace {

using nlohmann::json;

// image_id -> record, in file order.
std::vector<std::pair<std::string, json>> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::pair<std::string, json>> out;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string())
      throw Error(where + ": record without image_id");
    std::string id = j["image_id"].get<std::string>();
    if (seen[id]++) throw Error(where + ": duplicate image_id " + id);
    out.emplace_back(std::move(id), std::move(j));
  }
  return out;
}

template <class Pair, class Fill>
std::vector<Pair> pair_up(const std::filesystem::path& pred, const std::filesystem::path& gt, Fill fill) {
  const auto gt_records = read_records(gt);
  std::map<std::string, json> preds;
  for (auto& [id, j] : read_records(pred)) preds.emplace(id, std::move(j));
  std::vector<Pair> out;
  for (const auto& [id, g] : gt_records) {
    Pair p;
    p.image_id = id;
    const auto it = preds.find(id);
    fill(p, it == preds.end() ? nullptr : &it->second, g);
    if (it != preds.end()) preds.erase(it);
    out.push_back(std::move(p));
  }
  if (!preds.empty()) throw Error("prediction for unknown image_id " + preds.begin()->first);
  return out;
}

std::vector<detect::Quad> quads_of(const json& j) {
  std::vector<detect::Quad> out;
  if (!j.contains("quads")) return out;
  try {
    for (const auto& q : j.at("quads")) {
      const json& pts = q.is_object() ? q.at("points") : q;
      if (pts.size() != 8) throw Error("a quad needs 8 coordinates");
      detect::Quad quad;
      for (int k = 0; k < 4; ++k) quad.pts[k] = {pts[2 * k].get<double>(), pts[2 * k + 1].get<double>()};
      quad.score = q.is_object() && q.contains("score") ? q["score"].get<double>() : 1.0;
      out.push_back(quad);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad quad list: ") + e.what());
  }
  return out;
}

std::optional<georesolve::LatLon> location_of(const json& j) {
  const json* src = &j;
  if (j.contains("resolved")) src = &j["resolved"];
  if (src->is_null() || !src->contains("latitude") || !src->contains("longitude")) return std::nullopt;
  const auto& lat = (*src)["latitude"];
  const auto& lon = (*src)["longitude"];
  if (!lat.is_number() || !lon.is_number()) return std::nullopt;
  return georesolve::LatLon{lat.get<double>(), lon.get<double>()};
}

std::string text_of(const json& j) {
  return j.contains("text") && j["text"].is_string() ? j["text"].get<std::string>() : std::string();
}

}  // namespace

std::vector<DetectionPair> load_detection_pairs(const std::filesystem::path& pred,
                                                const std::filesystem::path& gt) {
  return pair_up<DetectionPair>(pred, gt, [](DetectionPair& p, const json* pj, const json& gj) {
    if (pj) p.predicted = quads_of(*pj);
    p.ground_truth = quads_of(gj);
  });
}

std::vector<TextPair> load_text_pairs(const std::filesystem::path& pred, const std::filesystem::path& gt) {
  return pair_up<TextPair>(pred, gt, [](TextPair& p, const json* pj, const json& gj) {
    if (pj) p.predicted = text_of(*pj);
    p.ground_truth = text_of(gj);
  });
}

std::vector<LocationPair> load_location_pairs(const std::filesystem::path& pred,
                                              const std::filesystem::path& gt) {
  return pair_up<LocationPair>(pred, gt, [](LocationPair& p, const json* pj, const json& gj) {
    if (pj) p.predicted = location_of(*pj);
    p.ground_truth = location_of(gj);
  });
}

}  // namespace s2l::pipeline
