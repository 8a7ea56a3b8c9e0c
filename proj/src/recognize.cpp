#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "s2l/error.hpp"
#include "s2l/seqnet.hpp"

namespace s2l::seqnet {

Matrix strips_from_image(const GrayImage& binary) {
  if (binary.height != kStripHeight) throw Error("word image must be 32 px high");
  if (binary.width <= 0) throw Error("empty word image");
  const int steps = (binary.width + kStripWidth - 1) / kStripWidth;
  Matrix strips = Matrix::Zero(kStripHeight * kStripWidth, steps);
  for (int t = 0; t < steps; ++t)
    for (int y = 0; y < kStripHeight; ++y)
      for (int x = 0; x < kStripWidth; ++x) {
        const int sx = t * kStripWidth + x;
        if (sx < binary.width) strips(y * kStripWidth + x, t) = binary.at(sx, y) / 255.0;
      }
  return strips;
}

namespace {

GrayImage resize_bilinear(const GrayImage& src, int w, int h) {
  GrayImage out(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ay = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double ax = fx - x0;
      const double v = (1 - ay) * ((1 - ax) * src.at(x0, y0) + ax * src.at(x1, y0)) +
                       ay * ((1 - ax) * src.at(x0, y1) + ax * src.at(x1, y1));
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

// Otsu over the non-zero pixels only: zero is what masking leaves behind.
int otsu_nonzero(const GrayImage& img) {
  std::array<double, 256> hist{};
  for (auto v : img.data)
    if (v > 0) hist[v] += 1;
  double total = 0, sum_all = 0;
  for (int v = 1; v < 256; ++v) {
    total += hist[v];
    sum_all += v * hist[v];
  }
  int best_t = 0;
  double best = -1;
  double w0 = 0, sum0 = 0;
  for (int t = 1; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double d = sum0 / w0 - (sum_all - sum0) / w1;
    const double between = w0 * w1 * d * d;
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;  // 0 when the non-zero pixels are single-valued
}

}  // namespace

GrayImage prepare_word_image(const RgbImage& img, const segment::BBox& box) {
  const int x0 = std::clamp(box.x_min, 0, img.width);
  const int x1 = std::clamp(box.x_max, 0, img.width);
  const int y0 = std::clamp(box.y_min, 0, img.height);
  const int y1 = std::clamp(box.y_max, 0, img.height);
  if (x1 <= x0 || y1 <= y0) throw Error("empty word box");
  RgbImage crop(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < 3; ++c) crop.at(x - x0, y - y0, c) = img.at(x, y, c);
  GrayImage gray = to_gray(crop);
  if (gray.height != kStripHeight) {
    const int w = std::max(1, static_cast<int>(std::lround(gray.width * static_cast<double>(kStripHeight) / gray.height)));
    gray = resize_bilinear(gray, w, kStripHeight);
  }
  const int t = otsu_nonzero(gray);
  for (auto& v : gray.data) v = v > t ? 255 : 0;
  return gray;
}

double head_confidence(const ProbSequence& p) {
  if (p.cols() == 0) return 0;
  return p.colwise().maxCoeff().mean();
}

std::optional<std::string> gate_language(const std::vector<HeadScore>& scores, double threshold) {
  if (scores.empty()) throw Error("no recognition heads configured");
  const HeadScore* best = nullptr;
  for (const auto& s : scores)
    if (s.score >= threshold && (!best || s.score > best->score)) best = &s;
  if (!best) return std::nullopt;
  return best->id;
}

std::vector<std::vector<segment::BBox>> reading_order(std::vector<segment::BBox> boxes) {
  std::stable_sort(boxes.begin(), boxes.end(), [](const segment::BBox& a, const segment::BBox& b) {
    const int ca = a.y_min + a.y_max;
    const int cb = b.y_min + b.y_max;
    return ca != cb ? ca < cb : a.x_min < b.x_min;
  });
  std::vector<std::vector<segment::BBox>> rows;
  for (const auto& b : boxes) {
    if (!rows.empty()) {
      const auto& first = rows.back().front();
      const int overlap = std::min(first.y_max, b.y_max) - std::max(first.y_min, b.y_min);
      if (2 * overlap >= std::min(first.height(), b.height())) {
        rows.back().push_back(b);
        continue;
      }
    }
    rows.push_back({b});
  }
  for (auto& row : rows)
    std::stable_sort(row.begin(), row.end(),
                     [](const segment::BBox& a, const segment::BBox& b) { return a.x_min < b.x_min; });
  return rows;
}

Recognition recognize(const RgbImage& masked, const std::vector<segment::BBox>& boxes,
                      const std::vector<Head>& heads, double threshold) {
  if (boxes.empty()) throw Error("no boxes to recognize");
  if (heads.empty()) throw Error("no recognition heads configured");
  Recognition result;
  std::map<std::string, int> wins;
  const auto rows = reading_order(boxes);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (const auto& box : rows[r]) {
      BoxReading reading;
      reading.box = box;
      const Matrix strips = strips_from_image(prepare_word_image(masked, box));
      std::vector<ProbSequence> outputs;
      for (const auto& head : heads) {
        outputs.push_back(predict(strips, head.params));
        reading.scores.push_back({head.id, head_confidence(outputs.back())});
      }
      reading.head = gate_language(reading.scores, threshold);
      if (reading.head) {
        const auto idx = static_cast<std::size_t>(
            std::find_if(heads.begin(), heads.end(), [&](const Head& h) { return h.id == *reading.head; }) -
            heads.begin());
        reading.text = heads[idx].alphabet.decode(ctc_best_path_decode(outputs[idx]).labels);
        ++wins[*reading.head];
      }
      if (!reading.text.empty()) {
        if (!line.empty()) line += ' ';
        line += reading.text;
      }
      result.boxes.push_back(std::move(reading));
    }
    if (!line.empty()) {
      if (!result.text.empty()) result.text += '\n';
      result.text += line;
    }
  }
  int best = 0;
  for (const auto& head : heads) {
    const auto it = wins.find(head.id);
    if (it != wins.end() && it->second > best) {
      best = it->second;
      result.language = head.id;
    }
  }
  return result;
}

}  // namespace s2l::seqnet
