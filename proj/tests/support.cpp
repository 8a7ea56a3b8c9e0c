#include "support.hpp"

#include <random>

#include "s2l/toyfont.hpp"

namespace s2l::testing {

std::filesystem::path data_dir() { return S2L_DATA_DIR; }

std::filesystem::path scratch_dir(const std::string& name) {
  std::random_device rd;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("s2l-" + name + "-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Sign make_sign(const std::vector<std::string>& words, int map_scale) {
  constexpr int kLeft = 24, kTop = 24, kSpacing = 40, kBottom = 24;
  int width = kLeft;
  for (const auto& w : words) width += toyfont::word_width(w) + kSpacing;
  width += kLeft - kSpacing;
  width = (width + map_scale - 1) / map_scale * map_scale;
  const int height = (kTop + toyfont::kHeight + kBottom + map_scale - 1) / map_scale * map_scale;

  Sign sign;
  sign.image = RgbImage(width, height, 30);
  int x = kLeft;
  for (const auto& w : words) {
    toyfont::draw_word(sign.image, w, x, kTop, {220, 220, 220});
    sign.boxes.push_back({x, kTop, x + toyfont::word_width(w), kTop + toyfont::kHeight});
    x += toyfont::word_width(w) + kSpacing;
  }

  const int mw = width / map_scale, mh = height / map_scale;
  auto& m = sign.maps;
  m.scale = map_scale;
  m.score = {mw, mh, std::vector<float>(static_cast<std::size_t>(mw) * mh, 0.0f)};
  m.geo = {mw, mh, std::vector<detect::RBox>(static_cast<std::size_t>(mw) * mh)};
  for (int my = 0; my < mh; ++my)
    for (int mx = 0; mx < mw; ++mx) {
      const int px = mx * map_scale, py = my * map_scale;
      for (const auto& b : sign.boxes) {
        if (!b.contains_pixel(px, py)) continue;
        const std::size_t i = static_cast<std::size_t>(my) * mw + mx;
        m.score.values[i] = 0.95f;
        m.geo.values[i] = {static_cast<float>(py - b.y_min), static_cast<float>(b.x_max - px),
                           static_cast<float>(b.y_max - py), static_cast<float>(px - b.x_min), 0.0f};
      }
    }
  return sign;
}

std::filesystem::path write_sign(const std::filesystem::path& dir, const std::string& name, const Sign& sign) {
  const auto path = dir / (name + ".png");
  write_png(path, sign.image);
  detect::write_raster(dir / (name + ".png.maps"), detect::raster_from_maps(sign.maps));
  return path;
}

const seqnet::Head& quick_head() {
  static const seqnet::Head head = [] {
    seqnet::Head h{"en", seqnet::Alphabet::english(), seqnet::SeqNetParams::random(seqnet::NetShape{}, 7)};
    const auto data = toyfont::training_set({"KAHARA", "PATNA", "DELHI"}, h.alphabet);
    seqnet::TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.iterations = 3000;
    seqnet::train(h.params, data, cfg, [](int, double loss) { return loss < 0.1; });
    return h;
  }();
  return head;
}

void save_head(const std::filesystem::path& dir, const seqnet::Head& head) {
  std::filesystem::create_directories(dir);
  seqnet::save_params(dir / (head.id + ".params"), head.params);
  head.alphabet.save(dir / (head.id + ".txt"));
}

}  // namespace s2l::testing
