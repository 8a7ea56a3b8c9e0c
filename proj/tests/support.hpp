#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s2l/detect.hpp"
#include "s2l/image.hpp"
#include "s2l/segment.hpp"
#include "s2l/seqnet.hpp"

namespace s2l::testing {

/// Directory of the bundled data files.
std::filesystem::path data_dir();

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Light toy-font words on a dark background, one row, with detector maps
/// that outline each word exactly.
struct Sign {
  RgbImage image;
  detect::DetectorMaps maps;
  std::vector<segment::BBox> boxes;
};

Sign make_sign(const std::vector<std::string>& words, int map_scale = 4);

/// Writes `<dir>/<name>.png` and its `.png.maps` companion; returns the image path.
std::filesystem::path write_sign(const std::filesystem::path& dir, const std::string& name, const Sign& sign);

/// English head trained on KAHARA, PATNA and DELHI until the mean CTC loss
/// drops below 0.1 (lr 1e-3). Trained once per process.
const seqnet::Head& quick_head();

/// Writes `<dir>/en.params` and `<dir>/en.txt`.
void save_head(const std::filesystem::path& dir, const seqnet::Head& head);

}  // namespace s2l::testing
