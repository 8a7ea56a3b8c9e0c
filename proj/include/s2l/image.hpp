#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "s2l/error.hpp"

namespace s2l {

/// Single-channel 8-bit raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> pixels);

  bool empty() const { return data.empty(); }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Three-channel 8-bit raster, row-major with interleaved R, G, B.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0);

  bool empty() const { return data.empty(); }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  GrayImage channel(int c) const;
  void set_channel(int c, const GrayImage& plane);

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Luma conversion, 0.299 R + 0.587 G + 0.114 B, rounded.
GrayImage to_gray(const RgbImage& img);
RgbImage to_rgb(const GrayImage& img);

// Image files. PNG, binary PGM (P5), PPM (P6) and baseline JPEG are read
// and written. Grayscale files are expanded to RGB by read_rgb.
RgbImage read_rgb(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
/// Baseline JPEG; a non-empty `app1` payload (starting with "Exif\0\0") is
/// stored as an APP1 segment directly after SOI.
void write_jpeg(const std::filesystem::path& path, const RgbImage& img,
                std::span<const std::uint8_t> app1 = {}, int quality = 95);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace s2l
