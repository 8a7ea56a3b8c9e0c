#include "s2l/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

// jpeglib.h expects FILE and size_t to be declared first.
#include <jpeglib.h>

namespace s2l {

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error("negative image dimensions");
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> pixels)
    : width(w), height(h), data(std::move(pixels)) {
  if (w < 0 || h < 0 || data.size() != static_cast<std::size_t>(w) * h)
    throw Error("pixel buffer does not match image dimensions");
}

RgbImage::RgbImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error("negative image dimensions");
  data.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

GrayImage RgbImage::channel(int c) const {
  GrayImage out(width, height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = data[i * 3 + c];
  return out;
}

void RgbImage::set_channel(int c, const GrayImage& plane) {
  if (plane.width != width || plane.height != height) throw Error("channel size mismatch");
  for (std::size_t i = 0; i < plane.data.size(); ++i) data[i * 3 + c] = plane.data[i];
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double y = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                     0.114 * img.data[i * 3 + 2];
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

RgbImage to_rgb(const GrayImage& img) {
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = img.data[i];
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

// Netpbm header: magic, width, height, maxval, with '#' comments.
struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& bytes) {
  PnmHeader h;
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
      tok.push_back(static_cast<char>(bytes[pos++]));
    if (tok.empty()) throw Error("truncated netpbm header");
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw Error("malformed netpbm header");
  }
  // Exactly one whitespace byte separates the header from the raster.
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
    throw Error("unsupported netpbm dimensions or maxval");
  return h;
}

RgbImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  const PnmHeader h = parse_pnm_header(bytes);
  const int channels = h.magic == "P5" ? 1 : h.magic == "P6" ? 3 : 0;
  if (channels == 0) throw Error("only binary PGM/PPM are supported");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * channels;
  if (bytes.size() < h.data_offset + n) throw Error("truncated netpbm raster");
  RgbImage out(h.width, h.height);
  if (channels == 3) {
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), n, out.data.begin());
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = bytes[h.data_offset + i];
  }
  return out;
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(std::string("png: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("png: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  RgbImage out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = RgbImage(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

RgbImage read_rgb(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G')
    return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) return decode_jpeg(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes);
  throw Error("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr))
    throw Error("cannot write png " + path.string() + ": " + image.message);
}

namespace {

void write_pnm(const std::filesystem::path& path, const char* magic, int w, int h,
               const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_pnm(path, "P5", img.width, img.height, img.data);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  write_pnm(path, "P6", img.width, img.height, img.data);
}

void write_jpeg(const std::filesystem::path& path, const RgbImage& img,
                std::span<const std::uint8_t> app1, int quality) {
  if (app1.size() > 65533) throw Error("APP1 payload too large");
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(std::string("jpeg: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  if (!app1.empty()) cinfo.write_JFIF_header = FALSE;
  jpeg_start_compress(&cinfo, TRUE);
  if (!app1.empty())
    jpeg_write_marker(&cinfo, JPEG_APP0 + 1, app1.data(), static_cast<unsigned>(app1.size()));
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(img.data.data() +
                                     static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  std::ofstream out(path, std::ios::binary);
  const bool ok = static_cast<bool>(out.write(reinterpret_cast<const char*>(buffer),
                                              static_cast<std::streamsize>(size)));
  std::free(buffer);
  if (!ok) throw Error("cannot write " + path.string());
}

}  // namespace s2l
