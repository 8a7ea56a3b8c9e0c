#include <cmath>
#include <cstring>

#include "s2l/error.hpp"
#include "s2l/image.hpp"
#include "s2l/pipeline.hpp"

namespace s2l::pipeline {

namespace {

constexpr std::uint16_t kGpsIfdTag = 0x8825;
constexpr std::uint16_t kTypeAscii = 2;
constexpr std::uint16_t kTypeLong = 4;
constexpr std::uint16_t kTypeRational = 5;

// Bounds-checked reader over the TIFF block of an Exif segment.
class Tiff {
 public:
  Tiff(std::span<const std::uint8_t> data, bool little) : data_(data), little_(little) {}

  std::optional<std::uint16_t> u16(std::size_t off) const {
    if (off + 2 > data_.size()) return std::nullopt;
    const std::uint16_t a = data_[off], b = data_[off + 1];
    return static_cast<std::uint16_t>(little_ ? a | b << 8 : a << 8 | b);
  }

  std::optional<std::uint32_t> u32(std::size_t off) const {
    const auto lo = u16(little_ ? off : off + 2);
    const auto hi = u16(little_ ? off + 2 : off);
    if (!lo || !hi) return std::nullopt;
    return static_cast<std::uint32_t>(*hi) << 16 | *lo;
  }

  std::optional<std::uint8_t> byte(std::size_t off) const {
    if (off >= data_.size()) return std::nullopt;
    return data_[off];
  }

 private:
  std::span<const std::uint8_t> data_;
  bool little_;
};

struct Entry {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::size_t value_offset = 0;  // where the inline value or the pointer sits
};

std::optional<Entry> find_entry(const Tiff& t, std::size_t ifd, std::uint16_t tag) {
  const auto n = t.u16(ifd);
  if (!n) return std::nullopt;
  for (std::size_t i = 0; i < *n; ++i) {
    const std::size_t e = ifd + 2 + 12 * i;
    const auto etag = t.u16(e), type = t.u16(e + 2);
    const auto count = t.u32(e + 4);
    if (!etag || !type || !count) return std::nullopt;
    if (*etag == tag) return Entry{*type, *count, e + 8};
  }
  return std::nullopt;
}

std::optional<double> read_dms(const Tiff& t, const Entry& e) {
  if (e.type != kTypeRational || e.count != 3) return std::nullopt;
  const auto base = t.u32(e.value_offset);
  if (!base) return std::nullopt;
  double parts[3];
  for (int i = 0; i < 3; ++i) {
    const auto num = t.u32(*base + 8 * i), den = t.u32(*base + 8 * i + 4);
    if (!num || !den || *den == 0) return std::nullopt;
    parts[i] = static_cast<double>(*num) / *den;
  }
  return parts[0] + parts[1] / 60.0 + parts[2] / 3600.0;
}

std::optional<char> read_ref(const Tiff& t, std::size_t ifd, std::uint16_t tag) {
  const auto e = find_entry(t, ifd, tag);
  if (!e || e->type != kTypeAscii || e->count < 1) return std::nullopt;
  const auto c = t.byte(e->value_offset);
  if (!c) return std::nullopt;
  return static_cast<char>(*c);
}

std::optional<GpsFix> parse_exif(std::span<const std::uint8_t> seg) {
  static constexpr std::uint8_t kHeader[] = {'E', 'x', 'i', 'f', 0, 0};
  if (seg.size() < 14 || std::memcmp(seg.data(), kHeader, 6) != 0) return std::nullopt;
  const auto tiff = seg.subspan(6);
  bool little;
  if (tiff[0] == 'I' && tiff[1] == 'I')
    little = true;
  else if (tiff[0] == 'M' && tiff[1] == 'M')
    little = false;
  else
    return std::nullopt;
  const Tiff t(tiff, little);
  if (t.u16(2) != 42) return std::nullopt;
  const auto ifd0 = t.u32(4);
  if (!ifd0) return std::nullopt;
  const auto gps_ptr = find_entry(t, *ifd0, kGpsIfdTag);
  if (!gps_ptr || gps_ptr->type != kTypeLong) return std::nullopt;
  const auto gps = t.u32(gps_ptr->value_offset);
  if (!gps) return std::nullopt;

  const auto lat_e = find_entry(t, *gps, 2), lon_e = find_entry(t, *gps, 4);
  if (!lat_e || !lon_e) return std::nullopt;
  auto lat = read_dms(t, *lat_e), lon = read_dms(t, *lon_e);
  if (!lat || !lon) return std::nullopt;
  const auto lat_ref = read_ref(t, *gps, 1), lon_ref = read_ref(t, *gps, 3);
  if (lat_ref == 'S') *lat = -*lat;
  if (lon_ref == 'W') *lon = -*lon;
  if (*lat > 90 || *lat < -90 || *lon > 180 || *lon < -180) return std::nullopt;
  return GpsFix{*lat, *lon};
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

void put_dms(std::vector<std::uint8_t>& out, double value) {
  const double a = std::abs(value);
  const double deg = std::floor(a);
  const double min = std::floor((a - deg) * 60.0);
  const double sec = (a - deg - min / 60.0) * 3600.0;
  put32(out, static_cast<std::uint32_t>(deg));
  put32(out, 1);
  put32(out, static_cast<std::uint32_t>(min));
  put32(out, 1);
  put32(out, static_cast<std::uint32_t>(std::llround(sec * 10000.0)));
  put32(out, 10000);
}

}  // namespace

std::optional<GpsFix> read_exif_gps(std::span<const std::uint8_t> jpeg) {
  if (jpeg.size() < 4 || jpeg[0] != 0xFF || jpeg[1] != 0xD8) return std::nullopt;
  std::size_t pos = 2;
  while (pos + 4 <= jpeg.size()) {
    if (jpeg[pos] != 0xFF) return std::nullopt;
    const std::uint8_t marker = jpeg[pos + 1];
    if (marker == 0xFF) {
      ++pos;
      continue;
    }
    if (marker == 0xDA || marker == 0xD9) return std::nullopt;
    if ((marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
      pos += 2;
      continue;
    }
    const std::size_t len = static_cast<std::size_t>(jpeg[pos + 2]) << 8 | jpeg[pos + 3];
    if (len < 2 || pos + 2 + len > jpeg.size()) return std::nullopt;
    if (marker == 0xE1) {
      if (auto fix = parse_exif(jpeg.subspan(pos + 4, len - 2))) return fix;
    }
    pos += 2 + len;
  }
  return std::nullopt;
}

std::optional<GpsFix> read_exif_gps(const std::filesystem::path& path) {
  try {
    const auto bytes = read_file_bytes(path);
    return read_exif_gps(std::span<const std::uint8_t>(bytes));
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::uint8_t> make_exif_gps(const GpsFix& fix) {
  if (!(std::abs(fix.latitude) <= 90) || !(std::abs(fix.longitude) <= 180))
    throw Error("GPS coordinates out of range");
  std::vector<std::uint8_t> out{'E', 'x', 'i', 'f', 0, 0, 'I', 'I'};
  put16(out, 42);
  put32(out, 8);
  // IFD0: a single pointer to the GPS IFD at offset 26.
  put16(out, 1);
  put16(out, kGpsIfdTag);
  put16(out, kTypeLong);
  put32(out, 1);
  put32(out, 26);
  put32(out, 0);
  // GPS IFD: four entries, rationals stored at offsets 80 and 104.
  put16(out, 4);
  const auto ascii = [&](std::uint16_t tag, char c) {
    put16(out, tag);
    put16(out, kTypeAscii);
    put32(out, 2);
    out.insert(out.end(), {static_cast<std::uint8_t>(c), 0, 0, 0});
  };
  const auto rational = [&](std::uint16_t tag, std::uint32_t offset) {
    put16(out, tag);
    put16(out, kTypeRational);
    put32(out, 3);
    put32(out, offset);
  };
  ascii(1, fix.latitude < 0 ? 'S' : 'N');
  rational(2, 80);
  ascii(3, fix.longitude < 0 ? 'W' : 'E');
  rational(4, 104);
  put32(out, 0);
  put_dms(out, fix.latitude);
  put_dms(out, fix.longitude);
  return out;
}

}  // namespace s2l::pipeline
