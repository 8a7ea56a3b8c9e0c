#include "s2l/imgproc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

namespace s2l::imgproc {

void CorrectionConfig::validate() const {
  if (!(gamma > 0)) throw Error("gamma must be positive");
  if (dark_threshold < 0 || dark_threshold > 255) throw Error("dark_threshold outside [0,255]");
  if (!(nlm_strength > 0)) throw Error("nlm_strength must be positive");
  if (nlm_patch <= 0 || nlm_window <= 0 || nlm_patch % 2 == 0 || nlm_window % 2 == 0)
    throw Error("nlm patch and window must be odd and positive");
  if (nlm_patch > nlm_window) throw Error("nlm patch larger than window");
  if (!(wiener_balance > 0)) throw Error("wiener_balance must be positive");
}

Kernel Kernel::identity() { return {}; }

Kernel Kernel::box(int size) {
  if (size <= 0 || size % 2 == 0) throw Error("kernel size must be odd and positive");
  const auto n = static_cast<std::size_t>(size) * size;
  return {size, size, std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

Kernel Kernel::gaussian(int size, double sigma) {
  if (size <= 0 || size % 2 == 0) throw Error("kernel size must be odd and positive");
  if (!(sigma > 0)) throw Error("sigma must be positive");
  Kernel k{size, size, std::vector<double>(static_cast<std::size_t>(size) * size)};
  const int r = size / 2;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      k.weights[static_cast<std::size_t>(y + r) * size + (x + r)] =
          std::exp(-(x * x + y * y) / (2 * sigma * sigma));
  const double total = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
  for (double& w : k.weights) w /= total;
  return k;
}

void Kernel::validate() const {
  if (width <= 0 || height <= 0 || width % 2 == 0 || height % 2 == 0 ||
      weights.size() != static_cast<std::size_t>(width) * height)
    throw Error("psf must have odd dimensions matching its weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::all_of(weights.begin(), weights.end(), [](double v) { return v == 0.0; }))
    throw Error("psf is all zero");
  if (std::abs(total - 1.0) > 1e-6) throw Error("psf must sum to 1");
}

double mean_intensity(const GrayImage& img) {
  if (img.empty()) throw Error("empty input");
  // Histogram first: the classification depends on the intensity histogram only.
  std::array<std::size_t, 256> hist{};
  for (auto v : img.data) ++hist[v];
  double sum = 0;
  for (int v = 0; v < 256; ++v) sum += static_cast<double>(v) * static_cast<double>(hist[v]);
  return sum / static_cast<double>(img.data.size());
}

Brightness classify_brightness(const GrayImage& img, const CorrectionConfig& cfg) {
  return mean_intensity(img) < cfg.dark_threshold ? Brightness::Dark : Brightness::Bright;
}

Brightness classify_brightness(const RgbImage& img, const CorrectionConfig& cfg) {
  if (img.empty()) throw Error("empty input");
  return classify_brightness(to_gray(img), cfg);
}

GrayImage gamma_correct(const GrayImage& img, double gamma) {
  if (!(gamma > 0)) throw Error("gamma must be positive");
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v)
    lut[v] = static_cast<std::uint8_t>(std::lround(255.0 * std::pow(v / 255.0, 1.0 / gamma)));
  GrayImage out = img;
  for (auto& v : out.data) v = lut[v];
  return out;
}

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  // Mirror without repeating the edge pixel: -1 -> 1, n -> n - 2.
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

GrayImage denoise_nlm(const GrayImage& img, const CorrectionConfig& cfg) {
  if (cfg.nlm_patch <= 0 || cfg.nlm_window <= 0 || cfg.nlm_patch % 2 == 0 ||
      cfg.nlm_window % 2 == 0)
    throw Error("nlm patch and window must be odd and positive");
  if (!(cfg.nlm_strength > 0)) throw Error("nlm_strength must be positive");
  if (img.empty()) return img;

  const int w = img.width;
  const int h = img.height;
  const int pr = cfg.nlm_patch / 2;
  const int sr = cfg.nlm_window / 2;
  const int pad = pr + sr;
  const int pw = w + 2 * pad;
  const int ph = h + 2 * pad;
  const double inv_h2 = 1.0 / (cfg.nlm_strength * cfg.nlm_strength);
  const double patch_area = static_cast<double>(cfg.nlm_patch) * cfg.nlm_patch;

  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x)
      padded[static_cast<std::size_t>(y) * pw + x] = img.at(reflect(x - pad, w), reflect(y - pad, h));
  auto P = [&](int x, int y) { return padded[static_cast<std::size_t>(y) * pw + x]; };

  std::vector<double> weight_sum(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<double> value_sum(static_cast<std::size_t>(w) * h, 0.0);
  // Integral image of squared differences for one search offset; patch
  // distances for every pixel then come from four lookups.
  const int iw = w + 2 * pr + 1;
  const int ih = h + 2 * pr + 1;
  std::vector<double> integral(static_cast<std::size_t>(iw) * ih);
  auto I = [&](int x, int y) -> double& { return integral[static_cast<std::size_t>(y) * iw + x]; };

  for (int dy = -sr; dy <= sr; ++dy) {
    for (int dx = -sr; dx <= sr; ++dx) {
      // Region covering all patches centered on image pixels: padded coords
      // [sr, sr + w + 2pr) x [sr, sr + h + 2pr).
      for (int y = 0; y < ih; ++y) I(0, y) = 0;
      for (int x = 0; x < iw; ++x) I(x, 0) = 0;
      for (int y = 1; y < ih; ++y) {
        double row = 0;
        for (int x = 1; x < iw; ++x) {
          const int px = sr + x - 1;
          const int py = sr + y - 1;
          const double d = P(px, py) - P(px + dx, py + dy);
          row += d * d;
          I(x, y) = I(x, y - 1) + row;
        }
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double ssd = I(x + 2 * pr + 1, y + 2 * pr + 1) - I(x, y + 2 * pr + 1) -
                             I(x + 2 * pr + 1, y) + I(x, y);
          const double d2 = std::max(ssd, 0.0) / patch_area;
          const double wgt = std::exp(-d2 * inv_h2);
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          weight_sum[idx] += wgt;
          value_sum[idx] += wgt * P(x + pad + dx, y + pad + dy);
        }
      }
    }
  }

  GrayImage out(w, h);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(value_sum[i] / weight_sum[i]), 0L, 255L));
  return out;
}

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

// Forward real-to-complex 2-D transform of a w x h field.
std::vector<std::complex<double>> forward_fft(const std::vector<double>& field, int w, int h) {
  const int cw = w / 2 + 1;
  const auto n_complex = static_cast<std::size_t>(h) * cw;
  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * field.size())));
  FftwBuffer<fftw_complex> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex)));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_2d(h, w, in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(field.begin(), field.end(), in.get());
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<std::complex<double>> result(n_complex);
  for (std::size_t i = 0; i < n_complex; ++i) result[i] = {out[i][0], out[i][1]};
  return result;
}

std::vector<double> inverse_fft(const std::vector<std::complex<double>>& spectrum, int w, int h) {
  const int cw = w / 2 + 1;
  const auto n_complex = static_cast<std::size_t>(h) * cw;
  const auto n_real = static_cast<std::size_t>(h) * w;
  FftwBuffer<fftw_complex> in(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex)));
  FftwBuffer<double> out(static_cast<double*>(fftw_malloc(sizeof(double) * n_real)));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_2d(h, w, in.get(), out.get(), FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n_complex; ++i) {
    in[i][0] = spectrum[i].real();
    in[i][1] = spectrum[i].imag();
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> result(out.get(), out.get() + n_real);
  for (double& v : result) v /= static_cast<double>(n_real);
  return result;
}

// PSF embedded in a w x h field with its center moved to (0, 0).
std::vector<double> centered_psf_field(const Kernel& psf, int w, int h) {
  std::vector<double> field(static_cast<std::size_t>(w) * h, 0.0);
  const int rx = psf.width / 2;
  const int ry = psf.height / 2;
  for (int y = 0; y < psf.height; ++y) {
    for (int x = 0; x < psf.width; ++x) {
      const int fx = ((x - rx) % w + w) % w;
      const int fy = ((y - ry) % h + h) % h;
      field[static_cast<std::size_t>(fy) * w + fx] += psf.weights[static_cast<std::size_t>(y) * psf.width + x];
    }
  }
  return field;
}

GrayImage quantize(const std::vector<double>& values, int w, int h) {
  GrayImage out(w, h);
  for (std::size_t i = 0; i < values.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(values[i]), 0L, 255L));
  return out;
}

}  // namespace

GrayImage convolve_circular(const GrayImage& img, const Kernel& psf) {
  psf.validate();
  if (img.empty()) return img;
  const int w = img.width;
  const int h = img.height;
  GrayImage out(w, h);
  const int rx = psf.width / 2;
  const int ry = psf.height / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int ky = 0; ky < psf.height; ++ky)
        for (int kx = 0; kx < psf.width; ++kx) {
          const int sx = ((x - (kx - rx)) % w + w) % w;
          const int sy = ((y - (ky - ry)) % h + h) % h;
          acc += psf.weights[static_cast<std::size_t>(ky) * psf.width + kx] * img.at(sx, sy);
        }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return out;
}

GrayImage wiener_deblur(const GrayImage& img, const Kernel& psf, double balance) {
  psf.validate();
  if (!(balance > 0)) throw Error("wiener balance must be positive");
  if (img.empty()) return img;
  const int w = img.width;
  const int h = img.height;
  const int cw = w / 2 + 1;

  std::vector<double> field(img.data.begin(), img.data.end());
  auto spectrum = forward_fft(field, w, h);
  const auto transfer = forward_fft(centered_psf_field(psf, w, h), w, h);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < cw; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * cw + u;
      const double lap = 4.0 - 2.0 * std::cos(two_pi * u / w) - 2.0 * std::cos(two_pi * v / h);
      const std::complex<double> H = transfer[i];
      spectrum[i] = std::conj(H) * spectrum[i] / (std::norm(H) + balance * lap * lap);
    }
  }
  return quantize(inverse_fft(spectrum, w, h), w, h);
}

CorrectionResult correct(const RgbImage& img, const CorrectionConfig& cfg, const Kernel& psf) {
  cfg.validate();
  if (img.empty()) throw Error("empty input");
  CorrectionResult result;
  result.brightness = classify_brightness(img, cfg);
  result.image = img;
  for (int c = 0; c < 3; ++c) {
    GrayImage plane = img.channel(c);
    if (result.brightness == Brightness::Dark) plane = gamma_correct(plane, cfg.gamma);
    plane = denoise_nlm(plane, cfg);
    plane = wiener_deblur(plane, psf, cfg.wiener_balance);
    result.image.set_channel(c, plane);
  }
  result.gamma_applied = result.brightness == Brightness::Dark;
  return result;
}

}  // namespace s2l::imgproc
