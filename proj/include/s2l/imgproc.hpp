#pragma once

#include <vector>

#include "s2l/image.hpp"

namespace s2l::imgproc {

enum class Brightness { Dark, Bright };

struct CorrectionConfig {
  double gamma = 2.5;
  double dark_threshold = 80.0;  // mean intensity below this is Dark
  double nlm_strength = 10.0;    // h
  int nlm_patch = 3;
  int nlm_window = 7;
  double wiener_balance = 1e-3;

  void validate() const;
};

/// Row-major point spread function, odd dimensions, summing to 1.
struct Kernel {
  int width = 1;
  int height = 1;
  std::vector<double> weights{1.0};

  static Kernel identity();
  static Kernel box(int size);
  static Kernel gaussian(int size, double sigma);
  /// Odd dimensions matching the weights, not all zero, summing to 1.
  void validate() const;
};

double mean_intensity(const GrayImage& img);

Brightness classify_brightness(const GrayImage& img, const CorrectionConfig& cfg);
/// Classification of a color image uses its luma plane.
Brightness classify_brightness(const RgbImage& img, const CorrectionConfig& cfg);

/// out = round(255 * (in / 255)^(1 / gamma)); gamma > 1 brightens.
GrayImage gamma_correct(const GrayImage& img, double gamma);

/// Non-local means: every output pixel is the average of the pixels in its
/// search window weighted by exp(-d^2 / h^2), where d^2 is the mean squared
/// difference of the surrounding patches. Borders are reflected.
GrayImage denoise_nlm(const GrayImage& img, const CorrectionConfig& cfg);

/// Regularized frequency-domain deconvolution
///   OUT = conj(H) IN / (|H|^2 + balance |L|^2)
/// where L is the transfer function of the discrete Laplacian. The image is
/// treated as periodic and the PSF is centered on the origin.
GrayImage wiener_deblur(const GrayImage& img, const Kernel& psf, double balance);

/// Circular convolution with a centered kernel; the forward model that
/// wiener_deblur inverts.
GrayImage convolve_circular(const GrayImage& img, const Kernel& psf);

struct CorrectionResult {
  RgbImage image;
  Brightness brightness = Brightness::Bright;
  bool gamma_applied = false;
};

/// Full chain on a color image: gamma when dark, then per-channel denoise,
/// then per-channel deblur.
CorrectionResult correct(const RgbImage& img, const CorrectionConfig& cfg, const Kernel& psf);

}  // namespace s2l::imgproc
