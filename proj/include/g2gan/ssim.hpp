#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace g2gan {

// Structural-similarity settings. Exponents apply per window to the luminance,
// contrast and structure terms; `scale_weights[j]` is the exponent of scale j
// (finest first) in the multi-scale product, and its length is the scale count.
struct SsimParams {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  double c3 = 0.03 * 0.03 / 2.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  std::int64_t window = 11;
  double sigma = 1.5;
  std::vector<double> scale_weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  std::int64_t scales() const { return static_cast<std::int64_t>(scale_weights.size()); }

  // Largest scale count <= 5 whose coarsest level still fits the window, using
  // the coarsest `scales` canonical weights renormalized to sum 1.
  static SsimParams for_resolution(std::int64_t size);

  // The canonical five-scale weights; for fewer scales the coarsest `count` of
  // them renormalized to sum 1.
  static std::vector<double> canonical_weights(std::int64_t count);
};

// Throws ConfigError when constants, exponents or weights are not positive, the
// window is even, or the window does not fit the coarsest scale of an H x W input.
void validate_ssim_params(const SsimParams& p, std::int64_t height, std::int64_t width);

// Normalized 2-D Gaussian window (window x window) in `dtype`.
torch::Tensor gaussian_window(std::int64_t window, double sigma, torch::Dtype dtype);

// Mean SSIM over all valid windows, channels and images. Inputs are (B, C, H, W)
// in [-1, 1] and are mapped to [0, 1] before the statistics are taken.
torch::Tensor ssim(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p);

// Multi-scale SSIM: per image and channel, the product over scales of the
// window-averaged contrast-structure term raised to its scale weight, with the
// luminance term included only at the coarsest scale; averaged over images and
// channels. Scale j + 1 is a 2x2 average pool of scale j.
torch::Tensor ms_ssim(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p);

// 1 - ms_ssim, so perfect reconstruction scores 0.
torch::Tensor ms_ssim_loss(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p);

}  // namespace g2gan
