#include "g2gan/ssim.hpp"

#include <cmath>
#include <numeric>

#include "g2gan/error.hpp"
#include "g2gan/image.hpp"

namespace g2gan {

namespace F = torch::nn::functional;

namespace {

constexpr double kFloor = 1e-8;

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError("ssim inputs differ in shape: " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
  if (a.dim() != 4) {
    throw ShapeError("ssim expects (B, C, H, W) inputs");
  }
}

bool nearly(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

torch::Tensor power(const torch::Tensor& base, double exponent) {
  if (exponent == 1.0) {
    return base;
  }
  return base.clamp_min(kFloor).pow(exponent);
}

struct WindowMaps {
  torch::Tensor luminance;         // l
  torch::Tensor contrast_structure;  // c^beta * s^gamma
};

// Per-window terms for unit-range inputs, valid region only.
WindowMaps window_maps(const torch::Tensor& a, const torch::Tensor& b, const SsimParams& p) {
  const auto channels = a.size(1);
  auto kernel = gaussian_window(p.window, p.sigma, a.scalar_type())
                    .view({1, 1, p.window, p.window})
                    .expand({channels, 1, p.window, p.window})
                    .contiguous();
  auto filter = [&](const torch::Tensor& t) {
    return F::conv2d(t, kernel, F::Conv2dFuncOptions().groups(channels));
  };
  auto mu_a = filter(a);
  auto mu_b = filter(b);
  auto var_a = filter(a * a) - mu_a * mu_a;
  auto var_b = filter(b * b) - mu_b * mu_b;
  auto cov = filter(a * b) - mu_a * mu_b;

  WindowMaps maps;
  maps.luminance = (2.0 * mu_a * mu_b + p.c1) / (mu_a * mu_a + mu_b * mu_b + p.c1);
  if (p.beta == 1.0 && p.gamma == 1.0 && nearly(p.c3, p.c2 / 2.0)) {
    // c * s collapses to the two-term form when C3 = C2 / 2.
    maps.contrast_structure = (2.0 * cov + p.c2) / (var_a + var_b + p.c2);
  } else {
    auto sd_a = var_a.clamp_min(1e-12).sqrt();
    auto sd_b = var_b.clamp_min(1e-12).sqrt();
    auto contrast = (2.0 * sd_a * sd_b + p.c2) / (var_a + var_b + p.c2);
    auto structure = (cov + p.c3) / (sd_a * sd_b + p.c3);
    maps.contrast_structure = power(contrast, p.beta) * power(structure, p.gamma);
  }
  return maps;
}

}  // namespace

std::vector<double> SsimParams::canonical_weights(std::int64_t count) {
  static const std::vector<double> canonical{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (count < 1 || count > 5) {
    throw ConfigError("canonical MS-SSIM weights exist for 1..5 scales");
  }
  if (count == 5) {
    return canonical;
  }
  std::vector<double> w(canonical.end() - count, canonical.end());
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) {
    v /= total;
  }
  return w;
}

SsimParams SsimParams::for_resolution(std::int64_t size) {
  SsimParams p;
  std::int64_t scales = 5;
  while (scales > 1 && (size >> (scales - 1)) < p.window) {
    --scales;
  }
  p.scale_weights = canonical_weights(scales);
  return p;
}

void validate_ssim_params(const SsimParams& p, std::int64_t height, std::int64_t width) {
  if (!(p.c1 > 0.0 && p.c2 > 0.0 && p.c3 > 0.0)) {
    throw ConfigError("SSIM constants C1, C2, C3 must be positive");
  }
  if (!(p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0)) {
    throw ConfigError("SSIM exponents must be positive");
  }
  if (p.scale_weights.empty()) {
    throw ConfigError("MS-SSIM needs at least one scale");
  }
  for (double w : p.scale_weights) {
    if (!(w > 0.0)) {
      throw ConfigError("MS-SSIM scale weights must be positive");
    }
  }
  if (p.window < 1 || p.window % 2 == 0 || !(p.sigma > 0.0)) {
    throw ConfigError("SSIM window must be odd and sigma positive");
  }
  const std::int64_t factor = std::int64_t{1} << (p.scales() - 1);
  if (height % factor != 0 || width % factor != 0) {
    throw ConfigError("image size " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by 2^" + std::to_string(p.scales() - 1));
  }
  if (p.window > std::min(height, width) / factor) {
    throw ConfigError("SSIM window " + std::to_string(p.window) + " does not fit the coarsest scale " +
                      std::to_string(std::min(height, width) / factor));
  }
}

torch::Tensor gaussian_window(std::int64_t window, double sigma, torch::Dtype dtype) {
  auto coords = torch::arange(window, torch::TensorOptions().dtype(torch::kFloat64)) -
                static_cast<double>(window - 1) / 2.0;
  auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g).to(dtype);
}

torch::Tensor ssim(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p) {
  check_pair(x_hat, x);
  if (p.window > std::min(x.size(2), x.size(3))) {
    throw ConfigError("SSIM window larger than the image");
  }
  SsimParams single = p;
  single.scale_weights = {1.0};
  validate_ssim_params(single, x.size(2), x.size(3));
  auto maps = window_maps(to_unit_range(x_hat), to_unit_range(x), p);
  return (power(maps.luminance, p.alpha) * maps.contrast_structure).mean();
}

torch::Tensor ms_ssim(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p) {
  check_pair(x_hat, x);
  validate_ssim_params(p, x.size(2), x.size(3));
  auto a = to_unit_range(x_hat);
  auto b = to_unit_range(x);
  const auto scales = p.scales();
  torch::Tensor product;
  for (std::int64_t j = 0; j < scales; ++j) {
    auto maps = window_maps(a, b, p);
    torch::Tensor term = maps.contrast_structure;
    if (j == scales - 1) {
      term = power(maps.luminance, p.alpha) * term;
    }
    // (B, C) window means, floored so fractional exponents stay real.
    auto per_channel = term.mean({2, 3}).clamp_min(kFloor).pow(p.scale_weights[static_cast<std::size_t>(j)]);
    product = product.defined() ? product * per_channel : per_channel;
    if (j + 1 < scales) {
      a = F::avg_pool2d(a, F::AvgPool2dFuncOptions(2).stride(2));
      b = F::avg_pool2d(b, F::AvgPool2dFuncOptions(2).stride(2));
    }
  }
  return product.mean();
}

torch::Tensor ms_ssim_loss(const torch::Tensor& x_hat, const torch::Tensor& x, const SsimParams& p) {
  return 1.0 - ms_ssim(x_hat, x, p);
}

}  // namespace g2gan
