#include "g2gan/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <numbers>

#include "g2gan/error.hpp"

namespace g2gan {

void check_image_batch(const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(1) != 3) {
    throw ShapeError("expected an image batch of shape (B, 3, H, W), got " +
                     c10::str(batch.sizes()));
  }
  const auto h = batch.size(2);
  const auto w = batch.size(3);
  if (h < 8 || w < 8 || h % 4 != 0 || w % 4 != 0) {
    throw ShapeError("image height and width must be >= 8 and divisible by 4, got " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  if (!torch::isfinite(batch).all().item<bool>()) {
    throw ShapeError("image batch contains non-finite values");
  }
  if (batch.numel() > 0 && (batch.min().item<double>() < -1.0 || batch.max().item<double>() > 1.0)) {
    throw ShapeError("image values must lie in [-1, 1]");
  }
}

torch::Tensor normalize_u8(const torch::Tensor& hwc_u8) {
  return hwc_u8.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

torch::Tensor denormalize_u8(const torch::Tensor& chw) {
  return chw.detach()
      .to(torch::kFloat32)
      .add(1.0)
      .mul(127.5)
      .round()
      .clamp(0, 255)
      .to(torch::kUInt8)
      .permute({1, 2, 0})
      .contiguous();
}

std::optional<torch::Tensor> read_image(const std::filesystem::path& path, int size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    return std::nullopt;
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size) {
    cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  }
  auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return normalize_u8(hwc);
}

void write_png(const std::filesystem::path& path, const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) {
    throw ShapeError("write_png expects a (3, H, W) image");
  }
  auto hwc = denormalize_u8(chw);
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) {
    throw IoError("cannot write " + path.string());
  }
}

namespace {

void rotate_hue_pixel(double& r, double& g, double& b, double shift) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  if (chroma <= 0.0) {
    return;  // gray: hue undefined
  }
  double hue;  // in sextants, [0, 6)
  if (mx == r) {
    hue = std::fmod((g - b) / chroma + 6.0, 6.0);
  } else if (mx == g) {
    hue = (b - r) / chroma + 2.0;
  } else {
    hue = (r - g) / chroma + 4.0;
  }
  hue = std::fmod(hue + shift, 6.0);
  if (hue < 0.0) {
    hue += 6.0;
  }
  const double x = chroma * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
  double r1 = 0.0, g1 = 0.0, b1 = 0.0;
  switch (static_cast<int>(hue)) {
    case 0: r1 = chroma; g1 = x; break;
    case 1: r1 = x; g1 = chroma; break;
    case 2: g1 = chroma; b1 = x; break;
    case 3: g1 = x; b1 = chroma; break;
    case 4: r1 = x; b1 = chroma; break;
    default: r1 = chroma; b1 = x; break;
  }
  r = r1 + mn;
  g = g1 + mn;
  b = b1 + mn;
}

}  // namespace

torch::Tensor rotate_hue(const torch::Tensor& image, double radians) {
  const bool single = image.dim() == 3;
  auto batch = single ? image.unsqueeze(0) : image;
  if (batch.dim() != 4 || batch.size(1) != 3) {
    throw ShapeError("rotate_hue expects (3, H, W) or (B, 3, H, W)");
  }
  auto work = to_unit_range(batch.to(torch::kFloat64)).contiguous();
  const double shift = radians / (std::numbers::pi / 3.0);
  const auto planes = batch.size(2) * batch.size(3);
  auto* data = work.data_ptr<double>();
  for (std::int64_t n = 0; n < batch.size(0); ++n) {
    double* red = data + n * 3 * planes;
    double* green = red + planes;
    double* blue = green + planes;
    for (std::int64_t p = 0; p < planes; ++p) {
      rotate_hue_pixel(red[p], green[p], blue[p], shift);
    }
  }
  auto out = from_unit_range(work).clamp(-1.0, 1.0).to(image.scalar_type());
  return single ? out.squeeze(0) : out;
}

torch::Tensor make_grid(const std::vector<torch::Tensor>& images, int cols) {
  if (images.empty() || cols <= 0) {
    throw ShapeError("make_grid needs at least one image and a positive column count");
  }
  const auto h = images.front().size(1);
  const auto w = images.front().size(2);
  const auto count = static_cast<int>(images.size());
  const int rows = (count + cols - 1) / cols;
  auto grid = torch::full({3, rows * h, cols * w}, -1.0, images.front().options());
  for (int i = 0; i < count; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    grid.slice(1, r * h, (r + 1) * h).slice(2, c * w, (c + 1) * w).copy_(images[i]);
  }
  return grid;
}

}  // namespace g2gan
