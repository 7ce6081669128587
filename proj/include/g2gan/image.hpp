#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>

namespace g2gan {

// Images travel as channels-first float tensors: (3, H, W) for a single image
// or (B, 3, H, W) for a batch, RGB order, values in [-1, 1].

// Throws ShapeError unless `batch` is (B, 3, H, W) with H, W >= 8 and divisible
// by 4, finite, and within [-1, 1].
void check_image_batch(const torch::Tensor& batch);

// 8-bit HWC RGB <-> [-1, 1] float CHW. Round trip is exact for 8-bit input.
torch::Tensor normalize_u8(const torch::Tensor& hwc_u8);
torch::Tensor denormalize_u8(const torch::Tensor& chw);

// [-1, 1] <-> [0, 1]
inline torch::Tensor to_unit_range(const torch::Tensor& x) { return (x + 1.0) * 0.5; }
inline torch::Tensor from_unit_range(const torch::Tensor& x) { return x * 2.0 - 1.0; }

// Decodes a PNG/JPEG, resizes bilinearly to size x size and normalizes.
// Returns nullopt when the file cannot be decoded.
std::optional<torch::Tensor> read_image(const std::filesystem::path& path, int size);

// Writes a (3, H, W) image in [-1, 1] as an 8-bit PNG. Throws IoError on failure.
void write_png(const std::filesystem::path& path, const torch::Tensor& chw);

// Rotates the HSV hue of a (3, H, W) or (B, 3, H, W) image in [-1, 1] by
// `radians`. Saturation and value are left unchanged.
torch::Tensor rotate_hue(const torch::Tensor& image, double radians);

// Tiles (3, H, W) images into a rows x cols mosaic, row-major.
torch::Tensor make_grid(const std::vector<torch::Tensor>& images, int cols);

}  // namespace g2gan
