#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace g2gan {

// A target or source domain. `tiled` is the (m, H, W) conditioning map
// concatenated to the generator's image input: channel `index` is all ones.
struct DomainLabel {
  std::int64_t index = 0;
  std::int64_t m = 2;
  torch::Tensor onehot;  // (m)
  torch::Tensor tiled;   // (m, H, W)
};

// Throws LabelError if index is outside [0, m) or m < 2.
DomainLabel encode_label(std::int64_t index, std::int64_t m, std::int64_t height, std::int64_t width);

// Batched form of the tiled encoding: `indices` is a (B) int64 tensor,
// result is (B, m, H, W) in `dtype`.
torch::Tensor tile_labels(const torch::Tensor& indices, std::int64_t m, std::int64_t height,
                          std::int64_t width, torch::Dtype dtype = torch::kFloat32);

// Throws LabelError unless every entry of `indices` is in [0, m).
void check_label_indices(const torch::Tensor& indices, std::int64_t m);

}  // namespace g2gan
