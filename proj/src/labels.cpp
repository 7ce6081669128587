#include "g2gan/labels.hpp"

#include "g2gan/error.hpp"

namespace g2gan {

void check_label_indices(const torch::Tensor& indices, std::int64_t m) {
  if (indices.dim() != 1) {
    throw LabelError("label indices must be a 1-D tensor");
  }
  if (indices.numel() == 0) {
    return;
  }
  const auto lo = indices.min().item<std::int64_t>();
  const auto hi = indices.max().item<std::int64_t>();
  if (lo < 0 || hi >= m) {
    throw LabelError("domain label out of range [0, " + std::to_string(m) + "): got " +
                     std::to_string(lo < 0 ? lo : hi));
  }
}

DomainLabel encode_label(std::int64_t index, std::int64_t m, std::int64_t height, std::int64_t width) {
  if (m < 2) {
    throw LabelError("domain count must be >= 2");
  }
  if (index < 0 || index >= m) {
    throw LabelError("domain label " + std::to_string(index) + " out of range [0, " + std::to_string(m) + ")");
  }
  DomainLabel label;
  label.index = index;
  label.m = m;
  label.onehot = torch::zeros({m});
  label.onehot[index] = 1.0;
  label.tiled = label.onehot.view({m, 1, 1}).expand({m, height, width}).contiguous();
  return label;
}

torch::Tensor tile_labels(const torch::Tensor& indices, std::int64_t m, std::int64_t height,
                          std::int64_t width, torch::Dtype dtype) {
  check_label_indices(indices, m);
  auto onehot = torch::one_hot(indices.to(torch::kInt64), m).to(dtype);
  return onehot.view({indices.size(0), m, 1, 1}).expand({indices.size(0), m, height, width}).contiguous();
}

}  // namespace g2gan
