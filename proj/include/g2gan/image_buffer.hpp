#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "g2gan/rng.hpp"

namespace g2gan {

// Pool of past generated images used to feed the discriminator. Until the pool
// is full every image is stored and returned unchanged; afterwards each image is,
// with probability 0.5, swapped for a uniformly chosen stored one.
class ImageBuffer {
 public:
  explicit ImageBuffer(std::int64_t capacity = 50);

  // `fresh` is (B, 3, H, W); each image is queried independently. The result is
  // always detached from any autograd graph.
  torch::Tensor query(const torch::Tensor& fresh, Rng& rng);

  std::int64_t capacity() const { return capacity_; }
  std::int64_t size() const { return static_cast<std::int64_t>(pool_.size()); }
  const std::vector<torch::Tensor>& pool() const { return pool_; }

  // Number of images answered from the pool rather than passed through.
  std::int64_t swaps() const { return swaps_; }

  void restore(std::vector<torch::Tensor> pool) { pool_ = std::move(pool); }
  void clear() { pool_.clear(); }

 private:
  std::int64_t capacity_;
  std::vector<torch::Tensor> pool_;
  std::int64_t swaps_ = 0;
};

}  // namespace g2gan
