#include "g2gan/image_buffer.hpp"

#include "g2gan/error.hpp"

namespace g2gan {

ImageBuffer::ImageBuffer(std::int64_t capacity) : capacity_(capacity) {
  if (capacity < 0) {
    throw ConfigError("image buffer capacity must be >= 0");
  }
}

torch::Tensor ImageBuffer::query(const torch::Tensor& fresh, Rng& rng) {
  auto detached = fresh.detach();
  if (capacity_ == 0) {
    return detached;
  }
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<std::size_t>(detached.size(0)));
  for (std::int64_t i = 0; i < detached.size(0); ++i) {
    auto image = detached[i].clone();
    if (size() < capacity_) {
      pool_.push_back(image);
      out.push_back(image);
    } else if (rng.bernoulli(0.5)) {
      const auto slot = static_cast<std::size_t>(rng.uniform_int(capacity_));
      out.push_back(pool_[slot]);
      pool_[slot] = image;
      ++swaps_;
    } else {
      out.push_back(image);
    }
  }
  return torch::stack(out);
}

}  // namespace g2gan
