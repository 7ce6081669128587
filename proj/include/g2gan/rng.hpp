#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string>

namespace g2gan {

// Run-level random source. Discrete draws (sampling, shuffling, buffer swaps)
// come from a 64-bit Mersenne twister with hand-rolled distributions so the
// sequence does not depend on the standard library's distribution classes.
// Tensor draws (weight init) use a seeded torch CPU generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be positive.
  std::int64_t uniform_int(std::int64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no cached second value, so state is the engine alone).
  double normal();

  at::Generator& torch_generator() { return torch_gen_; }

  std::uint64_t seed() const { return seed_; }

  // Engine state as text; torch generator state as a byte tensor.
  std::string engine_state() const;
  void set_engine_state(const std::string& state);
  torch::Tensor torch_state() const;
  void set_torch_state(const torch::Tensor& state);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::int64_t>(last - first);
    for (std::int64_t i = n - 1; i > 0; --i) {
      std::swap(first[i], first[uniform_int(i + 1)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  at::Generator torch_gen_;
};

}  // namespace g2gan
