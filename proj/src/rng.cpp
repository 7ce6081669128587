#include "g2gan/rng.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace g2gan {

Rng::Rng(std::uint64_t seed)
    : seed_(seed), engine_(seed), torch_gen_(at::make_generator<at::CPUGeneratorImpl>(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) {
    throw std::invalid_argument("uniform_int: n must be positive");
  }
  const auto range = static_cast<std::uint64_t>(n);
  // Reject the tail so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = engine_();
  while (draw >= limit) {
    draw = engine_();
  }
  return static_cast<std::int64_t>(draw % range);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::engine_state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_engine_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (!in) {
    throw std::invalid_argument("corrupt rng engine state");
  }
}

torch::Tensor Rng::torch_state() const {
  return torch_gen_.get_state();
}

void Rng::set_torch_state(const torch::Tensor& state) {
  torch_gen_.set_state(state);
}

}  // namespace g2gan
