#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "g2gan/labels.hpp"
#include "g2gan/rng.hpp"

namespace g2gan {

// Which parameters the translation and reconstruction generators have in common.
enum class SharingMode { Full, Partial, None };

std::string to_string(SharingMode mode);
// Accepts full/partial/none (case-insensitive). Throws ConfigError.
SharingMode parse_sharing_mode(const std::string& text);

struct NetworkConfig {
  std::int64_t m = 4;
  std::int64_t resolution = 64;
  std::int64_t width_base = 16;
  std::int64_t residual_blocks = 4;
  std::int64_t disc_width = 16;
  std::int64_t disc_depth = 4;
  SharingMode mode = SharingMode::None;
  // Channel multiplier of the reconstructor when it differs from the translator
  // (only meaningful without sharing).
  std::optional<std::int64_t> reconstructor_width;

  // 256-px, width 64, 6 residual blocks, 6-stage discriminator.
  static NetworkConfig full_scale(std::int64_t m, std::int64_t resolution = 256);
  // 64-px, width 16, 4 residual blocks, 4-stage discriminator.
  static NetworkConfig desk(std::int64_t m, std::int64_t resolution = 64);
};

// Throws ConfigError when the generator side of `cfg` is unusable.
void validate_generator_config(const NetworkConfig& cfg);
// Throws ConfigError when resolution is not divisible by 2^disc_depth.
void validate_discriminator_config(const NetworkConfig& cfg);

// conv -> instance norm -> ReLU
class ConvNormReluImpl : public torch::nn::Module {
 public:
  ConvNormReluImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride,
                   std::int64_t padding, bool transposed = false);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::ConvTranspose2d deconv_{nullptr};
  torch::nn::InstanceNorm2d norm_{nullptr};
};
TORCH_MODULE(ConvNormRelu);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::InstanceNorm2d norm1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::InstanceNorm2d norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// 7x7 stem, two stride-2 down-sampling convs, residual blocks at 4x width.
class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(std::int64_t in_channels, std::int64_t width_base, std::int64_t residual_blocks);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential layers_{nullptr};
};
TORCH_MODULE(Encoder);

// Two stride-2 transposed convs, 7x7 conv to RGB, tanh.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(std::int64_t width_base);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvNormRelu up1_{nullptr};
  ConvNormRelu up2_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(Decoder);

// Label-conditioned generator: input is the image concatenated with the
// spatially tiled one-hot target label (3 + m channels).
class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(Encoder encoder, Decoder decoder, std::int64_t m, std::int64_t resolution);

  // x: (B, 3, H, W); labels: (B) int64 domain indices.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& labels);

  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  std::int64_t domain_count() const { return m_; }
  std::int64_t resolution() const { return resolution_; }

 private:
  Encoder encoder_;
  Decoder decoder_;
  std::int64_t m_;
  std::int64_t resolution_;
};
TORCH_MODULE(Generator);

// The translation generator G^t and reconstruction generator G^r.
struct GeneratorPair {
  Generator translator{nullptr};
  Generator reconstructor{nullptr};
  SharingMode mode = SharingMode::None;
  NetworkConfig config;

  // Every distinct parameter once, under checkpoint names: "translator.*",
  // "reconstructor.*", or "shared.encoder.*"/"shared.decoder.*" for common parts.
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;

  // Unique parameters of the translator / reconstructor (shared ones appear in both).
  std::vector<torch::Tensor> translator_parameters() const;
  std::vector<torch::Tensor> reconstructor_parameters() const;

  void to(torch::Dtype dtype);
};

// Throws ConfigError on invalid config.
GeneratorPair build_generator_pair(const NetworkConfig& cfg);

struct DiscriminatorOutput {
  torch::Tensor patch;   // (B, 1, h, w) raw source scores
  torch::Tensor logits;  // (B, m) raw class scores
};

// PatchGAN trunk of stride-2 4x4 convs with leaky ReLU, a 3x3 source head and a
// class head whose kernel covers the remaining spatial extent.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(std::int64_t m, std::int64_t resolution, std::int64_t width_base, std::int64_t depth);

  DiscriminatorOutput forward(const torch::Tensor& x);

  std::int64_t domain_count() const { return m_; }
  std::int64_t resolution() const { return resolution_; }

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d source_head_{nullptr};
  torch::nn::Conv2d class_head_{nullptr};
  std::int64_t m_;
  std::int64_t resolution_;
};
TORCH_MODULE(Discriminator);

// Throws ConfigError when the resolution is incompatible with the depth.
Discriminator build_discriminator(std::int64_t m, std::int64_t resolution, std::int64_t width_base,
                                  std::int64_t depth);
Discriminator build_discriminator(const NetworkConfig& cfg);

// Conv / linear weights ~ N(0, 0.02^2) from `rng`'s torch generator; conv biases 0;
// normalization scales 1 and offsets 0. Shared submodules are initialized once.
void init_weights(torch::nn::Module& net, Rng& rng);
void init_weights(GeneratorPair& pair, Rng& rng);

// Number of distinct parameter scalars across all given tensors.
std::int64_t count_parameters(const std::vector<torch::Tensor>& params);
std::int64_t count_parameters(const torch::nn::Module& net);
std::int64_t count_parameters(const GeneratorPair& pair);

// Runs the generator with a ShapeError check on x and the labels.
torch::Tensor translate(Generator& generator, const torch::Tensor& x, const torch::Tensor& labels);
torch::Tensor translate(Generator& generator, const torch::Tensor& x, const DomainLabel& label);

// Runs the discriminator with a ShapeError check on x.
DiscriminatorOutput discriminate(Discriminator& discriminator, const torch::Tensor& x);

// Every distinct parameter tensor reachable from `net`.
std::vector<torch::Tensor> unique_parameters(const torch::nn::Module& net);

// Toggles requires_grad on every parameter.
void set_requires_grad(const std::vector<torch::Tensor>& params, bool flag);

}  // namespace g2gan
