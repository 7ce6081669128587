#include "g2gan/networks.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "g2gan/error.hpp"

namespace g2gan {

namespace nn = torch::nn;

std::string to_string(SharingMode mode) {
  switch (mode) {
    case SharingMode::Full: return "full";
    case SharingMode::Partial: return "partial";
    case SharingMode::None: return "none";
  }
  return "none";
}

SharingMode parse_sharing_mode(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "full") return SharingMode::Full;
  if (lower == "partial") return SharingMode::Partial;
  if (lower == "none") return SharingMode::None;
  throw ConfigError("unknown sharing mode '" + text + "' (expected full, partial or none)");
}

NetworkConfig NetworkConfig::full_scale(std::int64_t m, std::int64_t resolution) {
  NetworkConfig cfg;
  cfg.m = m;
  cfg.resolution = resolution;
  cfg.width_base = 64;
  cfg.residual_blocks = 6;
  cfg.disc_width = 64;
  cfg.disc_depth = 6;
  return cfg;
}

NetworkConfig NetworkConfig::desk(std::int64_t m, std::int64_t resolution) {
  NetworkConfig cfg;
  cfg.m = m;
  cfg.resolution = resolution;
  return cfg;
}

void validate_generator_config(const NetworkConfig& cfg) {
  if (cfg.m < 2) {
    throw ConfigError("domain count m must be >= 2");
  }
  if (cfg.resolution < 8 || cfg.resolution % 4 != 0) {
    throw ConfigError("generator resolution must be >= 8 and divisible by 4");
  }
  if (cfg.width_base < 4) {
    throw ConfigError("width_base must be >= 4");
  }
  if (cfg.residual_blocks < 0) {
    throw ConfigError("residual_blocks must be >= 0");
  }
  if (cfg.reconstructor_width) {
    if (cfg.mode != SharingMode::None) {
      throw ConfigError("a separate reconstructor width needs sharing mode none");
    }
    if (*cfg.reconstructor_width < 4) {
      throw ConfigError("reconstructor width must be >= 4");
    }
  }
}

void validate_discriminator_config(const NetworkConfig& cfg) {
  if (cfg.m < 2) {
    throw ConfigError("domain count m must be >= 2");
  }
  if (cfg.disc_depth < 1 || cfg.disc_width < 1) {
    throw ConfigError("discriminator depth and width must be positive");
  }
  const std::int64_t stride = std::int64_t{1} << cfg.disc_depth;
  if (cfg.resolution < stride || cfg.resolution % stride != 0) {
    throw ConfigError("discriminator resolution " + std::to_string(cfg.resolution) +
                      " must be divisible by 2^" + std::to_string(cfg.disc_depth));
  }
}

// ---------------------------------------------------------------------------

ConvNormReluImpl::ConvNormReluImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride,
                                   std::int64_t padding, bool transposed) {
  if (transposed) {
    deconv_ = register_module(
        "conv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, kernel).stride(stride).padding(padding).bias(false)));
  } else {
    conv_ = register_module(
        "conv", nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(false)));
  }
  norm_ = register_module("norm", nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
}

torch::Tensor ConvNormReluImpl::forward(const torch::Tensor& x) {
  auto h = conv_ ? conv_->forward(x) : deconv_->forward(x);
  return torch::relu(norm_->forward(h));
}

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels) {
  const auto opts = nn::Conv2dOptions(channels, channels, 3).stride(1).padding(1).bias(false);
  const auto norm_opts = nn::InstanceNorm2dOptions(channels).affine(true);
  conv1_ = register_module("conv1", nn::Conv2d(opts));
  norm1_ = register_module("norm1", nn::InstanceNorm2d(norm_opts));
  conv2_ = register_module("conv2", nn::Conv2d(opts));
  norm2_ = register_module("norm2", nn::InstanceNorm2d(norm_opts));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(norm1_->forward(conv1_->forward(x)));
  return x + norm2_->forward(conv2_->forward(h));
}

EncoderImpl::EncoderImpl(std::int64_t in_channels, std::int64_t width_base, std::int64_t residual_blocks) {
  nn::Sequential layers;
  layers->push_back("stem", ConvNormRelu(in_channels, width_base, 7, 1, 3));
  layers->push_back("down1", ConvNormRelu(width_base, 2 * width_base, 4, 2, 1));
  layers->push_back("down2", ConvNormRelu(2 * width_base, 4 * width_base, 4, 2, 1));
  for (std::int64_t i = 0; i < residual_blocks; ++i) {
    layers->push_back("res" + std::to_string(i), ResidualBlock(4 * width_base));
  }
  layers_ = register_module("blocks", layers);
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& x) {
  return layers_->forward(x);
}

DecoderImpl::DecoderImpl(std::int64_t width_base) {
  up1_ = register_module("up1", ConvNormRelu(4 * width_base, 2 * width_base, 4, 2, 1, true));
  up2_ = register_module("up2", ConvNormRelu(2 * width_base, width_base, 4, 2, 1, true));
  out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(width_base, 3, 7).stride(1).padding(3).bias(false)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& x) {
  return torch::tanh(out_->forward(up2_->forward(up1_->forward(x))));
}

GeneratorImpl::GeneratorImpl(Encoder encoder, Decoder decoder, std::int64_t m, std::int64_t resolution)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), m_(m), resolution_(resolution) {
  register_module("encoder", encoder_);
  register_module("decoder", decoder_);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x, const torch::Tensor& labels) {
  auto cond = tile_labels(labels, m_, x.size(2), x.size(3), x.scalar_type());
  return decoder_->forward(encoder_->forward(torch::cat({x, cond}, 1)));
}

// ---------------------------------------------------------------------------

namespace {

void append_named(std::vector<std::pair<std::string, torch::Tensor>>& out, const nn::Module& module,
                  const std::string& prefix) {
  for (const auto& item : module.named_parameters(true)) {
    out.emplace_back(prefix + item.key(), item.value());
  }
}

}  // namespace

std::vector<std::pair<std::string, torch::Tensor>> GeneratorPair::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  const bool share_encoder = mode != SharingMode::None;
  const bool share_decoder = mode == SharingMode::Full;
  append_named(out, *translator->encoder(), share_encoder ? "shared.encoder." : "translator.encoder.");
  append_named(out, *translator->decoder(), share_decoder ? "shared.decoder." : "translator.decoder.");
  if (!share_encoder) {
    append_named(out, *reconstructor->encoder(), "reconstructor.encoder.");
  }
  if (!share_decoder) {
    append_named(out, *reconstructor->decoder(), "reconstructor.decoder.");
  }
  return out;
}

std::vector<torch::Tensor> GeneratorPair::translator_parameters() const {
  return unique_parameters(*translator);
}

std::vector<torch::Tensor> GeneratorPair::reconstructor_parameters() const {
  return unique_parameters(*reconstructor);
}

void GeneratorPair::to(torch::Dtype dtype) {
  // Moving a shared submodule twice is a no-op the second time.
  translator->to(dtype);
  reconstructor->to(dtype);
}

GeneratorPair build_generator_pair(const NetworkConfig& cfg) {
  validate_generator_config(cfg);
  const auto in_channels = 3 + cfg.m;
  const auto recon_width = cfg.reconstructor_width.value_or(cfg.width_base);

  Encoder t_encoder(in_channels, cfg.width_base, cfg.residual_blocks);
  Decoder t_decoder(cfg.width_base);
  Encoder r_encoder = cfg.mode == SharingMode::None ? Encoder(in_channels, recon_width, cfg.residual_blocks) : t_encoder;
  Decoder r_decoder = cfg.mode == SharingMode::Full ? t_decoder : Decoder(recon_width);

  GeneratorPair pair;
  pair.mode = cfg.mode;
  pair.config = cfg;
  pair.translator = Generator(t_encoder, t_decoder, cfg.m, cfg.resolution);
  pair.reconstructor = Generator(r_encoder, r_decoder, cfg.m, cfg.resolution);
  return pair;
}

// ---------------------------------------------------------------------------

DiscriminatorImpl::DiscriminatorImpl(std::int64_t m, std::int64_t resolution, std::int64_t width_base,
                                     std::int64_t depth)
    : m_(m), resolution_(resolution) {
  nn::Sequential trunk;
  std::int64_t in = 3;
  std::int64_t out = width_base;
  for (std::int64_t i = 0; i < depth; ++i) {
    trunk->push_back("conv" + std::to_string(i),
                     nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(true)));
    trunk->push_back("act" + std::to_string(i), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.01)));
    in = out;
    out *= 2;
  }
  trunk_ = register_module("trunk", trunk);
  const auto remaining = resolution >> depth;
  source_head_ = register_module("source_head", nn::Conv2d(nn::Conv2dOptions(in, 1, 3).stride(1).padding(1).bias(false)));
  class_head_ = register_module("class_head", nn::Conv2d(nn::Conv2dOptions(in, m, remaining).bias(false)));
}

DiscriminatorOutput DiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = trunk_->forward(x);
  return {source_head_->forward(h), class_head_->forward(h).flatten(1)};
}

Discriminator build_discriminator(std::int64_t m, std::int64_t resolution, std::int64_t width_base,
                                  std::int64_t depth) {
  NetworkConfig cfg;
  cfg.m = m;
  cfg.resolution = resolution;
  cfg.disc_width = width_base;
  cfg.disc_depth = depth;
  return build_discriminator(cfg);
}

Discriminator build_discriminator(const NetworkConfig& cfg) {
  validate_discriminator_config(cfg);
  return Discriminator(cfg.m, cfg.resolution, cfg.disc_width, cfg.disc_depth);
}

// ---------------------------------------------------------------------------

namespace {

void init_module_tree(nn::Module& root, Rng& rng, std::unordered_set<const nn::Module*>& seen) {
  torch::NoGradGuard no_grad;
  auto& gen = rng.torch_generator();
  for (const auto& module : root.modules(/*include_self=*/true)) {
    if (!seen.insert(module.get()).second) {
      continue;
    }
    if (auto* conv = module->as<nn::Conv2d>()) {
      conv->weight.normal_(0.0, 0.02, gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* deconv = module->as<nn::ConvTranspose2d>()) {
      deconv->weight.normal_(0.0, 0.02, gen);
      if (deconv->bias.defined()) deconv->bias.zero_();
    } else if (auto* linear = module->as<nn::Linear>()) {
      linear->weight.normal_(0.0, 0.02, gen);
      if (linear->bias.defined()) linear->bias.zero_();
    } else if (auto* norm = module->as<nn::InstanceNorm2d>()) {
      if (norm->weight.defined()) norm->weight.fill_(1.0);
      if (norm->bias.defined()) norm->bias.zero_();
    }
  }
}

}  // namespace

void init_weights(nn::Module& net, Rng& rng) {
  std::unordered_set<const nn::Module*> seen;
  init_module_tree(net, rng, seen);
}

void init_weights(GeneratorPair& pair, Rng& rng) {
  std::unordered_set<const nn::Module*> seen;
  init_module_tree(*pair.translator, rng, seen);
  init_module_tree(*pair.reconstructor, rng, seen);
}

std::vector<torch::Tensor> unique_parameters(const nn::Module& net) {
  std::vector<torch::Tensor> out;
  std::unordered_set<const void*> seen;
  for (const auto& p : net.parameters(true)) {
    if (seen.insert(p.unsafeGetTensorImpl()).second) {
      out.push_back(p);
    }
  }
  return out;
}

std::int64_t count_parameters(const std::vector<torch::Tensor>& params) {
  std::unordered_set<const void*> seen;
  std::int64_t total = 0;
  for (const auto& p : params) {
    if (seen.insert(p.unsafeGetTensorImpl()).second) {
      total += p.numel();
    }
  }
  return total;
}

std::int64_t count_parameters(const nn::Module& net) {
  return count_parameters(unique_parameters(net));
}

std::int64_t count_parameters(const GeneratorPair& pair) {
  auto params = pair.translator_parameters();
  auto recon = pair.reconstructor_parameters();
  params.insert(params.end(), recon.begin(), recon.end());
  return count_parameters(params);
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool flag) {
  for (const auto& p : params) {
    p.requires_grad_(flag);
  }
}

torch::Tensor translate(Generator& generator, const torch::Tensor& x, const torch::Tensor& labels) {
  if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != generator->resolution() ||
      x.size(3) != generator->resolution()) {
    throw ShapeError("generator expects (B, 3, " + std::to_string(generator->resolution()) + ", " +
                     std::to_string(generator->resolution()) + "), got " + c10::str(x.sizes()));
  }
  if (labels.dim() != 1 || labels.size(0) != x.size(0)) {
    throw ShapeError("generator needs one label per image");
  }
  check_label_indices(labels, generator->domain_count());
  return generator->forward(x, labels);
}

torch::Tensor translate(Generator& generator, const torch::Tensor& x, const DomainLabel& label) {
  if (label.m != generator->domain_count()) {
    throw LabelError("label has m=" + std::to_string(label.m) + ", generator expects " +
                     std::to_string(generator->domain_count()));
  }
  return translate(generator, x, torch::full({x.size(0)}, label.index, torch::kInt64));
}

DiscriminatorOutput discriminate(Discriminator& discriminator, const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != discriminator->resolution() ||
      x.size(3) != discriminator->resolution()) {
    throw ShapeError("discriminator expects (B, 3, " + std::to_string(discriminator->resolution()) + ", " +
                     std::to_string(discriminator->resolution()) + "), got " + c10::str(x.sizes()));
  }
  return discriminator->forward(x);
}

}  // namespace g2gan
