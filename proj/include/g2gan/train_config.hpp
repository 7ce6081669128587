#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "g2gan/losses.hpp"
#include "g2gan/networks.hpp"
#include "g2gan/ssim.hpp"

namespace g2gan {

// Ablation switches: each disables one objective term or the second discriminator.
struct AblationSwitches {
  bool use_identity = true;
  bool use_msssim = true;
  bool use_colorcycle = true;
  bool use_double_discriminator = true;
};

enum class Precision { Float32, Float64 };

struct TrainConfig {
  std::int64_t epochs_total = 200;
  std::int64_t epochs_constant_lr = 100;
  double lr0 = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::int64_t batch_size = 1;
  std::int64_t buffer_capacity = 50;
  NetworkConfig network = NetworkConfig::desk(4);
  ObjectiveWeights weights;
  SsimParams ssim = SsimParams::for_resolution(64);
  AblationSwitches ablations;
  // Adds mean |G^t(x, z_x) - x| (weighted by lambda4) to the translator objective.
  bool symmetric_identity = false;
  // Second discriminator sees 2x average-pooled images at half resolution.
  bool double_discriminator_pool = true;
  bool flip_augment = false;
  std::uint64_t seed = 0;
  Precision precision = Precision::Float32;
  // Stops fit after this many iterations; 0 runs every epoch.
  std::int64_t max_iterations = 0;
  std::int64_t checkpoint_every = 10;
  std::int64_t sample_every = 10;
  std::int64_t log_every = 1;

  torch::Dtype dtype() const { return precision == Precision::Float64 ? torch::kFloat64 : torch::kFloat32; }
};

// Throws ConfigError on any violated invariant.
void validate(const TrainConfig& cfg);

// Constant lr0 through epochs_constant_lr, then linear decay reaching 0 at
// epochs_total. Throws ConfigError unless 1 <= epoch <= epochs_total.
double lr_at_epoch(const TrainConfig& cfg, std::int64_t epoch);

// Flat key/value form. Keys are the lower_snake_case field names.
std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& cfg);

// Applies one key. Returns false for an unknown key; throws ConfigError for a
// malformed value.
bool apply_train_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

// "key = value" lines; '#' starts a comment. Throws ConfigError on a line
// without '=' or with an empty key.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

// Every TrainConfig key, one per line.
std::string to_config_text(const TrainConfig& cfg);
// Rejects unknown keys with ConfigError. The result is validated.
TrainConfig train_config_from_text(const std::string& text);

// MS-SSIM weights for `scales` levels (0 picks the most levels, up to 5, whose
// coarsest level still fits `window` at `resolution`).
std::vector<double> auto_scale_weights(std::int64_t resolution, std::int64_t window, std::int64_t scales = 0);

}  // namespace g2gan
