#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "g2gan/train_config.hpp"

namespace g2gan {

// Everything one experiment needs, serialized as a flat `key = value` file.
struct RunConfig {
  TrainConfig train;
  std::string data;  // dataset root; the only key without a default
  std::string out = "run";
  double holdout_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::int64_t eval_classifier_epochs = 8;
  double eval_min_accuracy = 0.9;
  // 0 picks the scale count from image_size and ssim_window.
  std::int64_t ssim_scales = 0;
};

// Ordered key/value view. Every key is always present (data may be empty).
std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& cfg);
std::string emit_run_config(const RunConfig& cfg);

// Builds a config from key/value overrides applied over the defaults. Unknown
// keys and malformed values throw ConfigError; the result is validated.
// Without an explicit ssim_scale_weights the weights follow image_size,
// ssim_window and ssim_scales. Without an explicit epochs_constant_lr it is
// half of epochs_total, rounded up.
RunConfig run_config_from_entries(const std::map<std::string, std::string>& entries);
RunConfig parse_run_config(const std::string& text);

// Layers, lowest precedence first: config file text, G2GAN_SEED from the
// environment, then flag overrides.
std::map<std::string, std::string> merge_config_layers(const std::string& file_text,
                                                       const std::optional<std::string>& env_seed,
                                                       const std::vector<std::pair<std::string, std::string>>& flags);

// FNV-1a 64 of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace g2gan
