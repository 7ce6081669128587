#include "g2gan/run_config.hpp"

#include <charconv>
#include <cstdio>

#include "g2gan/error.hpp"

namespace g2gan {

namespace {

std::string format_double(double v) {
  // shortest text that parses back to the same double
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) {
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used == value.size()) {
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value.front() != '-') {
      const unsigned long long v = std::stoull(value, &used);
      if (used == value.size()) {
        return v;
      }
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + value + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out{
      {"data", cfg.data},
      {"out", cfg.out},
      {"holdout_fraction", format_double(cfg.holdout_fraction)},
      {"split_seed", std::to_string(cfg.split_seed)},
      {"eval_classifier_epochs", std::to_string(cfg.eval_classifier_epochs)},
      {"eval_min_accuracy", format_double(cfg.eval_min_accuracy)},
      {"ssim_scales", std::to_string(cfg.ssim_scales)},
  };
  for (auto& entry : train_config_entries(cfg.train)) {
    out.push_back(std::move(entry));
  }
  return out;
}

std::string emit_run_config(const RunConfig& cfg) {
  return format_key_values(run_config_entries(cfg));
}

RunConfig run_config_from_entries(const std::map<std::string, std::string>& entries) {
  RunConfig cfg;
  bool explicit_weights = false;
  bool explicit_constant_lr = false;
  for (const auto& [key, value] : entries) {
    if (key == "data") {
      cfg.data = value;
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "holdout_fraction") {
      cfg.holdout_fraction = to_double(key, value);
    } else if (key == "split_seed") {
      cfg.split_seed = to_uint(key, value);
    } else if (key == "eval_classifier_epochs") {
      cfg.eval_classifier_epochs = to_int(key, value);
    } else if (key == "eval_min_accuracy") {
      cfg.eval_min_accuracy = to_double(key, value);
    } else if (key == "ssim_scales") {
      cfg.ssim_scales = to_int(key, value);
    } else if (!apply_train_config_entry(cfg.train, key, value)) {
      throw ConfigError("unknown config key '" + key + "'");
    } else {
      explicit_weights |= key == "ssim_scale_weights";
      explicit_constant_lr |= key == "epochs_constant_lr";
    }
  }
  if (cfg.ssim_scales < 0 || cfg.ssim_scales > 5) {
    throw ConfigError("ssim_scales must be in [0, 5]");
  }
  if (!explicit_weights) {
    cfg.train.ssim.scale_weights = auto_scale_weights(cfg.train.network.resolution, cfg.train.ssim.window, cfg.ssim_scales);
  }
  if (!explicit_constant_lr) {
    cfg.train.epochs_constant_lr = (cfg.train.epochs_total + 1) / 2;
  }
  if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must be in (0, 1)");
  }
  if (cfg.eval_classifier_epochs < 1) {
    throw ConfigError("eval_classifier_epochs must be >= 1");
  }
  validate(cfg.train);
  return cfg;
}

RunConfig parse_run_config(const std::string& text) {
  std::map<std::string, std::string> entries;
  for (const auto& [key, value] : parse_key_values(text)) {
    entries[key] = value;
  }
  return run_config_from_entries(entries);
}

std::map<std::string, std::string> merge_config_layers(const std::string& file_text,
                                                       const std::optional<std::string>& env_seed,
                                                       const std::vector<std::pair<std::string, std::string>>& flags) {
  std::map<std::string, std::string> merged;
  for (const auto& [key, value] : parse_key_values(file_text)) {
    merged[key] = value;
  }
  if (env_seed && !env_seed->empty()) {
    merged["seed"] = *env_seed;
  }
  for (const auto& [key, value] : flags) {
    merged[key] = value;
  }
  return merged;
}

std::string config_hash(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace g2gan
