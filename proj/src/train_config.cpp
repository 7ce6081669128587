#include "g2gan/train_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "g2gan/error.hpp"

namespace g2gan {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs_total < 1) {
    throw ConfigError("epochs_total must be >= 1");
  }
  if (cfg.epochs_constant_lr < 0 || cfg.epochs_constant_lr > cfg.epochs_total) {
    throw ConfigError("epochs_constant_lr must lie in [0, epochs_total]");
  }
  if (!(cfg.lr0 > 0.0) || !std::isfinite(cfg.lr0)) {
    throw ConfigError("lr0 must be positive");
  }
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0 && cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (cfg.batch_size < 1) {
    throw ConfigError("batch_size must be >= 1");
  }
  if (cfg.buffer_capacity < 0) {
    throw ConfigError("buffer_capacity must be >= 0");
  }
  if (cfg.max_iterations < 0 || cfg.checkpoint_every < 1 || cfg.sample_every < 1 || cfg.log_every < 1) {
    throw ConfigError("max_iterations must be >= 0 and checkpoint/sample/log intervals >= 1");
  }
  validate_weights(cfg.weights);
  validate_generator_config(cfg.network);
  validate_discriminator_config(cfg.network);
  if (cfg.ablations.use_double_discriminator && cfg.double_discriminator_pool) {
    auto half = cfg.network;
    half.resolution /= 2;
    try {
      validate_discriminator_config(half);
    } catch (const ConfigError&) {
      throw ConfigError("second discriminator needs resolution / 2 divisible by 2^disc_depth");
    }
  }
  validate_ssim_params(cfg.ssim, cfg.network.resolution, cfg.network.resolution);
}

double lr_at_epoch(const TrainConfig& cfg, std::int64_t epoch) {
  if (epoch < 1 || epoch > cfg.epochs_total) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [1, " + std::to_string(cfg.epochs_total) + "]");
  }
  if (epoch <= cfg.epochs_constant_lr) {
    return cfg.lr0;
  }
  const auto decay_span = static_cast<double>(cfg.epochs_total - cfg.epochs_constant_lr);
  return cfg.lr0 * static_cast<double>(cfg.epochs_total - epoch) / decay_span;
}

std::vector<double> auto_scale_weights(std::int64_t resolution, std::int64_t window, std::int64_t scales) {
  if (scales == 0) {
    scales = 5;
    while (scales > 1 && (resolution >> (scales - 1)) < window) {
      --scales;
    }
  }
  return SsimParams::canonical_weights(scales);
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  // shortest text that parses back to the same double
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument(value);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + value + "'");
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) {
    throw ConfigError("key '" + key + "' expects a comma-separated list");
  }
  return out;
}

struct Field {
  std::function<std::string(const TrainConfig&)> emit;
  std::function<void(TrainConfig&, const std::string& key, const std::string&)> apply;
};

#define G2GAN_INT_FIELD(name, member)                                                             \
  {name,                                                                                          \
   {[](const TrainConfig& c) { return std::to_string(c.member); },                                \
    [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_int(k, v); }}}
#define G2GAN_DOUBLE_FIELD(name, member)                                                          \
  {name,                                                                                          \
   {[](const TrainConfig& c) { return format_double(c.member); },                                 \
    [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }}}
#define G2GAN_BOOL_FIELD(name, member)                                                            \
  {name,                                                                                          \
   {[](const TrainConfig& c) { return format_bool(c.member); },                                   \
    [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      G2GAN_INT_FIELD("epochs_total", epochs_total),
      G2GAN_INT_FIELD("epochs_constant_lr", epochs_constant_lr),
      G2GAN_DOUBLE_FIELD("lr0", lr0),
      G2GAN_DOUBLE_FIELD("adam_beta1", adam_beta1),
      G2GAN_DOUBLE_FIELD("adam_beta2", adam_beta2),
      G2GAN_INT_FIELD("batch_size", batch_size),
      G2GAN_INT_FIELD("buffer_capacity", buffer_capacity),
      G2GAN_INT_FIELD("image_size", network.resolution),
      G2GAN_INT_FIELD("width_base", network.width_base),
      G2GAN_INT_FIELD("residual_blocks", network.residual_blocks),
      G2GAN_INT_FIELD("disc_width", network.disc_width),
      G2GAN_INT_FIELD("disc_depth", network.disc_depth),
      {"sharing_mode",
       {[](const TrainConfig& c) { return to_string(c.network.mode); },
        [](TrainConfig& c, const std::string&, const std::string& v) { c.network.mode = parse_sharing_mode(v); }}},
      {"reconstructor_width",
       {[](const TrainConfig& c) { return std::to_string(c.network.reconstructor_width.value_or(0)); },
        [](TrainConfig& c, const std::string& k, const std::string& v) {
          const auto w = parse_int(k, v);
          c.network.reconstructor_width = w == 0 ? std::nullopt : std::optional<std::int64_t>(w);
        }}},
      G2GAN_DOUBLE_FIELD("lambda1", weights.lambda1),
      G2GAN_DOUBLE_FIELD("lambda2", weights.lambda2),
      G2GAN_DOUBLE_FIELD("lambda3", weights.lambda3),
      G2GAN_DOUBLE_FIELD("lambda4", weights.lambda4),
      G2GAN_DOUBLE_FIELD("ssim_c1", ssim.c1),
      G2GAN_DOUBLE_FIELD("ssim_c2", ssim.c2),
      G2GAN_DOUBLE_FIELD("ssim_c3", ssim.c3),
      G2GAN_DOUBLE_FIELD("ssim_alpha", ssim.alpha),
      G2GAN_DOUBLE_FIELD("ssim_beta", ssim.beta),
      G2GAN_DOUBLE_FIELD("ssim_gamma", ssim.gamma),
      G2GAN_INT_FIELD("ssim_window", ssim.window),
      G2GAN_DOUBLE_FIELD("ssim_sigma", ssim.sigma),
      {"ssim_scale_weights",
       {[](const TrainConfig& c) { return format_list(c.ssim.scale_weights); },
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.ssim.scale_weights = parse_list(k, v); }}},
      G2GAN_BOOL_FIELD("use_identity", ablations.use_identity),
      G2GAN_BOOL_FIELD("use_msssim", ablations.use_msssim),
      G2GAN_BOOL_FIELD("use_colorcycle", ablations.use_colorcycle),
      G2GAN_BOOL_FIELD("use_double_discriminator", ablations.use_double_discriminator),
      G2GAN_BOOL_FIELD("symmetric_identity", symmetric_identity),
      G2GAN_BOOL_FIELD("double_discriminator_pool", double_discriminator_pool),
      G2GAN_BOOL_FIELD("flip_augment", flip_augment),
      {"seed",
       {[](const TrainConfig& c) { return std::to_string(c.seed); },
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); }}},
      {"precision",
       {[](const TrainConfig& c) { return std::string(c.precision == Precision::Float64 ? "64" : "32"); },
        [](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "32") {
            c.precision = Precision::Float32;
          } else if (v == "64") {
            c.precision = Precision::Float64;
          } else {
            throw ConfigError("key '" + k + "' expects 32 or 64, got '" + v + "'");
          }
        }}},
      G2GAN_INT_FIELD("max_iterations", max_iterations),
      G2GAN_INT_FIELD("checkpoint_every", checkpoint_every),
      G2GAN_INT_FIELD("sample_every", sample_every),
      G2GAN_INT_FIELD("log_every", log_every),
  };
  return table;
}

#undef G2GAN_INT_FIELD
#undef G2GAN_DOUBLE_FIELD
#undef G2GAN_BOOL_FIELD

}  // namespace

std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, field] : fields()) {
    out.emplace_back(key, field.emit(cfg));
  }
  return out;
}

bool apply_train_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.apply(cfg, key, value);
      return true;
    }
  }
  return false;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
    }
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [key, value] : entries) {
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string to_config_text(const TrainConfig& cfg) {
  return format_key_values(train_config_entries(cfg));
}

TrainConfig train_config_from_text(const std::string& text) {
  TrainConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (!apply_train_config_entry(cfg, key, value)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

}  // namespace g2gan
