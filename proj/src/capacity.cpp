#include "g2gan/capacity.hpp"

#include <cstdio>

#include "g2gan/error.hpp"

namespace g2gan {

std::string formula_label(ModelCountFormula formula) {
  switch (formula) {
    case ModelCountFormula::OrderedPairs: return "m(m-1)";
    case ModelCountFormula::UnorderedPairs: return "m(m-1)/2";
    case ModelCountFormula::PerDomain: return "m";
    case ModelCountFormula::Single: return "1";
  }
  return "1";
}

std::int64_t model_count(ModelCountFormula formula, std::int64_t m) {
  if (m < 2) {
    throw ConfigError("capacity needs m >= 2");
  }
  switch (formula) {
    case ModelCountFormula::OrderedPairs: return m * (m - 1);
    case ModelCountFormula::UnorderedPairs: return m * (m - 1) / 2;
    case ModelCountFormula::PerDomain: return m;
    case ModelCountFormula::Single: return 1;
  }
  return 1;
}

std::int64_t dual_generator_parameters(const NetworkConfig& arch, SharingMode mode) {
  auto cfg = arch;
  cfg.mode = mode;
  torch::NoGradGuard no_grad;
  const auto pair = build_generator_pair(cfg);
  const auto disc = build_discriminator(cfg);
  return count_parameters(pair) + count_parameters(*disc);
}

std::vector<CapacityEntry> capacity_report(std::int64_t m, const NetworkConfig& arch) {
  if (m < 2) {
    throw ConfigError("capacity needs m >= 2");
  }
  struct Cited {
    const char* method;
    ModelCountFormula formula;
    std::int64_t parameters;
  };
  static const Cited cited[] = {
      {"pix2pix", ModelCountFormula::OrderedPairs, 57'200'000},
      {"BicycleGAN", ModelCountFormula::OrderedPairs, 64'300'000},
      {"CycleGAN", ModelCountFormula::UnorderedPairs, 52'600'000},
      {"DiscoGAN", ModelCountFormula::UnorderedPairs, 16'600'000},
      {"DualGAN", ModelCountFormula::UnorderedPairs, 178'700'000},
      {"DistanceGAN", ModelCountFormula::UnorderedPairs, 52'600'000},
      {"ComboGAN", ModelCountFormula::PerDomain, 14'400'000},
      {"StarGAN", ModelCountFormula::Single, 53'200'000},
  };
  std::vector<CapacityEntry> rows;
  for (const auto& c : cited) {
    rows.push_back({c.method, c.formula, model_count(c.formula, m), c.parameters, false});
  }

  auto cfg = arch;
  cfg.m = m;
  // The discriminator does not depend on the sharing mode; build it once.
  std::int64_t disc_params = 0;
  {
    torch::NoGradGuard no_grad;
    disc_params = count_parameters(*build_discriminator(cfg));
  }
  const std::pair<const char*, SharingMode> modes[] = {
      {"G2GAN (fully-sharing)", SharingMode::Full},
      {"G2GAN (partially-sharing)", SharingMode::Partial},
      {"G2GAN (no-sharing)", SharingMode::None},
  };
  for (const auto& [name, mode] : modes) {
    auto mode_cfg = cfg;
    mode_cfg.mode = mode;
    const auto gen_params = count_parameters(build_generator_pair(mode_cfg));
    rows.push_back({name, ModelCountFormula::Single, 1, gen_params + disc_params, true});
  }
  return rows;
}

std::string capacity_table_text(const std::vector<CapacityEntry>& rows, std::int64_t m) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %-10s %8s %14s %16s\n", "method", "formula", "models",
                "params/model", "total params");
  out += line;
  out += std::string(80, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-28s %-10s %8lld %13.1fM %15.1fM%s\n", r.method.c_str(),
                  formula_label(r.formula).c_str(), static_cast<long long>(r.model_count),
                  static_cast<double>(r.parameters_per_model) / 1e6, static_cast<double>(r.total_parameters()) / 1e6,
                  r.measured ? "" : "  (cited)");
    out += line;
  }
  std::snprintf(line, sizeof(line), "m = %lld\n", static_cast<long long>(m));
  out += line;
  return out;
}

std::string capacity_table_csv(const std::vector<CapacityEntry>& rows) {
  std::string out = "method,formula,model_count,parameters_per_model,total_parameters,measured\n";
  for (const auto& r : rows) {
    out += r.method + "," + formula_label(r.formula) + "," + std::to_string(r.model_count) + "," +
           std::to_string(r.parameters_per_model) + "," + std::to_string(r.total_parameters()) + "," +
           (r.measured ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace g2gan
