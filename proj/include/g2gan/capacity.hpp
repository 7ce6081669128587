#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2gan/networks.hpp"

namespace g2gan {

enum class ModelCountFormula {
  OrderedPairs,    // m(m-1): one model per ordered domain pair
  UnorderedPairs,  // m(m-1)/2
  PerDomain,       // m
  Single,          // 1
};

std::string formula_label(ModelCountFormula formula);
// Throws ConfigError for m < 2.
std::int64_t model_count(ModelCountFormula formula, std::int64_t m);

struct CapacityEntry {
  std::string method;
  ModelCountFormula formula = ModelCountFormula::Single;
  std::int64_t model_count = 1;
  std::int64_t parameters_per_model = 0;
  bool measured = false;  // counted from built networks rather than a cited constant

  std::int64_t total_parameters() const { return model_count * parameters_per_model; }
};

// Baseline rows carry their published per-model sizes (for m = 7); the three
// dual-generator rows are counted from networks built with `arch` (m is taken
// from the argument). Throws ConfigError for m < 2.
std::vector<CapacityEntry> capacity_report(std::int64_t m, const NetworkConfig& arch);

// Parameters of one dual-generator model: both generators plus the discriminator.
std::int64_t dual_generator_parameters(const NetworkConfig& arch, SharingMode mode);

std::string capacity_table_text(const std::vector<CapacityEntry>& rows, std::int64_t m);
std::string capacity_table_csv(const std::vector<CapacityEntry>& rows);

}  // namespace g2gan
