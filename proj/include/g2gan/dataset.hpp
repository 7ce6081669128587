#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2gan/labels.hpp"
#include "g2gan/rng.hpp"

namespace g2gan {

struct DomainImages {
  std::string name;
  torch::Tensor images;  // (N, 3, H, W) float32 in [-1, 1]
};

// Ground-truth correspondence for synthetic data: rows[i][d] is the index of
// base image i inside domain d. Each column is a permutation.
struct Pairing {
  std::vector<std::vector<std::int64_t>> rows;
};

// Immutable collection of m >= 2 image domains sharing one resolution.
class DomainDataset {
 public:
  // Throws DatasetError when the invariants do not hold.
  explicit DomainDataset(std::vector<DomainImages> domains, std::optional<Pairing> pairing = std::nullopt);

  std::int64_t domain_count() const { return static_cast<std::int64_t>(domains_.size()); }
  const std::string& name(std::int64_t domain) const { return domains_.at(domain).name; }
  const torch::Tensor& images(std::int64_t domain) const { return domains_.at(domain).images; }
  std::int64_t size(std::int64_t domain) const { return images(domain).size(0); }
  std::int64_t total_images() const;
  std::int64_t height() const { return domains_.front().images.size(2); }
  std::int64_t width() const { return domains_.front().images.size(3); }
  std::vector<std::string> names() const;
  const std::optional<Pairing>& pairing() const { return pairing_; }

  // Index of the domain called `name`, or -1.
  std::int64_t find_domain(const std::string& name) const;

 private:
  std::vector<DomainImages> domains_;
  std::optional<Pairing> pairing_;
};

struct SynthSpec {
  std::int64_t m = 4;
  std::int64_t images_per_domain = 100;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::uint64_t seed = 0;
};

// Seeded geometric scenes with a restricted base hue band; domain k is the base
// set hue-rotated by 2*pi*k/m. Pairing row i is (i, i, ..., i).
// Throws ConfigError on invalid spec fields.
DomainDataset synthesize_multidomain(const SynthSpec& spec);

// Hue offset applied to synthetic domain k.
double synthetic_hue_shift(std::int64_t domain, std::int64_t m);

// Reads `<root>/<domain>/*.{png,jpg,jpeg}` in lexicographic order, resized to
// size x size. Undecodable files are skipped with a warning on stderr.
// A `pairing.json` next to the domain folders is picked up when valid.
DomainDataset load_domain_folders(const std::filesystem::path& root, int size);

// Writes the folder layout (`<domain>/00000.png`, ...) plus pairing.json when
// the dataset carries a pairing. Throws IoError.
void export_dataset(const DomainDataset& dataset, const std::filesystem::path& root);

struct DatasetSplit {
  DomainDataset train;
  DomainDataset holdout;
};

// Deterministic train/holdout split. With a pairing, whole pairing rows are held
// out so that holdout images stay aligned across domains.
DatasetSplit split_holdout(const DomainDataset& dataset, double holdout_fraction, std::uint64_t seed);

struct UnpairedSample {
  torch::Tensor x;  // (1, 3, H, W)
  DomainLabel source;
  DomainLabel target;
};

// Uniform source domain and image, target uniform over the other m - 1 domains.
UnpairedSample sample_unpaired(const DomainDataset& dataset, Rng& rng);

// Uniform target domain != source.
std::int64_t sample_other_domain(std::int64_t source, std::int64_t m, Rng& rng);

}  // namespace g2gan
