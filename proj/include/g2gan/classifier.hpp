#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "g2gan/dataset.hpp"

namespace g2gan {

struct ClassifierConfig {
  std::int64_t epochs = 8;
  std::int64_t batch_size = 32;
  double lr = 1e-3;
  std::int64_t width = 16;
  std::uint64_t seed = 0;
  // Training fails with EvalError below this holdout accuracy.
  double min_holdout_accuracy = 0.9;
};

// Four stride-2 conv blocks, global average pooling to a 64-d feature, linear head.
class EvalClassifierNetImpl : public torch::nn::Module {
 public:
  EvalClassifierNetImpl(std::int64_t m, std::int64_t width);

  torch::Tensor features(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

  static constexpr std::int64_t kFeatureDim = 64;

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(EvalClassifierNet);

struct ClassifierRecord {
  std::int64_t epochs = 0;
  double holdout_accuracy = 0.0;
};

// Domain classifier trained only on real images.
struct EvalClassifier {
  EvalClassifierNet net{nullptr};
  std::int64_t m = 0;
  ClassifierRecord record;
};

// Throws DatasetError when a training domain has fewer than 10 images,
// ConfigError when the splits disagree on m, EvalError when the holdout
// accuracy stays below cfg.min_holdout_accuracy.
EvalClassifier train_eval_classifier(const DomainDataset& train, const DomainDataset& holdout,
                                     const ClassifierConfig& cfg);

struct AccuracyReport {
  double top1 = 0.0;
  std::optional<double> top5;  // present when m > 5
  std::int64_t count = 0;
  std::vector<double> per_domain_top1;  // NaN for domains with no images
  std::vector<std::int64_t> per_domain_count;
};

// Fraction of `images` the classifier assigns to `labels`. Throws EvalError on an
// empty set, ConfigError when `m` differs from the classifier's.
AccuracyReport classification_accuracy(EvalClassifier& clf, const torch::Tensor& images, const torch::Tensor& labels,
                                       std::int64_t m);

// Image batch -> (N, d) features. Must be deterministic.
struct FeatureEmbedder {
  std::int64_t dim = 0;
  std::function<torch::Tensor(const torch::Tensor&)> embed;
};

// Penultimate classifier features (d = 64).
FeatureEmbedder classifier_embedder(EvalClassifier& clf);

// Runs `fn` over `images` in chunks without gradients and concatenates.
torch::Tensor batched_apply(const torch::Tensor& images, std::int64_t chunk,
                            const std::function<torch::Tensor(const torch::Tensor&)>& fn);

// All images of a dataset with their domain indices.
std::pair<torch::Tensor, torch::Tensor> flatten_dataset(const DomainDataset& dataset);

}  // namespace g2gan
