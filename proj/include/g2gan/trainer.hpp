#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "g2gan/dataset.hpp"
#include "g2gan/image_buffer.hpp"
#include "g2gan/networks.hpp"
#include "g2gan/rng.hpp"
#include "g2gan/train_config.hpp"

namespace g2gan {

// One optimization batch. `y` holds real images drawn from the target domains
// and feeds the discriminator's real term.
struct Batch {
  torch::Tensor x;       // (B, 3, H, W)
  torch::Tensor source;  // (B) int64
  torch::Tensor target;  // (B) int64, != source
  torch::Tensor y;       // (B, 3, H, W)
};

// Draws x from (domain, index) references, a target domain per image and a
// matching real image from that domain.
Batch make_batch(const DomainDataset& dataset, const std::vector<std::pair<std::int64_t, std::int64_t>>& refs,
                 Rng& rng, bool flip_augment = false);

struct StepMetrics {
  double d_adv = 0.0;
  double d_cls = 0.0;
  double g_adv = 0.0;
  double g_cls = 0.0;
  double cyc = 0.0;
  double msssim = 0.0;
  double idt = 0.0;
  std::optional<double> d2_adv;
  std::optional<double> d2_cls;

  std::map<std::string, double> as_map() const;
};

enum class Phase { Discriminator, Translator, Reconstructor };

// Named loss terms of one phase, before weighting.
using PhaseTerms = std::map<std::string, torch::Tensor>;

// Called after each phase's backward pass and before its optimizer step.
using PhaseProbe = std::function<void(Phase, const PhaseTerms&)>;

struct TrainState {
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t iteration = 0;
  std::map<std::string, double> running;  // exponential moving averages of the metrics
};

struct FitCallbacks {
  std::function<void(const StepMetrics&, const TrainState&)> on_step;
  std::function<void(const TrainState&)> on_epoch_end;
};

// Owns the dual generators, discriminator(s), optimizers, image buffer and run
// RNG. Single-threaded: nothing here may be touched while a step runs.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<std::string> domain_names);

  // Restores everything a checkpoint holds; the config comes from its metadata.
  static Trainer from_checkpoint(const std::filesystem::path& path);

  // Discriminator step on buffered fakes, then the translator step through a
  // frozen reconstructor, then the reconstructor step on the detached
  // translation. Throws NumericsError on a non-finite loss.
  StepMetrics train_step(const Batch& batch);

  // train_step with the second discriminator; throws ConfigError unless the
  // config enables it.
  StepMetrics double_discriminator_step(const Batch& batch);

  // Runs the remaining epochs of the config over shuffled training images.
  // With `out_dir`, appends metrics.csv and writes checkpoints and sample grids.
  const TrainState& fit(const DomainDataset& dataset, const FitCallbacks& callbacks = {},
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

  void save_checkpoint(const std::filesystem::path& path) const;

  void set_learning_rate(double lr);
  void set_probe(PhaseProbe probe) { probe_ = std::move(probe); }

  const TrainConfig& config() const { return cfg_; }
  const TrainState& state() const { return state_; }
  const std::vector<std::string>& domain_names() const { return domain_names_; }
  std::int64_t domain_count() const { return static_cast<std::int64_t>(domain_names_.size()); }
  GeneratorPair& generators() { return generators_; }
  Discriminator& discriminator() { return discriminator_; }
  // Null unless the double-discriminator switch is on.
  Discriminator& second_discriminator() { return discriminator2_; }
  ImageBuffer& buffer() { return buffer_; }
  Rng& rng() { return rng_; }

  // Distinct parameters across every network the trainer owns.
  std::int64_t parameter_count() const;

  // Translator output for `labels` without gradient tracking, in float32.
  torch::Tensor translate(const torch::Tensor& x, const torch::Tensor& labels);

 private:
  struct DiscTerms {
    torch::Tensor adv;
    torch::Tensor cls;
  };

  DiscTerms discriminator_terms(Discriminator& d, const torch::Tensor& real, const torch::Tensor& fake,
                                const torch::Tensor& x, const torch::Tensor& source, bool pooled);
  DiscTerms generator_terms(Discriminator& d, const torch::Tensor& fake, const torch::Tensor& target, bool pooled);
  torch::Tensor maybe_pool(const torch::Tensor& t, bool pooled) const;
  void zero_all_grads();
  void probe(Phase phase, const PhaseTerms& terms);
  void write_samples(const DomainDataset& dataset, const std::filesystem::path& path);
  void write_dump(const std::filesystem::path& path, const std::string& message, const Batch& batch) const;

  TrainConfig cfg_;
  std::vector<std::string> domain_names_;
  Rng rng_;
  GeneratorPair generators_;
  Discriminator discriminator_{nullptr};
  Discriminator discriminator2_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::unique_ptr<torch::optim::Adam> opt_d2_;
  std::unique_ptr<torch::optim::Adam> opt_gt_;
  std::unique_ptr<torch::optim::Adam> opt_gr_;
  std::vector<torch::Tensor> disc_params_;
  std::vector<torch::Tensor> translator_only_;
  std::vector<torch::Tensor> reconstructor_only_;
  ImageBuffer buffer_;
  TrainState state_;
  PhaseProbe probe_;
};

// Builds a trainer for `dataset` and runs fit.
Trainer fit(const TrainConfig& cfg, const DomainDataset& dataset, const FitCallbacks& callbacks = {},
            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Header and row formatting of the metrics CSV.
std::string metrics_csv_header(bool double_discriminator);
std::string metrics_csv_row(const StepMetrics& metrics, const TrainState& state, double lr,
                            bool double_discriminator);

}  // namespace g2gan
