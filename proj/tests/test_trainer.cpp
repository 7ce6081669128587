#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "g2gan/error.hpp"
#include "g2gan/trainer.hpp"

namespace fs = std::filesystem;
using namespace g2gan;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.network.resolution = 16;
  cfg.network.width_base = 4;
  cfg.network.residual_blocks = 1;
  cfg.network.disc_width = 4;
  cfg.network.disc_depth = 2;
  cfg.ssim = SsimParams::for_resolution(16);
  cfg.epochs_total = 2;
  cfg.epochs_constant_lr = 1;
  cfg.buffer_capacity = 4;
  cfg.seed = 3;
  return cfg;
}

DomainDataset tiny_dataset(std::int64_t m = 3, std::int64_t n = 4) {
  SynthSpec spec;
  spec.m = m;
  spec.images_per_domain = n;
  spec.height = spec.width = 16;
  spec.seed = 1;
  return synthesize_multidomain(spec);
}

Batch fixed_batch(const DomainDataset& ds, std::uint64_t seed) {
  Rng rng(seed);
  return make_batch(ds, {{0, 1}, {2, 3}}, rng);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("g2gan_test_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

bool unchanged(const std::vector<torch::Tensor>& before, const std::vector<torch::Tensor>& after) {
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!torch::equal(before[i], after[i].detach())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("batches draw targets from other domains and real images from the target") {
  const auto ds = tiny_dataset();
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto b = make_batch(ds, {{0, 0}, {1, 2}, {2, 3}}, rng);
    CHECK(b.x.sizes() == torch::IntArrayRef({3, 3, 16, 16}));
    CHECK(b.y.sizes() == b.x.sizes());
    CHECK((b.source != b.target).all().item<bool>());
    CHECK(torch::equal(b.x[1], ds.images(1)[2]));
    for (std::int64_t k = 0; k < 3; ++k) {
      const auto t = b.target[k].item<std::int64_t>();
      const auto matches = (ds.images(t) - b.y[k].unsqueeze(0)).abs().flatten(1).amax(1).eq(0);
      CHECK(matches.any().item<bool>());
    }
  }
}

TEST_CASE("one step updates every network and reports finite metrics") {
  const auto ds = tiny_dataset();
  Trainer trainer(tiny_config(), ds.names());
  const auto gt = snapshot(trainer.generators().translator_parameters());
  const auto gr = snapshot(trainer.generators().reconstructor_parameters());
  const auto d = snapshot(unique_parameters(*trainer.discriminator()));
  const auto metrics = trainer.train_step(fixed_batch(ds, 1));
  for (const auto& [key, value] : metrics.as_map()) {
    CHECK_MESSAGE(std::isfinite(value), key);
  }
  CHECK(metrics.d2_adv.has_value());
  CHECK_FALSE(unchanged(gt, trainer.generators().translator_parameters()));
  CHECK_FALSE(unchanged(gr, trainer.generators().reconstructor_parameters()));
  CHECK_FALSE(unchanged(d, unique_parameters(*trainer.discriminator())));
  CHECK(trainer.buffer().size() == 2);
}

TEST_CASE("fixed-seed replay is bitwise identical at 64-bit") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.precision = Precision::Float64;
  auto run = [&] {
    Trainer trainer(cfg, ds.names());
    std::vector<double> trace;
    Rng data_rng(5);
    for (int i = 0; i < 4; ++i) {
      const auto m = trainer.train_step(make_batch(ds, {{i % 3, i % 4}}, data_rng));
      for (const auto& [_, v] : m.as_map()) trace.push_back(v);
    }
    trace.push_back(trainer.generators().translator_parameters().front().sum().item<double>());
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("resuming from an epoch checkpoint reproduces the uninterrupted run") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.checkpoint_every = 1;
  std::vector<std::map<std::string, double>> full, resumed;
  FitCallbacks record_full, record_resumed;
  record_full.on_step = [&](const StepMetrics& m, const TrainState&) { full.push_back(m.as_map()); };
  record_resumed.on_step = [&](const StepMetrics& m, const TrainState&) { resumed.push_back(m.as_map()); };

  const auto dir = scratch("resume");
  fit(cfg, ds, record_full, dir);
  REQUIRE(fs::exists(dir / "ckpt_epoch1.archive"));
  REQUIRE(fs::exists(dir / "ckpt_last.archive"));
  CHECK(fs::exists(dir / "samples_epoch2.png"));

  auto trainer = Trainer::from_checkpoint(dir / "ckpt_epoch1.archive");
  CHECK(trainer.state().epoch == 1);
  CHECK(trainer.state().iteration == 12);
  trainer.fit(ds, record_resumed);
  REQUIRE(full.size() == 24);
  REQUIRE(resumed.size() == 12);
  for (std::size_t i = 0; i < resumed.size(); ++i) {
    for (const auto& [key, value] : resumed[i]) {
      CHECK(value == doctest::Approx(full[12 + i].at(key)).epsilon(1e-6));
    }
  }

  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == metrics_csv_header(true));
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 24);
  fs::remove_all(dir);
}

TEST_CASE("max_iterations stops mid-epoch") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.max_iterations = 5;
  Trainer trainer(cfg, ds.names());
  const auto& state = trainer.fit(ds);
  CHECK(state.iteration == 5);
  CHECK(state.epoch == 0);
}

TEST_CASE("without the identity switch the reconstructor sees no identity gradient") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.network.mode = SharingMode::None;
  cfg.weights.lambda2 = 0;
  cfg.weights.lambda3 = 0;

  auto run = [&](bool identity) {
    cfg.ablations.use_identity = identity;
    Trainer trainer(cfg, ds.names());
    bool saw_idt = false;
    double grad_norm = 0;
    trainer.set_probe([&](Phase phase, const PhaseTerms& terms) {
      if (phase != Phase::Reconstructor) return;
      saw_idt = terms.count("idt") > 0;
      for (const auto& p : trainer.generators().reconstructor_parameters()) {
        if (p.grad().defined()) grad_norm += p.grad().abs().sum().item<double>();
      }
    });
    const auto before = snapshot(trainer.generators().reconstructor_parameters());
    trainer.train_step(fixed_batch(ds, 2));
    return std::tuple{saw_idt, grad_norm, unchanged(before, trainer.generators().reconstructor_parameters())};
  };
  const auto [idt_on, norm_on, frozen_on] = run(true);
  CHECK(idt_on);
  CHECK(norm_on > 0);
  CHECK_FALSE(frozen_on);
  const auto [idt_off, norm_off, frozen_off] = run(false);
  CHECK_FALSE(idt_off);
  CHECK(norm_off == 0);
  CHECK(frozen_off);
}

TEST_CASE("translator step leaves the discriminator and reconstructor untouched") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.network.mode = SharingMode::None;
  Trainer trainer(cfg, ds.names());
  bool checked = false;
  trainer.set_probe([&](Phase phase, const PhaseTerms& terms) {
    if (phase != Phase::Translator) return;
    checked = true;
    CHECK(terms.count("cyc") == 1);
    CHECK(terms.count("msssim") == 1);
    for (const auto& p : unique_parameters(*trainer.discriminator())) CHECK_FALSE(p.grad().defined());
    for (const auto& p : trainer.generators().reconstructor_parameters()) CHECK_FALSE(p.grad().defined());
    bool any = false;
    for (const auto& p : trainer.generators().translator_parameters()) any |= p.grad().defined();
    CHECK(any);
  });
  trainer.train_step(fixed_batch(ds, 3));
  CHECK(checked);
}

TEST_CASE("dropping the second discriminator removes its parameters") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  Trainer both(cfg, ds.names());
  cfg.ablations.use_double_discriminator = false;
  Trainer single(cfg, ds.names());
  CHECK_FALSE(single.second_discriminator());
  REQUIRE(both.second_discriminator());
  CHECK(both.parameter_count() - single.parameter_count() == count_parameters(*both.second_discriminator()));
  const auto m = single.train_step(fixed_batch(ds, 4));
  CHECK_FALSE(m.d2_adv.has_value());
  CHECK_THROWS_AS(single.double_discriminator_step(fixed_batch(ds, 4)), ConfigError);
}

TEST_CASE("an unpooled copy of the first discriminator gives the same terms") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.double_discriminator_pool = false;
  cfg.precision = Precision::Float64;
  Trainer trainer(cfg, ds.names());
  {
    torch::NoGradGuard guard;
    const auto src = trainer.discriminator()->parameters();
    const auto dst = trainer.second_discriminator()->parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
  }
  const auto m = trainer.double_discriminator_step(fixed_batch(ds, 6));
  CHECK(*m.d2_adv == doctest::Approx(m.d_adv).epsilon(1e-12));
  CHECK(*m.d2_cls == doctest::Approx(m.d_cls).epsilon(1e-12));
}

TEST_CASE("a diverging run stops with a numerics error and a dump file") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.lr0 = 1e30;
  const auto dir = scratch("nan");
  try {
    fit(cfg, ds, {}, dir);
    FAIL("expected a numerics error");
  } catch (const NumericsError& e) {
    CHECK_FALSE(e.dump_path().empty());
    CHECK(fs::exists(e.dump_path()));
  }
  fs::remove_all(dir);
}

TEST_CASE("trainer rejects mismatched data") {
  const auto ds = tiny_dataset();
  Trainer trainer(tiny_config(), ds.names());
  CHECK_THROWS_AS(trainer.fit(tiny_dataset(4)), ConfigError);
  auto batch = fixed_batch(ds, 7);
  batch.target = batch.source.clone().fill_(5);
  CHECK_THROWS_AS(trainer.train_step(batch), LabelError);
  batch = fixed_batch(ds, 7);
  batch.x = torch::zeros({2, 3, 8, 8});
  CHECK_THROWS_AS(trainer.train_step(batch), ShapeError);
}
