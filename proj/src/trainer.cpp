#include "g2gan/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "g2gan/checkpoint.hpp"
#include "g2gan/error.hpp"
#include "g2gan/image.hpp"
#include "g2gan/losses.hpp"

namespace g2gan {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

Batch make_batch(const DomainDataset& dataset, const std::vector<std::pair<std::int64_t, std::int64_t>>& refs,
                 Rng& rng, bool flip_augment) {
  const auto m = dataset.domain_count();
  std::vector<torch::Tensor> xs;
  std::vector<torch::Tensor> ys;
  std::vector<std::int64_t> sources;
  std::vector<std::int64_t> targets;
  for (const auto& [domain, index] : refs) {
    const auto target = sample_other_domain(domain, m, rng);
    const auto real_index = rng.uniform_int(dataset.size(target));
    auto x = dataset.images(domain)[index];
    auto y = dataset.images(target)[real_index];
    if (flip_augment) {
      if (rng.bernoulli(0.5)) x = x.flip({2});
      if (rng.bernoulli(0.5)) y = y.flip({2});
    }
    xs.push_back(x);
    ys.push_back(y);
    sources.push_back(domain);
    targets.push_back(target);
  }
  return {torch::stack(xs), torch::tensor(sources, torch::kInt64), torch::tensor(targets, torch::kInt64),
          torch::stack(ys)};
}

std::map<std::string, double> StepMetrics::as_map() const {
  std::map<std::string, double> out{{"d_adv", d_adv}, {"d_cls", d_cls}, {"g_adv", g_adv}, {"g_cls", g_cls},
                                    {"cyc", cyc},     {"msssim", msssim}, {"idt", idt}};
  if (d2_adv) out["d2_adv"] = *d2_adv;
  if (d2_cls) out["d2_cls"] = *d2_cls;
  return out;
}

std::string metrics_csv_header(bool double_discriminator) {
  std::string header = "iteration,epoch,d_adv,d_cls,g_adv,g_cls,cyc,msssim,idt";
  if (double_discriminator) {
    header += ",d2_adv,d2_cls";
  }
  return header + ",lr";
}

std::string metrics_csv_row(const StepMetrics& metrics, const TrainState& state, double lr,
                            bool double_discriminator) {
  char buf[64];
  std::string row = std::to_string(state.iteration) + "," + std::to_string(state.epoch + 1);
  auto add = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.9g", v);
    row += buf;
  };
  for (double v : {metrics.d_adv, metrics.d_cls, metrics.g_adv, metrics.g_cls, metrics.cyc, metrics.msssim,
                   metrics.idt}) {
    add(v);
  }
  if (double_discriminator) {
    add(metrics.d2_adv.value_or(0.0));
    add(metrics.d2_cls.value_or(0.0));
  }
  add(lr);
  return row;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<torch::Tensor> difference(const std::vector<torch::Tensor>& all, const std::vector<torch::Tensor>& minus) {
  std::unordered_set<const void*> excluded;
  for (const auto& p : minus) {
    excluded.insert(p.unsafeGetTensorImpl());
  }
  std::vector<torch::Tensor> out;
  for (const auto& p : all) {
    if (!excluded.count(p.unsafeGetTensorImpl())) {
      out.push_back(p);
    }
  }
  return out;
}

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(cfg.lr0).betas({cfg.adam_beta1, cfg.adam_beta2}));
}

double scalar(const torch::Tensor& t) {
  return t.defined() ? t.detach().item<double>() : 0.0;
}

void save_optimizer(torch::serialize::OutputArchive& archive, const std::string& key,
                    const torch::optim::Optimizer& optimizer) {
  torch::serialize::OutputArchive sub;
  optimizer.save(sub);
  archive.write(key, sub);
}

void load_optimizer(torch::serialize::InputArchive& archive, const std::string& key, torch::optim::Optimizer& optimizer) {
  torch::serialize::InputArchive sub;
  if (!archive.try_read(key, sub)) {
    throw IoError("checkpoint lacks optimizer state " + key);
  }
  optimizer.load(sub);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::vector<std::string> domain_names)
    : cfg_(std::move(cfg)),
      domain_names_(std::move(domain_names)),
      rng_(cfg_.seed),
      buffer_(cfg_.buffer_capacity) {
  cfg_.network.m = static_cast<std::int64_t>(domain_names_.size());
  validate(cfg_);

  generators_ = build_generator_pair(cfg_.network);
  discriminator_ = build_discriminator(cfg_.network);
  if (cfg_.ablations.use_double_discriminator) {
    auto second = cfg_.network;
    if (cfg_.double_discriminator_pool) {
      second.resolution /= 2;
    }
    discriminator2_ = build_discriminator(second);
  }
  init_weights(generators_, rng_);
  init_weights(*discriminator_, rng_);
  if (discriminator2_) {
    init_weights(*discriminator2_, rng_);
  }

  const auto dtype = cfg_.dtype();
  generators_.to(dtype);
  discriminator_->to(dtype);
  if (discriminator2_) {
    discriminator2_->to(dtype);
  }

  disc_params_ = unique_parameters(*discriminator_);
  opt_d_ = make_adam(disc_params_, cfg_);
  if (discriminator2_) {
    auto second = unique_parameters(*discriminator2_);
    opt_d2_ = make_adam(second, cfg_);
    disc_params_.insert(disc_params_.end(), second.begin(), second.end());
  }
  const auto translator = generators_.translator_parameters();
  const auto reconstructor = generators_.reconstructor_parameters();
  opt_gt_ = make_adam(translator, cfg_);
  opt_gr_ = make_adam(reconstructor, cfg_);
  translator_only_ = difference(translator, reconstructor);
  reconstructor_only_ = difference(reconstructor, translator);
}

std::int64_t Trainer::parameter_count() const {
  auto params = generators_.translator_parameters();
  auto recon = generators_.reconstructor_parameters();
  params.insert(params.end(), recon.begin(), recon.end());
  params.insert(params.end(), disc_params_.begin(), disc_params_.end());
  return count_parameters(params);
}

void Trainer::set_learning_rate(double lr) {
  for (auto* opt : {opt_d_.get(), opt_d2_.get(), opt_gt_.get(), opt_gr_.get()}) {
    if (!opt) continue;
    for (auto& group : opt->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
  }
}

void Trainer::zero_all_grads() {
  for (auto* opt : {opt_d_.get(), opt_d2_.get(), opt_gt_.get(), opt_gr_.get()}) {
    if (opt) opt->zero_grad(/*set_to_none=*/true);
  }
}

void Trainer::probe(Phase phase, const PhaseTerms& terms) {
  if (probe_) {
    probe_(phase, terms);
  }
}

torch::Tensor Trainer::maybe_pool(const torch::Tensor& t, bool pooled) const {
  return pooled ? F::avg_pool2d(t, F::AvgPool2dFuncOptions(2).stride(2)) : t;
}

Trainer::DiscTerms Trainer::discriminator_terms(Discriminator& d, const torch::Tensor& real, const torch::Tensor& fake,
                                                const torch::Tensor& x, const torch::Tensor& source, bool pooled) {
  // One forward over [real | fake | source]; the discriminator has no batch coupling.
  const auto b = real.size(0);
  auto out = d->forward(maybe_pool(torch::cat({real, fake, x}, 0), pooled));
  DiscTerms terms;
  terms.adv = lsgan_discriminator_loss(out.patch.slice(0, 0, b), out.patch.slice(0, b, 2 * b));
  terms.cls = classification_loss(out.logits.slice(0, 2 * b, 3 * b), source);
  return terms;
}

Trainer::DiscTerms Trainer::generator_terms(Discriminator& d, const torch::Tensor& fake, const torch::Tensor& target,
                                            bool pooled) {
  auto out = d->forward(maybe_pool(fake, pooled));
  return {lsgan_generator_loss(out.patch), classification_loss(out.logits, target)};
}

StepMetrics Trainer::double_discriminator_step(const Batch& batch) {
  if (!discriminator2_) {
    throw ConfigError("double_discriminator_step needs use_double_discriminator = true");
  }
  return train_step(batch);
}

StepMetrics Trainer::train_step(const Batch& batch) {
  const auto dtype = cfg_.dtype();
  const auto res = cfg_.network.resolution;
  if (batch.x.dim() != 4 || batch.x.size(1) != 3 || batch.x.size(2) != res || batch.x.size(3) != res ||
      batch.y.sizes() != batch.x.sizes()) {
    throw ShapeError("batch images must be (B, 3, " + std::to_string(res) + ", " + std::to_string(res) + ")");
  }
  if (batch.source.numel() != batch.x.size(0) || batch.target.numel() != batch.x.size(0)) {
    throw ShapeError("batch needs one source and one target label per image");
  }
  check_label_indices(batch.source, domain_count());
  check_label_indices(batch.target, domain_count());

  const auto x = batch.x.to(dtype);
  const auto y = batch.y.to(dtype);
  const auto& w = cfg_.weights;
  const auto& ab = cfg_.ablations;
  const bool dual = static_cast<bool>(discriminator2_);
  const bool pool2 = cfg_.double_discriminator_pool;
  auto& translator = generators_.translator;
  auto& reconstructor = generators_.reconstructor;
  StepMetrics metrics;

  // (1) discriminator on real target-domain images vs buffered translations
  torch::Tensor fresh;
  {
    torch::NoGradGuard no_grad;
    fresh = translator->forward(x, batch.target);
  }
  const auto buffered = buffer_.query(fresh, rng_);
  zero_all_grads();
  {
    auto d1 = discriminator_terms(discriminator_, y, buffered, x, batch.source, false);
    PhaseTerms terms{{"d_adv", d1.adv}, {"d_cls", d1.cls}};
    auto loss = d1.adv + w.lambda1 * d1.cls;
    if (dual) {
      auto d2 = discriminator_terms(discriminator2_, y, buffered, x, batch.source, pool2);
      terms["d2_adv"] = d2.adv;
      terms["d2_cls"] = d2.cls;
      loss = 0.5 * (loss + d2.adv + w.lambda1 * d2.cls);
      metrics.d2_adv = scalar(d2.adv);
      metrics.d2_cls = scalar(d2.cls);
    }
    require_finite(loss.detach(), "discriminator loss");
    loss.backward();
    probe(Phase::Discriminator, terms);
    opt_d_->step();
    if (dual) {
      opt_d2_->step();
    }
    metrics.d_adv = scalar(d1.adv);
    metrics.d_cls = scalar(d1.cls);
  }

  // (2) translator, gradients routed through a frozen reconstructor
  zero_all_grads();
  set_requires_grad(disc_params_, false);
  set_requires_grad(reconstructor_only_, false);
  torch::Tensor fake;
  try {
    fake = translator->forward(x, batch.target);
    auto g1 = generator_terms(discriminator_, fake, batch.target, false);
    ObjectiveTerms terms;
    terms.lsgan_g = g1.adv;
    terms.cls_fake = g1.cls;
    if (dual) {
      auto g2 = generator_terms(discriminator2_, fake, batch.target, pool2);
      terms.lsgan_g = 0.5 * (g1.adv + g2.adv);
      terms.cls_fake = 0.5 * (g1.cls + g2.cls);
    }
    if (ab.use_colorcycle || ab.use_msssim) {
      auto rec = reconstructor->forward(fake, batch.source);
      if (ab.use_colorcycle) terms.colorcyc = color_cycle(rec, x);
      if (ab.use_msssim) terms.msssim = ms_ssim_loss(rec, x, cfg_.ssim);
    }
    if (cfg_.symmetric_identity && ab.use_identity) {
      terms.identity = cycle_l1(translator->forward(x, batch.source), x);
    }
    auto loss = full_objective(terms, w);
    loss.backward();
    PhaseTerms probe_terms{{"g_adv", terms.lsgan_g}, {"g_cls", terms.cls_fake}};
    if (terms.colorcyc.defined()) probe_terms["cyc"] = terms.colorcyc;
    if (terms.msssim.defined()) probe_terms["msssim"] = terms.msssim;
    if (terms.identity.defined()) probe_terms["idt_t"] = terms.identity;
    probe(Phase::Translator, probe_terms);
    opt_gt_->step();
    metrics.g_adv = scalar(terms.lsgan_g);
    metrics.g_cls = scalar(terms.cls_fake);
    metrics.cyc = scalar(terms.colorcyc);
    metrics.msssim = scalar(terms.msssim);
  } catch (...) {
    set_requires_grad(disc_params_, true);
    set_requires_grad(reconstructor_only_, true);
    throw;
  }
  set_requires_grad(disc_params_, true);
  set_requires_grad(reconstructor_only_, true);

  // (3) reconstructor on the detached translation plus the identity term
  zero_all_grads();
  const bool cyc_on = ab.use_colorcycle && w.lambda2 > 0.0;
  const bool ms_on = ab.use_msssim && w.lambda3 > 0.0;
  const bool idt_on = ab.use_identity && w.lambda4 > 0.0;
  if (cyc_on || ms_on || idt_on) {
    const auto translated = fake.detach();
    ObjectiveTerms terms;
    if (cyc_on || ms_on) {
      auto rec = reconstructor->forward(translated, batch.source);
      if (cyc_on) terms.colorcyc = color_cycle(rec, x);
      if (ms_on) terms.msssim = ms_ssim_loss(rec, x, cfg_.ssim);
    }
    if (idt_on) {
      terms.identity = identity_loss(reconstructor, x, batch.source);
    }
    auto loss = full_objective(terms, w);
    loss.backward();
    PhaseTerms probe_terms;
    if (terms.colorcyc.defined()) probe_terms["cyc"] = terms.colorcyc;
    if (terms.msssim.defined()) probe_terms["msssim"] = terms.msssim;
    if (terms.identity.defined()) probe_terms["idt"] = terms.identity;
    probe(Phase::Reconstructor, probe_terms);
    opt_gr_->step();
    metrics.idt = scalar(terms.identity);
  }
  if (ab.use_identity && !idt_on) {
    torch::NoGradGuard no_grad;
    metrics.idt = scalar(cycle_l1(reconstructor->forward(x, batch.source), x));
  }
  return metrics;
}

torch::Tensor Trainer::translate(const torch::Tensor& x, const torch::Tensor& labels) {
  torch::NoGradGuard no_grad;
  return g2gan::translate(generators_.translator, x.to(cfg_.dtype()), labels).to(torch::kFloat32);
}

// ---------------------------------------------------------------------------

void Trainer::write_samples(const DomainDataset& dataset, const fs::path& path) {
  torch::NoGradGuard no_grad;
  const auto m = dataset.domain_count();
  std::vector<torch::Tensor> tiles;
  for (std::int64_t source = 0; source < m; ++source) {
    auto x = dataset.images(source)[0].unsqueeze(0);
    tiles.push_back(x[0]);
    for (std::int64_t target = 0; target < m; ++target) {
      tiles.push_back(translate(x, torch::full({1}, target, torch::kInt64))[0]);
    }
  }
  write_png(path, make_grid(tiles, static_cast<int>(m + 1)));
}

void Trainer::write_dump(const fs::path& path, const std::string& message, const Batch& batch) const {
  nlohmann::json doc;
  doc["error"] = message;
  doc["iteration"] = state_.iteration;
  doc["epoch"] = state_.epoch + 1;
  doc["running_metrics"] = state_.running;
  std::vector<std::int64_t> sources(batch.source.data_ptr<std::int64_t>(),
                                    batch.source.data_ptr<std::int64_t>() + batch.source.numel());
  std::vector<std::int64_t> targets(batch.target.data_ptr<std::int64_t>(),
                                    batch.target.data_ptr<std::int64_t>() + batch.target.numel());
  doc["batch_source"] = sources;
  doc["batch_target"] = targets;
  doc["config"] = to_config_text(cfg_);
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
}

const TrainState& Trainer::fit(const DomainDataset& dataset, const FitCallbacks& callbacks,
                               const std::optional<fs::path>& out_dir) {
  if (dataset.domain_count() != domain_count()) {
    throw ConfigError("dataset has " + std::to_string(dataset.domain_count()) + " domains, trainer expects " +
                      std::to_string(domain_count()));
  }
  if (dataset.height() != cfg_.network.resolution || dataset.width() != cfg_.network.resolution) {
    throw ConfigError("dataset images are " + std::to_string(dataset.height()) + "x" +
                      std::to_string(dataset.width()) + ", config expects " +
                      std::to_string(cfg_.network.resolution));
  }

  const bool dual = static_cast<bool>(discriminator2_);
  std::ofstream csv;
  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    if (ec) {
      throw IoError("cannot create output directory " + out_dir->string());
    }
    const auto csv_path = *out_dir / "metrics.csv";
    const bool fresh_file = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
    csv.open(csv_path, std::ios::app);
    if (!csv) {
      throw IoError("cannot open " + csv_path.string());
    }
    if (fresh_file) {
      csv << metrics_csv_header(dual) << "\n";
    }
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> refs;
  for (std::int64_t d = 0; d < dataset.domain_count(); ++d) {
    for (std::int64_t i = 0; i < dataset.size(d); ++i) {
      refs.emplace_back(d, i);
    }
  }
  const auto limit = cfg_.max_iterations;
  auto exhausted = [&] { return limit > 0 && state_.iteration >= limit; };

  for (std::int64_t epoch = state_.epoch + 1; epoch <= cfg_.epochs_total && !exhausted(); ++epoch) {
    const double lr = lr_at_epoch(cfg_, epoch);
    set_learning_rate(lr);
    auto order = refs;
    rng_.shuffle(order.begin(), order.end());

    bool complete = true;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
      if (exhausted()) {
        complete = false;
        break;
      }
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
      const std::vector<std::pair<std::int64_t, std::int64_t>> chunk(order.begin() + start, order.begin() + stop);
      const auto batch = make_batch(dataset, chunk, rng_, cfg_.flip_augment);

      StepMetrics metrics;
      try {
        metrics = train_step(batch);
      } catch (const NumericsError& e) {
        std::string dump;
        if (out_dir) {
          dump = (*out_dir / ("nan_dump_iter" + std::to_string(state_.iteration + 1) + ".json")).string();
          write_dump(dump, e.what(), batch);
        }
        throw NumericsError(std::string(e.what()) + " at iteration " + std::to_string(state_.iteration + 1), dump);
      }
      ++state_.iteration;
      for (const auto& [key, value] : metrics.as_map()) {
        auto it = state_.running.find(key);
        if (it == state_.running.end()) {
          state_.running[key] = value;
        } else {
          it->second = 0.98 * it->second + 0.02 * value;
        }
      }
      if (csv.is_open() && state_.iteration % cfg_.log_every == 0) {
        csv << metrics_csv_row(metrics, state_, lr, dual) << "\n";
      }
      if (callbacks.on_step) {
        callbacks.on_step(metrics, state_);
      }
    }
    if (!complete) {
      break;
    }
    state_.epoch = epoch;
    if (out_dir) {
      csv.flush();
      if (epoch % cfg_.checkpoint_every == 0 || epoch == cfg_.epochs_total) {
        save_checkpoint(*out_dir / ("ckpt_epoch" + std::to_string(epoch) + ".archive"));
      }
      if (epoch % cfg_.sample_every == 0 || epoch == cfg_.epochs_total) {
        write_samples(dataset, *out_dir / ("samples_epoch" + std::to_string(epoch) + ".png"));
      }
    }
    if (callbacks.on_epoch_end) {
      callbacks.on_epoch_end(state_);
    }
  }
  if (out_dir) {
    csv.flush();
    save_checkpoint(*out_dir / "ckpt_last.archive");
  }
  return state_;
}

// ---------------------------------------------------------------------------

void Trainer::save_checkpoint(const fs::path& path) const {
  torch::serialize::OutputArchive archive;
  CheckpointMeta meta;
  meta.config_text = to_config_text(cfg_);
  meta.epoch = state_.epoch;
  meta.iteration = state_.iteration;
  meta.rng_state = rng_.engine_state();
  meta.sharing_mode = cfg_.network.mode;
  meta.domain_names = domain_names_;
  write_meta(archive, meta);

  write_generator_params(archive, generators_);
  write_module_params(archive, "discriminator", *discriminator_);
  if (discriminator2_) {
    write_module_params(archive, "discriminator2", *discriminator2_);
  }
  archive.write("rng/torch", rng_.torch_state());

  save_optimizer(archive, "optim/d", *opt_d_);
  save_optimizer(archive, "optim/gt", *opt_gt_);
  save_optimizer(archive, "optim/gr", *opt_gr_);
  if (opt_d2_) {
    save_optimizer(archive, "optim/d2", *opt_d2_);
  }

  archive.write("buffer/size", torch::tensor(buffer_.size(), torch::kInt64));
  for (std::size_t i = 0; i < buffer_.pool().size(); ++i) {
    archive.write("buffer/" + std::to_string(i), buffer_.pool()[i]);
  }
  archive.write("state/running", c10::IValue(nlohmann::json(state_.running).dump()));
  save_archive(archive, path);
}

Trainer Trainer::from_checkpoint(const fs::path& path) {
  auto archive = load_archive(path);
  const auto meta = read_meta(archive);
  Trainer trainer(train_config_from_text(meta.config_text), meta.domain_names);

  read_generator_params(archive, trainer.generators_);
  read_module_params(archive, "discriminator", *trainer.discriminator_);
  if (trainer.discriminator2_) {
    read_module_params(archive, "discriminator2", *trainer.discriminator2_);
  }

  torch::Tensor torch_state;
  if (!archive.try_read("rng/torch", torch_state)) {
    throw IoError("checkpoint lacks the torch generator state");
  }
  trainer.rng_.set_torch_state(torch_state);
  trainer.rng_.set_engine_state(meta.rng_state);

  load_optimizer(archive, "optim/d", *trainer.opt_d_);
  load_optimizer(archive, "optim/gt", *trainer.opt_gt_);
  load_optimizer(archive, "optim/gr", *trainer.opt_gr_);
  if (trainer.opt_d2_) {
    load_optimizer(archive, "optim/d2", *trainer.opt_d2_);
  }

  torch::Tensor size;
  if (!archive.try_read("buffer/size", size)) {
    throw IoError("checkpoint lacks the image buffer");
  }
  std::vector<torch::Tensor> pool;
  for (std::int64_t i = 0; i < size.item<std::int64_t>(); ++i) {
    torch::Tensor image;
    if (!archive.try_read("buffer/" + std::to_string(i), image)) {
      throw IoError("checkpoint image buffer is truncated");
    }
    pool.push_back(image);
  }
  trainer.buffer_.restore(std::move(pool));

  c10::IValue running;
  if (archive.try_read("state/running", running) && running.isString()) {
    trainer.state_.running = nlohmann::json::parse(running.toStringRef()).get<std::map<std::string, double>>();
  }
  trainer.state_.epoch = meta.epoch;
  trainer.state_.iteration = meta.iteration;
  return trainer;
}

Trainer fit(const TrainConfig& cfg, const DomainDataset& dataset, const FitCallbacks& callbacks,
            const std::optional<fs::path>& out_dir) {
  Trainer trainer(cfg, dataset.names());
  trainer.fit(dataset, callbacks, out_dir);
  return trainer;
}

}  // namespace g2gan
