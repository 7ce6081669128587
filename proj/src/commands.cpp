#include "g2gan/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "g2gan/capacity.hpp"
#include "g2gan/checkpoint.hpp"
#include "g2gan/classifier.hpp"
#include "g2gan/dataset.hpp"
#include "g2gan/error.hpp"
#include "g2gan/fid.hpp"
#include "g2gan/image.hpp"
#include "g2gan/run_config.hpp"
#include "g2gan/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace g2gan {

namespace {

// Parses `args` with `app`. Returns an exit code when the command should stop
// (help or a flag error), nullopt to carry on.
std::optional<int> parse_flags(CLI::App& app, const std::vector<std::string>& args, std::ostream& out,
                               std::ostream& err) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  return std::nullopt;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const NumericsError& e) {
    err << "numerics error: " << e.what() << "\n";
    if (!e.dump_path().empty()) {
      err << "dump: " << e.dump_path() << "\n";
    }
    return kExitNumerics;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const LabelError& e) {
    err << "label error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) {
    throw IoError("cannot write " + path.string());
  }
}

std::optional<std::string> env_seed() {
  if (const char* value = std::getenv("G2GAN_SEED")) {
    return std::string(value);
  }
  return std::nullopt;
}

// Resolves "name" or "index" against the checkpoint's domains.
std::int64_t resolve_domain(const std::string& text, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == text) {
      return static_cast<std::int64_t>(i);
    }
  }
  try {
    std::size_t used = 0;
    const long long index = std::stoll(text, &used);
    if (used == text.size() && index >= 0 && index < static_cast<long long>(names.size())) {
      return index;
    }
  } catch (const std::exception&) {
  }
  throw LabelError("unknown domain '" + text + "'");
}

void require_checkpoint(const std::string& path) {
  if (path.empty() || !fs::is_regular_file(path)) {
    throw ConfigError("checkpoint not found: " + path);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Write a seeded synthetic multi-domain dataset", "g2gan synth"};
  SynthSpec spec;
  std::int64_t size = 64;
  std::string out_dir;
  app.add_option("--domains", spec.m, "number of domains (>= 2)")->required();
  app.add_option("--count", spec.images_per_domain, "images per domain")->required();
  app.add_option("--size", size, "image side length")->capture_default_str();
  app.add_option("--seed", spec.seed, "generator seed")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->required();
  if (auto code = parse_flags(app, args, out, err)) {
    return *code;
  }
  return guarded(err, [&] {
    spec.height = size;
    spec.width = size;
    if (spec.m < 2) {
      throw ConfigError("--domains must be at least 2");
    }
    const auto dataset = synthesize_multidomain(spec);
    export_dataset(dataset, out_dir);
    out << "wrote " << dataset.total_images() << " images in " << dataset.domain_count() << " domains to "
        << out_dir << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train the dual generators on a folder dataset", "g2gan train"};
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> flags;
  std::string data, out_dir, sharing;
  std::int64_t epochs = 0, size = 0, iterations = -1;
  std::optional<std::uint64_t> seed;
  bool no_msssim = false, no_colorcycle = false, no_identity = false, no_double = false;
  std::vector<std::string> sets;

  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--data", data, "dataset root with one folder per domain");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--sharing", sharing, "encoder/decoder sharing")->check(CLI::IsMember({"full", "partial", "none"}));
  app.add_option("--epochs", epochs, "total epochs (the second half decays the learning rate)")
      ->check(CLI::PositiveNumber);
  app.add_option("--size", size, "image side length")->check(CLI::PositiveNumber);
  app.add_option("--iterations", iterations, "stop after this many iterations (0 = all epochs)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "run seed (overrides G2GAN_SEED and the config)");
  app.add_flag("--no-msssim", no_msssim, "drop the MS-SSIM reconstruction term");
  app.add_flag("--no-colorcycle", no_colorcycle, "drop the color cycle term");
  app.add_flag("--no-identity", no_identity, "drop the identity term");
  app.add_flag("--no-double-disc", no_double, "train a single discriminator");
  app.add_option("--set", sets, "extra config override key=value (repeatable)");
  if (auto code = parse_flags(app, args, out, err)) {
    return *code;
  }
  return guarded(err, [&] {
    for (const auto& item : sets) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key=value, got '" + item + "'");
      }
      flags.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!data.empty()) flags.emplace_back("data", data);
    if (!out_dir.empty()) flags.emplace_back("out", out_dir);
    if (!sharing.empty()) flags.emplace_back("sharing_mode", sharing);
    if (epochs > 0) flags.emplace_back("epochs_total", std::to_string(epochs));
    if (size > 0) flags.emplace_back("image_size", std::to_string(size));
    if (iterations >= 0) flags.emplace_back("max_iterations", std::to_string(iterations));
    if (seed) flags.emplace_back("seed", std::to_string(*seed));
    if (no_msssim) flags.emplace_back("use_msssim", "false");
    if (no_colorcycle) flags.emplace_back("use_colorcycle", "false");
    if (no_identity) flags.emplace_back("use_identity", "false");
    if (no_double) flags.emplace_back("use_double_discriminator", "false");

    const std::string file_text = config_path.empty() ? std::string() : read_text(config_path);
    const auto cfg = run_config_from_entries(merge_config_layers(file_text, env_seed(), flags));
    if (cfg.data.empty()) {
      throw ConfigError("no dataset given (--data or the data key)");
    }

    const auto dataset = load_domain_folders(cfg.data, static_cast<int>(cfg.train.network.resolution));
    const auto split = split_holdout(dataset, cfg.holdout_fraction, cfg.split_seed);
    fs::create_directories(cfg.out);
    write_text(fs::path(cfg.out) / "run.cfg", emit_run_config(cfg));

    out << "training on " << split.train.total_images() << " images, " << dataset.domain_count() << " domains, "
        << cfg.train.network.resolution << "px, sharing " << to_string(cfg.train.network.mode) << "\n";
    FitCallbacks callbacks;
    callbacks.on_epoch_end = [&out](const TrainState& state) {
      out << "epoch " << state.epoch << " iteration " << state.iteration;
      for (const auto& [key, value] : state.running) {
        out << " " << key << "=" << std::setprecision(4) << value;
      }
      out << std::endl;
    };
    auto trainer = fit(cfg.train, split.train, callbacks, fs::path(cfg.out));
    out << "done: " << trainer.state().iteration << " iterations, checkpoint "
        << (fs::path(cfg.out) / "ckpt_last.archive").string() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_translate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Translate images with a trained checkpoint", "g2gan translate"};
  std::string checkpoint, target, out_dir = ".";
  std::vector<std::string> inputs;
  bool all_domains = false;
  app.add_option("--checkpoint", checkpoint, "checkpoint archive")->required();
  app.add_option("--input", inputs, "input image(s)")->required();
  auto* target_opt = app.add_option("--target-domain", target, "target domain name or index");
  auto* all_opt = app.add_flag("--all-domains", all_domains, "write one output per domain");
  target_opt->excludes(all_opt);
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  if (auto code = parse_flags(app, args, out, err)) {
    return *code;
  }
  if (target.empty() && !all_domains) {
    err << "error: one of --target-domain or --all-domains is required\n" << app.help();
    return kExitUsage;
  }
  return guarded(err, [&] {
    require_checkpoint(checkpoint);
    auto trainer = Trainer::from_checkpoint(checkpoint);
    const auto& names = trainer.domain_names();
    std::vector<std::int64_t> targets;
    if (all_domains) {
      for (std::int64_t t = 0; t < trainer.domain_count(); ++t) {
        targets.push_back(t);
      }
    } else {
      targets.push_back(resolve_domain(target, names));
    }
    const int size = static_cast<int>(trainer.config().network.resolution);
    fs::create_directories(out_dir);
    for (const auto& input : inputs) {
      auto image = read_image(input, size);
      if (!image) {
        throw IoError("cannot decode " + input);
      }
      const auto x = image->unsqueeze(0);
      for (const auto t : targets) {
        const auto y = trainer.translate(x, torch::full({1}, t, torch::kInt64));
        const auto path = fs::path(out_dir) / (fs::path(input).stem().string() + "_to_" + names[t] + ".png");
        write_png(path, y[0]);
        const double l1 = (y - x).abs().mean().item<double>();
        out << input << " -> " << names[t] << ": " << path.string() << " mean_l1=" << std::setprecision(6) << l1
            << "\n";
      }
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

namespace {

struct TranslatedSet {
  torch::Tensor images;
  torch::Tensor labels;  // target domain of each image
};

// Every holdout image of domain s sent to every t != s by `produce`.
template <typename Produce>
TranslatedSet translate_holdout(const DomainDataset& holdout, Produce&& produce) {
  std::vector<torch::Tensor> images, labels;
  const auto m = holdout.domain_count();
  for (std::int64_t s = 0; s < m; ++s) {
    for (std::int64_t t = 0; t < m; ++t) {
      if (t == s) {
        continue;
      }
      auto y = produce(s, t);
      labels.push_back(torch::full({y.size(0)}, t, torch::kInt64));
      images.push_back(std::move(y));
    }
  }
  return {torch::cat(images), torch::cat(labels)};
}

void save_classifier(const EvalClassifier& clf, const fs::path& path) {
  torch::serialize::OutputArchive archive;
  write_module_params(archive, "classifier", *clf.net);
  archive.write("classifier/m", torch::tensor(clf.m));
  archive.write("classifier/holdout_accuracy", torch::tensor(clf.record.holdout_accuracy));
  save_archive(archive, path);
}

EvalClassifier load_classifier(const fs::path& path, std::int64_t m, std::int64_t width) {
  auto archive = load_archive(path);
  torch::Tensor stored_m, accuracy;
  if (!archive.try_read("classifier/m", stored_m) || !archive.try_read("classifier/holdout_accuracy", accuracy)) {
    throw IoError("not a classifier archive: " + path.string());
  }
  if (stored_m.item<std::int64_t>() != m) {
    throw ConfigError("cached classifier has " + std::to_string(stored_m.item<std::int64_t>()) +
                      " domains, dataset has " + std::to_string(m));
  }
  EvalClassifier clf;
  clf.m = m;
  clf.net = EvalClassifierNet(m, width);
  read_module_params(archive, "classifier", *clf.net);
  clf.net->eval();
  clf.record.holdout_accuracy = accuracy.item<double>();
  return clf;
}

}  // namespace

int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score translations with classification accuracy and FID", "g2gan evaluate"};
  std::string checkpoint, data, config_path, report_path, classifier_path;
  std::string generator = "checkpoint";
  std::int64_t size = 0;
  bool shrinkage = false;
  app.add_option("--checkpoint", checkpoint, "checkpoint archive (generator 'checkpoint')");
  app.add_option("--data", data, "dataset root")->required();
  app.add_option("--generator", generator, "what produces the translations")
      ->check(CLI::IsMember({"checkpoint", "oracle", "identity"}))
      ->capture_default_str();
  app.add_option("--config", config_path, "run config for the holdout split and classifier settings");
  app.add_option("--size", size, "image side length when no checkpoint is used")->check(CLI::PositiveNumber);
  app.add_option("--report", report_path, "write the JSON report here");
  app.add_option("--classifier", classifier_path, "classifier cache; trained and saved when missing");
  app.add_flag("--fid-shrinkage", shrinkage, "shrink covariances when there are fewer samples than feature dims");
  if (auto code = parse_flags(app, args, out, err)) {
    return *code;
  }
  if (generator == "checkpoint" && checkpoint.empty()) {
    err << "error: --generator checkpoint needs --checkpoint\n" << app.help();
    return kExitUsage;
  }
  return guarded(err, [&] {
    const std::string file_text = config_path.empty() ? std::string() : read_text(config_path);
    auto cfg = run_config_from_entries(merge_config_layers(file_text, env_seed(), {}));

    std::optional<Trainer> trainer;
    std::string hashed = emit_run_config(cfg);
    std::int64_t resolution = size > 0 ? size : cfg.train.network.resolution;
    if (generator == "checkpoint") {
      require_checkpoint(checkpoint);
      trainer.emplace(Trainer::from_checkpoint(checkpoint));
      resolution = trainer->config().network.resolution;
      hashed = to_config_text(trainer->config());
    }
    hashed += "\ngenerator = " + generator + "\n";

    const auto dataset = load_domain_folders(data, static_cast<int>(resolution));
    const auto m = dataset.domain_count();
    if (trainer && trainer->domain_count() != m) {
      throw ConfigError("checkpoint has " + std::to_string(trainer->domain_count()) + " domains, dataset has " +
                        std::to_string(m));
    }
    const auto split = split_holdout(dataset, cfg.holdout_fraction, cfg.split_seed);

    ClassifierConfig ccfg;
    ccfg.epochs = cfg.eval_classifier_epochs;
    ccfg.min_holdout_accuracy = cfg.eval_min_accuracy;
    ccfg.seed = cfg.split_seed;
    EvalClassifier clf;
    if (!classifier_path.empty() && fs::exists(classifier_path)) {
      clf = load_classifier(classifier_path, m, ccfg.width);
    } else {
      clf = train_eval_classifier(split.train, split.holdout, ccfg);
      if (!classifier_path.empty()) {
        save_classifier(clf, classifier_path);
      }
    }

    const auto& holdout = split.holdout;
    TranslatedSet fake;
    if (generator == "checkpoint") {
      fake = translate_holdout(holdout, [&](std::int64_t s, std::int64_t t) {
        return batched_apply(holdout.images(s), 16, [&](const torch::Tensor& x) {
          return trainer->translate(x, torch::full({x.size(0)}, t, torch::kInt64));
        });
      });
    } else if (generator == "oracle") {
      if (!holdout.pairing()) {
        throw EvalError("the oracle generator needs a dataset with pairing.json");
      }
      const auto& rows = holdout.pairing()->rows;
      fake = translate_holdout(holdout, [&](std::int64_t s, std::int64_t t) {
        // Row r holds the same base scene in every domain; map source index -> row.
        std::vector<std::int64_t> row_of(static_cast<std::size_t>(holdout.size(s)));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          row_of[static_cast<std::size_t>(rows[r][s])] = static_cast<std::int64_t>(r);
        }
        std::vector<std::int64_t> picks;
        for (const auto r : row_of) {
          picks.push_back(rows[static_cast<std::size_t>(r)][t]);
        }
        return holdout.images(t).index_select(0, torch::tensor(picks, torch::kInt64));
      });
    } else {
      fake = translate_holdout(holdout, [&](std::int64_t s, std::int64_t) { return holdout.images(s); });
    }

    const auto accuracy = classification_accuracy(clf, fake.images, fake.labels, m);
    const auto [real_images, real_labels] = flatten_dataset(holdout);
    FidOptions fid_options;
    fid_options.allow_shrinkage = shrinkage;
    const double fid_value = fid(classifier_embedder(clf), real_images, fake.images, fid_options);

    json report;
    report["config_hash"] = config_hash(hashed);
    report["generator"] = generator;
    report["ca_top1"] = accuracy.top1;
    if (accuracy.top5) {
      report["ca_top5"] = *accuracy.top5;
    }
    report["fid"] = fid_value;
    report["count"] = accuracy.count;
    report["classifier_holdout_accuracy"] = clf.record.holdout_accuracy;
    json per_domain = json::object();
    for (std::int64_t d = 0; d < m; ++d) {
      const double v = accuracy.per_domain_top1[static_cast<std::size_t>(d)];
      per_domain[dataset.name(d)] = {{"ca_top1", std::isnan(v) ? json(nullptr) : json(v)},
                                     {"count", accuracy.per_domain_count[static_cast<std::size_t>(d)]}};
    }
    report["per_domain"] = per_domain;

    if (!report_path.empty()) {
      if (const auto parent = fs::path(report_path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
      }
      write_text(report_path, report.dump(2) + "\n");
    }
    out << report.dump(2) << "\n\n";
    out << std::left << std::setw(16) << "domain" << std::right << std::setw(10) << "ca_top1" << std::setw(8)
        << "n" << "\n";
    for (std::int64_t d = 0; d < m; ++d) {
      out << std::left << std::setw(16) << dataset.name(d) << std::right << std::setw(10) << std::fixed
          << std::setprecision(4) << accuracy.per_domain_top1[static_cast<std::size_t>(d)] << std::setw(8)
          << accuracy.per_domain_count[static_cast<std::size_t>(d)] << "\n";
    }
    out << std::left << std::setw(16) << "all" << std::right << std::setw(10) << accuracy.top1 << std::setw(8)
        << accuracy.count << "\nfid " << std::setprecision(4) << fid_value << "\n";
    out.unsetf(std::ios::floatfield);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_capacity(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compare model capacity across multi-domain translation methods", "g2gan capacity"};
  std::int64_t m = 0;
  std::int64_t resolution = 256;
  bool csv = false;
  app.add_option("--domains", m, "number of domains (>= 2)")->required();
  app.add_option("--resolution", resolution, "image side length")->capture_default_str();
  app.add_flag("--csv", csv, "emit CSV rows");
  if (auto code = parse_flags(app, args, out, err)) {
    return *code;
  }
  return guarded(err, [&] {
    if (m < 2) {
      throw ConfigError("--domains must be at least 2");
    }
    const auto rows = capacity_report(m, NetworkConfig::full_scale(m, resolution));
    out << (csv ? capacity_table_csv(rows) : capacity_table_text(rows, m));
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, int (*)(const std::vector<std::string>&, std::ostream&, std::ostream&)>
      commands{{"synth", cmd_synth},
               {"train", cmd_train},
               {"translate", cmd_translate},
               {"evaluate", cmd_evaluate},
               {"capacity", cmd_capacity}};
  const std::string usage =
      "usage: g2gan <command> [flags]\n\n"
      "commands:\n"
      "  synth      write a synthetic multi-domain dataset\n"
      "  train      train the dual generators\n"
      "  translate  translate images with a checkpoint\n"
      "  evaluate   classification accuracy and FID of translations\n"
      "  capacity   parameter budget per method\n\n"
      "Run `g2gan <command> --help` for the flags of a command.\n";
  if (args.empty()) {
    err << usage;
    return kExitUsage;
  }
  if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    out << usage;
    return kExitOk;
  }
  const auto it = commands.find(args[0]);
  if (it == commands.end()) {
    err << "unknown command '" << args[0] << "'\n" << usage;
    return kExitUsage;
  }
  return it->second(std::vector<std::string>(args.begin() + 1, args.end()), out, err);
}

}  // namespace g2gan
