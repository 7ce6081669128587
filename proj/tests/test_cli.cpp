#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "g2gan/commands.hpp"
#include "g2gan/error.hpp"
#include "g2gan/run_config.hpp"

namespace fs = std::filesystem;
using namespace g2gan;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("g2gan_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& root, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  }
  return n;
}

// Small-network overrides so a CLI training run takes seconds.
const std::vector<std::string> kTinyNet{"--size", "16",
                                        "--set",  "width_base=4",
                                        "--set",  "residual_blocks=1",
                                        "--set",  "disc_width=4",
                                        "--set",  "disc_depth=2",
                                        "--set",  "checkpoint_every=1"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Shared fixture: a 3-domain 16-px dataset and one short training run.
struct Workspace {
  fs::path root = scratch("workspace");
  fs::path data = root / "data";
  fs::path runs = root / "run";

  Workspace() {
    REQUIRE(run({"synth", "--domains", "3", "--count", "110", "--size", "16", "--seed", "4", "--out", data.string()})
                .code == 0);
    auto r = run(concat({"train", "--data", data.string(), "--sharing", "full", "--epochs", "1", "--out",
                         runs.string()},
                        kTinyNet));
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("every command prints usage on --help") {
  for (const auto* cmd : {"synth", "train", "translate", "evaluate", "capacity"}) {
    const auto r = run({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("Usage") != std::string::npos);
  }
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"fly"}).code == 2);
}

TEST_CASE("invalid flags exit 2 without touching the filesystem") {
  const auto dir = scratch("invalid");
  CHECK(run({"synth", "--domains", "1", "--count", "3", "--out", dir.string()}).code == 2);
  CHECK(run({"synth", "--domains", "3", "--count", "3", "--bogus", "--out", dir.string()}).code == 2);
  CHECK(run({"synth", "--domains", "three", "--count", "3", "--out", dir.string()}).code == 2);
  CHECK(run({"train", "--data", "nowhere", "--sharing", "half", "--out", dir.string()}).code == 2);
  CHECK(run({"train", "--data", "nowhere", "--set", "lambda9=1", "--out", dir.string()}).code == 2);
  CHECK(run({"train", "--out", dir.string()}).code == 2);
  CHECK(run({"capacity", "--domains", "1"}).code == 2);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("synth writes the folder layout deterministically") {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  for (const auto& dir : {a, b}) {
    const auto r = run({"synth", "--domains", "4", "--count", "10", "--size", "16", "--seed", "7", "--out", dir.string()});
    REQUIRE(r.code == 0);
  }
  CHECK(count_files(a, ".png") == 40);
  CHECK(fs::exists(a / "pairing.json"));
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run config round-trips and layers file < G2GAN_SEED < flags") {
  RunConfig cfg;
  cfg.data = "somewhere";
  cfg.train.weights.lambda2 = 3.5;
  cfg.train.network.mode = SharingMode::Partial;
  cfg.ssim_scales = 2;
  const auto text = emit_run_config(cfg);
  const auto parsed = parse_run_config(text);
  CHECK(emit_run_config(parsed) == text);
  CHECK(parse_run_config("ssim_scales = 2\n").train.ssim.scales() == 2);
  CHECK(parse_run_config("image_size = 32\n").train.ssim.scales() == 2);
  CHECK(parse_run_config("").train.ssim.scales() == 3);

  const RunConfig defaults;
  CHECK(defaults.data.empty());
  CHECK(defaults.train.weights.lambda2 == 10.0);
  CHECK_THROWS_AS(parse_run_config("mystery = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("holdout_fraction = 2\n"), ConfigError);

  const std::string file = "seed = 1\nepochs_total = 6\n";
  auto merged = run_config_from_entries(merge_config_layers(file, std::nullopt, {}));
  CHECK(merged.train.seed == 1);
  CHECK(merged.train.epochs_constant_lr == 3);
  CHECK(parse_run_config("epochs_total = 1\n").train.epochs_constant_lr == 1);
  merged = run_config_from_entries(merge_config_layers(file, std::string("9"), {}));
  CHECK(merged.train.seed == 9);
  merged = run_config_from_entries(merge_config_layers(file, std::string("9"), {{"seed", "11"}}));
  CHECK(merged.train.seed == 11);
  CHECK(config_hash("abc") == config_hash("abc"));
  CHECK(config_hash("abc") != config_hash("abd"));
}

TEST_CASE("train writes metrics, checkpoints and samples; ablation flags reach the config") {
  auto& ws = workspace();
  CHECK(fs::exists(ws.runs / "metrics.csv"));
  CHECK(fs::exists(ws.runs / "ckpt_last.archive"));
  CHECK(fs::exists(ws.runs / "samples_epoch1.png"));
  std::ifstream csv(ws.runs / "metrics.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows > 0);

  const auto cfg = parse_run_config(slurp(ws.runs / "run.cfg"));
  CHECK(cfg.train.weights.lambda1 == 1.0);
  CHECK(cfg.train.weights.lambda2 == 10.0);
  CHECK(cfg.train.weights.lambda3 == 1.0);
  CHECK(cfg.train.weights.lambda4 == 0.5);
  CHECK(cfg.train.lr0 == 2e-4);
  CHECK(cfg.train.buffer_capacity == 50);
  CHECK(cfg.train.batch_size == 1);
  CHECK(cfg.train.ablations.use_msssim);

  const auto ablated = ws.root / "ablated";
  auto r = run(concat({"train", "--data", ws.data.string(), "--epochs", "1", "--iterations", "2", "--no-msssim",
                       "--no-colorcycle", "--no-identity", "--out", ablated.string()},
                      kTinyNet));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto a = parse_run_config(slurp(ablated / "run.cfg"));
  CHECK_FALSE(a.train.ablations.use_msssim);
  CHECK_FALSE(a.train.ablations.use_colorcycle);
  CHECK_FALSE(a.train.ablations.use_identity);
  CHECK(a.train.ablations.use_double_discriminator);
}

TEST_CASE("a diverging training run exits 3 and names the dump") {
  auto& ws = workspace();
  const auto out = ws.root / "nan";
  auto r = run(concat({"train", "--data", ws.data.string(), "--epochs", "1", "--set", "lr0=1e30", "--out",
                       out.string()},
                      kTinyNet));
  CHECK(r.code == 3);
  CHECK(r.err.find("dump: ") != std::string::npos);
}

TEST_CASE("translate writes one file per requested domain") {
  auto& ws = workspace();
  const auto ckpt = (ws.runs / "ckpt_last.archive").string();
  const auto input = (ws.data / "domain1" / "00000.png").string();
  const auto out = ws.root / "translated";
  auto r = run({"translate", "--checkpoint", ckpt, "--input", input, "--all-domains", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_files(out, ".png") == 3);
  r = run({"translate", "--checkpoint", ckpt, "--input", input, "--target-domain", "domain1", "--out",
           out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("mean_l1=") != std::string::npos);
  CHECK(run({"translate", "--checkpoint", ckpt, "--input", input, "--target-domain", "2", "--out", out.string()})
            .code == 0);
  CHECK(run({"translate", "--checkpoint", ckpt, "--input", input, "--target-domain", "winter"}).code == 2);
  CHECK(run({"translate", "--checkpoint", ckpt, "--input", input, "--target-domain", "3"}).code == 2);
  CHECK(run({"translate", "--checkpoint", (ws.root / "nope.archive").string(), "--input", input,
             "--target-domain", "0"})
            .code == 2);
}

TEST_CASE("evaluate reports CA and FID; oracle and identity controls bracket a model") {
  auto& ws = workspace();
  const auto report_path = ws.root / "eval" / "report.json";
  const auto classifier = (ws.root / "eval_classifier.archive").string();
  auto r = run({"evaluate", "--checkpoint", (ws.runs / "ckpt_last.archive").string(), "--data", ws.data.string(),
                "--report", report_path.string(), "--classifier", classifier});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = nlohmann::json::parse(slurp(report_path));
  CHECK(report.contains("ca_top1"));
  CHECK(report.contains("fid"));
  CHECK(report.contains("config_hash"));
  CHECK(report["per_domain"].size() == 3);
  CHECK(fs::exists(classifier));

  r = run({"evaluate", "--generator", "oracle", "--size", "16", "--data", ws.data.string(), "--classifier",
           classifier});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto oracle = nlohmann::json::parse(r.out.substr(0, r.out.find("\n\n")));
  CHECK(oracle["ca_top1"].get<double>() >= 0.95);

  r = run({"evaluate", "--generator", "identity", "--size", "16", "--data", ws.data.string(), "--classifier",
           classifier});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto identity = nlohmann::json::parse(r.out.substr(0, r.out.find("\n\n")));
  CHECK(identity["ca_top1"].get<double>() < 0.2);

  CHECK(run({"evaluate", "--data", ws.data.string()}).code == 2);
}

TEST_CASE("capacity prints the comparison table") {
  auto r = run({"capacity", "--domains", "2", "--resolution", "64", "--csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  std::vector<std::int64_t> counts;
  while (std::getline(lines, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const auto third = line.find(',', second + 1);
    counts.push_back(std::stoll(line.substr(second + 1, third - second - 1)));
  }
  CHECK(counts == std::vector<std::int64_t>{2, 2, 1, 1, 1, 1, 2, 1, 1, 1, 1});
  r = run({"capacity", "--domains", "7"});
  CHECK(r.code == 0);
  CHECK(r.out.find("G2GAN (no-sharing)") != std::string::npos);
}

TEST_CASE("the installed binary follows the exit-code contract") {
  const char* bin = std::getenv("G2GAN_BIN");
  if (bin == nullptr) return;
  CHECK(std::system((std::string(bin) + " capacity --help > /dev/null").c_str()) == 0);
  const int code = std::system((std::string(bin) + " synth --domains 1 --count 1 --out /nonexistent 2> /dev/null").c_str());
  CHECK(WEXITSTATUS(code) == 2);
}
