#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "g2gan/capacity.hpp"
#include "g2gan/classifier.hpp"
#include "g2gan/error.hpp"
#include "g2gan/fid.hpp"
#include "oracles.hpp"

using namespace g2gan;

namespace {

Eigen::MatrixXd random_spd(int d, unsigned seed) {
  std::srand(seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(d, d);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

// tr((Sa Sb)^(1/2)) from the (real, positive) eigenvalues of the non-symmetric product.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a * b);
  double total = 0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    total += std::sqrt(std::max(0.0, solver.eigenvalues()[i].real()));
  }
  return total;
}

}  // namespace

TEST_CASE("Gaussian fit of features") {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  auto f = torch::randn({50, 4}, gen, torch::TensorOptions().dtype(torch::kFloat64));
  const auto stats = gaussian_stats(f);
  const auto rows = oracle::flat(f);
  for (int j = 0; j < 4; ++j) {
    double mean = 0;
    for (int i = 0; i < 50; ++i) mean += rows[static_cast<std::size_t>(i * 4 + j)];
    mean /= 50;
    CHECK(stats.mean(j) == doctest::Approx(mean).epsilon(1e-12));
    for (int k = 0; k < 4; ++k) {
      double mk = 0;
      for (int i = 0; i < 50; ++i) mk += rows[static_cast<std::size_t>(i * 4 + k)];
      mk /= 50;
      double cov = 0;
      for (int i = 0; i < 50; ++i)
        cov += (rows[static_cast<std::size_t>(i * 4 + j)] - mean) * (rows[static_cast<std::size_t>(i * 4 + k)] - mk);
      CHECK(stats.cov(j, k) == doctest::Approx(cov / 49).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(gaussian_stats(torch::randn({4, 4})), EvalError);
  FidOptions shrink;
  shrink.allow_shrinkage = true;
  CHECK_NOTHROW(gaussian_stats(torch::randn({4, 4}), shrink));
}

TEST_CASE("Frechet distance against the closed forms") {
  GaussianStats a{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  GaussianStats b{Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Identity(1, 1)};
  CHECK(frechet_distance(a, b) == doctest::Approx(4.0).epsilon(1e-9));
  GaussianStats c{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 4.0)};
  CHECK(frechet_distance(a, c) == doctest::Approx(1.0).epsilon(1e-9));

  for (unsigned seed = 1; seed <= 5; ++seed) {
    GaussianStats p{Eigen::VectorXd::Random(6), random_spd(6, seed)};
    GaussianStats q{Eigen::VectorXd::Random(6), random_spd(6, seed + 100)};
    const double expected = (p.mean - q.mean).squaredNorm() + p.cov.trace() + q.cov.trace() -
                            2 * trace_sqrt_product(p.cov, q.cov);
    CHECK(frechet_distance(p, q) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(std::abs(frechet_distance(p, p)) < 1e-9);
  }
  auto f = torch::randn({40, 3}, torch::kFloat64);
  CHECK(std::abs(fid_from_features(f, f)) < 1e-6);
}

TEST_CASE("model-count formulas and capacity rows") {
  CHECK(model_count(ModelCountFormula::OrderedPairs, 7) == 42);
  CHECK(model_count(ModelCountFormula::UnorderedPairs, 7) == 21);
  CHECK(model_count(ModelCountFormula::PerDomain, 7) == 7);
  CHECK(model_count(ModelCountFormula::Single, 7) == 1);
  CHECK(model_count(ModelCountFormula::OrderedPairs, 2) == 2);
  CHECK(model_count(ModelCountFormula::UnorderedPairs, 2) == 1);
  CHECK(model_count(ModelCountFormula::PerDomain, 2) == 2);
  CHECK_THROWS_AS(model_count(ModelCountFormula::Single, 1), ConfigError);

  auto arch = NetworkConfig::desk(3, 32);
  arch.disc_depth = 3;
  const auto rows = capacity_report(3, arch);
  const auto ref = oracle::arch_counts(3, 32, 16, 4, 16, 3);
  int measured = 0;
  for (const auto& row : rows) {
    if (!row.measured) continue;
    ++measured;
    CHECK(row.model_count == 1);
    if (row.method.find("full") != std::string::npos) {
      CHECK(row.parameters_per_model == ref.generator + ref.discriminator);
    }
  }
  CHECK(measured == 3);
  const auto csv = capacity_table_csv(rows);
  CHECK(csv.rfind("method,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rows.size()) + 1);
}

TEST_CASE("eval classifier separates hue domains and reports accuracy") {
  SynthSpec spec;
  spec.m = 3;
  spec.images_per_domain = 40;
  spec.height = spec.width = 32;
  spec.seed = 2;
  const auto ds = synthesize_multidomain(spec);
  const auto split = split_holdout(ds, 0.25, 0);
  ClassifierConfig cfg;
  cfg.epochs = 6;
  auto clf = train_eval_classifier(split.train, split.holdout, cfg);
  CHECK(clf.record.holdout_accuracy >= 0.9);

  const auto [images, labels] = flatten_dataset(split.holdout);
  const auto report = classification_accuracy(clf, images, labels, 3);
  CHECK(report.count == 30);
  CHECK(report.top1 >= 0.9);
  CHECK_FALSE(report.top5.has_value());
  CHECK(report.per_domain_count == std::vector<std::int64_t>{10, 10, 10});

  // wrong labels on purpose: every image claimed to be from the next domain
  const auto shifted = (labels + 1).remainder(3);
  CHECK(classification_accuracy(clf, images, shifted, 3).top1 <= 0.1);
  CHECK_THROWS_AS(classification_accuracy(clf, images, labels, 4), ConfigError);
  CHECK_THROWS_AS(classification_accuracy(clf, images.slice(0, 0, 0), labels.slice(0, 0, 0), 3), EvalError);

  const auto embedder = classifier_embedder(clf);
  const auto e1 = embedder.embed(images), e2 = embedder.embed(images);
  CHECK(e1.sizes() == torch::IntArrayRef({30, EvalClassifierNetImpl::kFeatureDim}));
  CHECK(torch::equal(e1, e2));

  auto tiny = split_holdout(ds, 0.9, 0);
  CHECK_THROWS_AS(train_eval_classifier(tiny.train, tiny.holdout, cfg), DatasetError);
}
