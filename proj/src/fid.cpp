#include "g2gan/fid.hpp"

#include <iostream>

#include "g2gan/error.hpp"

namespace g2gan {

namespace {

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianStats gaussian_stats(const torch::Tensor& features, const FidOptions& opts) {
  if (features.dim() != 2) {
    throw ShapeError("features must be (N, d)");
  }
  const auto n = features.size(0);
  const auto d = features.size(1);
  if (n < 2 || (n < d + 1 && !opts.allow_shrinkage)) {
    throw EvalError("FID needs at least d + 1 = " + std::to_string(d + 1) + " samples, got " + std::to_string(n));
  }
  auto cpu = features.detach().to(torch::kFloat64).contiguous();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      cpu.data_ptr<double>(), n, d);
  GaussianStats stats;
  stats.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - stats.mean.transpose();
  stats.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (n < d + 1) {
    std::cerr << "warning: " << n << " samples for " << d << "-d features; using a shrunk covariance\n";
    const double scale = stats.cov.trace() / static_cast<double>(d);
    stats.cov = (1.0 - opts.shrinkage) * stats.cov +
                opts.shrinkage * scale * Eigen::MatrixXd::Identity(d, d);
  }
  return stats;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw ShapeError("feature dimensions differ");
  }
  const Eigen::MatrixXd root_a = sqrt_psd(a.cov);
  const Eigen::MatrixXd inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double trace_root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_root;
  return std::max(value, 0.0);
}

double fid_from_features(const torch::Tensor& real, const torch::Tensor& fake, const FidOptions& opts) {
  return frechet_distance(gaussian_stats(real, opts), gaussian_stats(fake, opts));
}

double fid(const FeatureEmbedder& embedder, const torch::Tensor& real, const torch::Tensor& fake,
           const FidOptions& opts) {
  auto real_features = embedder.embed(real);
  auto fake_features = embedder.embed(fake);
  if (real_features.size(1) != embedder.dim || fake_features.size(1) != embedder.dim) {
    throw ShapeError("embedder returned features of the wrong dimension");
  }
  return fid_from_features(real_features, fake_features, opts);
}

}  // namespace g2gan
