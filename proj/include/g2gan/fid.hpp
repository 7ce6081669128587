#pragma once

#include <torch/torch.h>

#include <Eigen/Dense>

#include "g2gan/classifier.hpp"

namespace g2gan {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased (n - 1)
};

struct FidOptions {
  // With fewer than d + 1 samples, shrink the covariance toward a scaled
  // identity (with a warning) instead of failing.
  bool allow_shrinkage = false;
  double shrinkage = 0.1;
};

// Mean and covariance of (N, d) features, accumulated in a fixed order.
// Throws EvalError when N < d + 1 unless shrinkage is allowed.
GaussianStats gaussian_stats(const torch::Tensor& features, const FidOptions& opts = {});

// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The trace term uses the
// symmetric form S_a^(1/2) S_b S_a^(1/2), with negative eigenvalues clipped to 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

double fid_from_features(const torch::Tensor& real, const torch::Tensor& fake, const FidOptions& opts = {});

// Embeds both image sets with `embedder` and compares their Gaussian fits.
double fid(const FeatureEmbedder& embedder, const torch::Tensor& real, const torch::Tensor& fake,
           const FidOptions& opts = {});

}  // namespace g2gan
