#pragma once

#include <torch/torch.h>

#include "g2gan/labels.hpp"
#include "g2gan/networks.hpp"
#include "g2gan/ssim.hpp"

namespace g2gan {

// Weights of the classification, color-cycle, MS-SSIM and identity terms.
struct ObjectiveWeights {
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double lambda3 = 1.0;
  double lambda4 = 0.5;
};

// Throws ConfigError unless every weight is finite and >= 0.
void validate_weights(const ObjectiveWeights& w);

// Mean absolute error over every element.
torch::Tensor cycle_l1(const torch::Tensor& x_hat, const torch::Tensor& x);

// Sum over the three color channels of the per-channel mean absolute error.
torch::Tensor color_cycle(const torch::Tensor& x_hat, const torch::Tensor& x);

// mean((D(real) - 1)^2) + mean(D(fake)^2). Throws NumericsError on non-finite input.
torch::Tensor lsgan_discriminator_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

// mean((D(fake) - 1)^2). Throws NumericsError on non-finite input.
torch::Tensor lsgan_generator_loss(const torch::Tensor& fake_scores);

// Mean negative log softmax probability of the target domain.
// logits: (B, m); targets: (B) int64. Throws LabelError / ShapeError.
torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& targets);
torch::Tensor classification_loss(const torch::Tensor& logits, const DomainLabel& target);

// mean |G_r(x, z_x) - x|
torch::Tensor identity_loss(Generator& reconstructor, const torch::Tensor& x, const torch::Tensor& source_labels);

struct ObjectiveTerms {
  torch::Tensor lsgan_g;
  torch::Tensor cls_fake;
  torch::Tensor colorcyc;
  torch::Tensor msssim;
  torch::Tensor identity;
};

// lsgan_g + l1 * cls_fake + l2 * colorcyc + l3 * msssim + l4 * identity.
// Undefined terms count as 0. Throws NumericsError on a non-finite term.
torch::Tensor full_objective(const ObjectiveTerms& terms, const ObjectiveWeights& w);

// Throws NumericsError naming `what` unless every element of `t` is finite.
void require_finite(const torch::Tensor& t, const std::string& what);

}  // namespace g2gan
