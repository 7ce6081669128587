#include "g2gan/losses.hpp"

#include <cmath>

#include "g2gan/error.hpp"

namespace g2gan {

void validate_weights(const ObjectiveWeights& w) {
  for (double v : {w.lambda1, w.lambda2, w.lambda3, w.lambda4}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("objective weights must be finite and non-negative");
    }
  }
}

void require_finite(const torch::Tensor& t, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw NumericsError(what + " is not finite");
  }
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
}

}  // namespace

torch::Tensor cycle_l1(const torch::Tensor& x_hat, const torch::Tensor& x) {
  require_same_shape(x_hat, x, "cycle_l1");
  return (x_hat - x).abs().mean();
}

torch::Tensor color_cycle(const torch::Tensor& x_hat, const torch::Tensor& x) {
  require_same_shape(x_hat, x, "color_cycle");
  if (x.dim() != 4 || x.size(1) != 3) {
    throw ShapeError("color_cycle expects (B, 3, H, W) inputs");
  }
  return (x_hat - x).abs().mean({0, 2, 3}).sum();
}

torch::Tensor lsgan_discriminator_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  require_finite(real_scores, "discriminator score on real images");
  require_finite(fake_scores, "discriminator score on generated images");
  return (real_scores - 1.0).square().mean() + fake_scores.square().mean();
}

torch::Tensor lsgan_generator_loss(const torch::Tensor& fake_scores) {
  require_finite(fake_scores, "discriminator score on generated images");
  return (fake_scores - 1.0).square().mean();
}

torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& targets) {
  if (logits.dim() != 2 || targets.dim() != 1 || logits.size(0) != targets.size(0)) {
    throw ShapeError("classification_loss expects (B, m) logits and (B) targets");
  }
  check_label_indices(targets, logits.size(1));
  return torch::nn::functional::cross_entropy(logits, targets.to(torch::kInt64));
}

torch::Tensor classification_loss(const torch::Tensor& logits, const DomainLabel& target) {
  if (logits.dim() != 2 || logits.size(1) != target.m) {
    throw ShapeError("logit count does not match the label's domain count");
  }
  return classification_loss(logits, torch::full({logits.size(0)}, target.index, torch::kInt64));
}

torch::Tensor identity_loss(Generator& reconstructor, const torch::Tensor& x, const torch::Tensor& source_labels) {
  return cycle_l1(translate(reconstructor, x, source_labels), x);
}

torch::Tensor full_objective(const ObjectiveTerms& terms, const ObjectiveWeights& w) {
  torch::Tensor total;
  auto add = [&](const torch::Tensor& term, double weight, const char* name) {
    if (!term.defined()) {
      return;
    }
    require_finite(term.detach(), name);
    auto weighted = weight == 1.0 ? term : term * weight;
    total = total.defined() ? total + weighted : weighted;
  };
  add(terms.lsgan_g, 1.0, "adversarial term");
  add(terms.cls_fake, w.lambda1, "classification term");
  add(terms.colorcyc, w.lambda2, "color cycle term");
  add(terms.msssim, w.lambda3, "MS-SSIM term");
  add(terms.identity, w.lambda4, "identity term");
  return total.defined() ? total : torch::zeros({});
}

}  // namespace g2gan
