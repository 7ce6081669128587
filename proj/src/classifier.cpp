#include "g2gan/classifier.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "g2gan/error.hpp"
#include "g2gan/networks.hpp"

namespace g2gan {

namespace nn = torch::nn;

EvalClassifierNetImpl::EvalClassifierNetImpl(std::int64_t m, std::int64_t width) {
  nn::Sequential trunk;
  const std::int64_t channels[] = {width, 2 * width, 4 * width, kFeatureDim};
  std::int64_t in = 3;
  for (int i = 0; i < 4; ++i) {
    trunk->push_back("conv" + std::to_string(i),
                     nn::Conv2d(nn::Conv2dOptions(in, channels[i], 4).stride(2).padding(1)));
    trunk->push_back("act" + std::to_string(i), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = channels[i];
  }
  trunk_ = register_module("trunk", trunk);
  head_ = register_module("head", nn::Linear(kFeatureDim, m));
}

torch::Tensor EvalClassifierNetImpl::features(const torch::Tensor& x) {
  return trunk_->forward(x).mean({2, 3});
}

torch::Tensor EvalClassifierNetImpl::forward(const torch::Tensor& x) {
  return head_->forward(features(x));
}

std::pair<torch::Tensor, torch::Tensor> flatten_dataset(const DomainDataset& dataset) {
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> labels;
  for (std::int64_t d = 0; d < dataset.domain_count(); ++d) {
    images.push_back(dataset.images(d));
    labels.push_back(torch::full({dataset.size(d)}, d, torch::kInt64));
  }
  return {torch::cat(images), torch::cat(labels)};
}

torch::Tensor batched_apply(const torch::Tensor& images, std::int64_t chunk,
                            const std::function<torch::Tensor(const torch::Tensor&)>& fn) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> out;
  for (std::int64_t start = 0; start < images.size(0); start += chunk) {
    out.push_back(fn(images.slice(0, start, std::min(images.size(0), start + chunk))));
  }
  return torch::cat(out);
}

namespace {

double accuracy(EvalClassifierNet& net, const torch::Tensor& images, const torch::Tensor& labels) {
  auto logits = batched_apply(images.to(torch::kFloat32), 128, [&](const torch::Tensor& x) { return net->forward(x); });
  return logits.argmax(1).eq(labels).to(torch::kFloat64).mean().item<double>();
}

}  // namespace

EvalClassifier train_eval_classifier(const DomainDataset& train, const DomainDataset& holdout,
                                     const ClassifierConfig& cfg) {
  if (train.domain_count() != holdout.domain_count()) {
    throw ConfigError("train and holdout splits disagree on the domain count");
  }
  for (std::int64_t d = 0; d < train.domain_count(); ++d) {
    if (train.size(d) < 10) {
      throw DatasetError("domain '" + train.name(d) + "' has fewer than 10 training images");
    }
  }
  const auto m = train.domain_count();
  Rng rng(cfg.seed);
  EvalClassifier clf;
  clf.m = m;
  clf.net = EvalClassifierNet(m, cfg.width);
  init_weights(*clf.net, rng);

  auto [images, labels] = flatten_dataset(train);
  const auto n = images.size(0);
  torch::optim::Adam opt(clf.net->parameters(), torch::optim::AdamOptions(cfg.lr));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const auto stop = std::min(n, start + cfg.batch_size);
      auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + start, order.begin() + stop), torch::kInt64);
      auto loss = torch::nn::functional::cross_entropy(clf.net->forward(images.index_select(0, idx)),
                                                       labels.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
  auto [hold_images, hold_labels] = flatten_dataset(holdout);
  clf.record.epochs = cfg.epochs;
  clf.record.holdout_accuracy = accuracy(clf.net, hold_images, hold_labels);
  if (clf.record.holdout_accuracy < cfg.min_holdout_accuracy) {
    throw EvalError("eval classifier reached only " + std::to_string(clf.record.holdout_accuracy) +
                    " holdout accuracy (needs " + std::to_string(cfg.min_holdout_accuracy) + ")");
  }
  return clf;
}

AccuracyReport classification_accuracy(EvalClassifier& clf, const torch::Tensor& images, const torch::Tensor& labels,
                                       std::int64_t m) {
  if (images.dim() != 4 || images.size(0) == 0) {
    throw EvalError("classification accuracy needs a non-empty image set");
  }
  if (m != clf.m) {
    throw ConfigError("classifier was trained for m=" + std::to_string(clf.m) + ", got m=" + std::to_string(m));
  }
  if (labels.dim() != 1 || labels.size(0) != images.size(0)) {
    throw ShapeError("one label per image required");
  }
  check_label_indices(labels, m);
  auto logits = batched_apply(images.to(torch::kFloat32), 128, [&](const torch::Tensor& x) { return clf.net->forward(x); });
  const auto hits1 = logits.argmax(1).eq(labels);

  AccuracyReport report;
  report.count = images.size(0);
  report.top1 = hits1.to(torch::kFloat64).mean().item<double>();
  if (m > 5) {
    const auto top5 = std::get<1>(logits.topk(5, 1));
    report.top5 = top5.eq(labels.unsqueeze(1)).any(1).to(torch::kFloat64).mean().item<double>();
  }
  for (std::int64_t d = 0; d < m; ++d) {
    const auto mask = labels.eq(d);
    const auto count = mask.sum().item<std::int64_t>();
    report.per_domain_count.push_back(count);
    report.per_domain_top1.push_back(count == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                : hits1.masked_select(mask).to(torch::kFloat64).mean().item<double>());
  }
  return report;
}

FeatureEmbedder classifier_embedder(EvalClassifier& clf) {
  auto net = clf.net;
  return {EvalClassifierNetImpl::kFeatureDim, [net](const torch::Tensor& images) mutable {
            return batched_apply(images.to(torch::kFloat32), 128,
                                 [&](const torch::Tensor& x) { return net->features(x); });
          }};
}

}  // namespace g2gan
