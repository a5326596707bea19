#include "awh/critic.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <stdexcept>

namespace awh {

CriticNetImpl::CriticNetImpl(const CriticOptions& options) : options_(options) {
  if (options.input_dim < 1 || options.hidden_width < 1 || options.hidden_layers < 0) {
    throw std::invalid_argument("critic: invalid layer dimensions");
  }
  hidden_ = register_module("hidden", torch::nn::ModuleList());
  int64_t width = options.input_dim;
  for (int i = 0; i < options.hidden_layers; ++i) {
    hidden_->push_back(torch::nn::Linear(width, options.hidden_width));
    width = options.hidden_width;
  }
  output_ = register_module("output", torch::nn::Linear(width, 1));
}

torch::Tensor CriticNetImpl::forward(const torch::Tensor& x) {
  auto h = x;
  for (const auto& layer : *hidden_) {
    h = torch::leaky_relu(layer->as<torch::nn::Linear>()->forward(h), options_.leaky_slope);
  }
  return output_->forward(h).squeeze(1);
}

torch::Tensor pool_features(const FeatureMap& feat) {
  feat.validate();
  return feat.values.mean({2, 3});
}

namespace {

void check_batches(const torch::Tensor& s, const torch::Tensor& t) {
  if (!s.defined() || !t.defined() || s.dim() != 2 || t.dim() != 2) {
    throw std::invalid_argument("critic inputs must be N x n matrices");
  }
  if (s.size(0) == 0 || t.size(0) == 0) throw std::invalid_argument("critic: empty batch");
  if (s.size(1) != t.size(1)) throw std::invalid_argument("critic: feature dimension mismatch");
}

void check_pairs(const torch::Tensor& s, const torch::Tensor& t) {
  check_batches(s, t);
  if (s.size(0) != t.size(0)) {
    throw std::invalid_argument("gradient penalty needs equal batch sizes for both domains");
  }
}

}  // namespace

torch::Tensor wd_loss(CriticNet& fd, const torch::Tensor& pooled_s, const torch::Tensor& pooled_t) {
  check_batches(pooled_s, pooled_t);
  return fd->forward(pooled_s).mean() - fd->forward(pooled_t).mean();
}

torch::Tensor wd_loss(CriticNet& fd, const FeatureMap& feat_s, const FeatureMap& feat_t) {
  return wd_loss(fd, pool_features(feat_s), pool_features(feat_t));
}

torch::Tensor gradient_penalty_at(CriticNet& fd, const torch::Tensor& pooled_s,
                                  const torch::Tensor& pooled_t, const torch::Tensor& rates) {
  check_pairs(pooled_s, pooled_t);
  if (rates.dim() != 1 || rates.size(0) != pooled_s.size(0)) {
    throw std::invalid_argument("gradient penalty: one interpolation rate per pair");
  }
  const auto t = rates.to(pooled_s.dtype()).unsqueeze(1);
  auto mixed = (t * pooled_s.detach() + (1.0 - t) * pooled_t.detach()).requires_grad_(true);
  const auto scores = fd->forward(mixed);
  const auto grads = torch::autograd::grad({scores.sum()}, {mixed}, {},
                                           /*retain_graph=*/true, /*create_graph=*/true,
                                           /*allow_unused=*/true)[0];
  if (!grads.defined()) {
    // score independent of its input: gradient norm is 0 everywhere
    return torch::ones({}, pooled_s.options()) + 0.0 * scores.sum();
  }
  return (grads.norm(2, 1) - 1.0).square().mean();
}

torch::Tensor gradient_penalty(CriticNet& fd, const torch::Tensor& pooled_s,
                               const torch::Tensor& pooled_t, at::Generator& gen) {
  check_pairs(pooled_s, pooled_t);
  const auto rates =
      torch::rand({pooled_s.size(0)}, gen, torch::TensorOptions().dtype(pooled_s.dtype()));
  return gradient_penalty_at(fd, pooled_s, pooled_t, rates);
}

torch::Tensor gradient_penalty(CriticNet& fd, const FeatureMap& feat_s, const FeatureMap& feat_t,
                               at::Generator& gen) {
  return gradient_penalty(fd, pool_features(feat_s), pool_features(feat_t), gen);
}

AdversarialLosses critic_objective(CriticNet& fd, const torch::Tensor& pooled_s,
                                   const torch::Tensor& pooled_t, double lambda_gp,
                                   at::Generator& gen) {
  if (!(lambda_gp >= 0.0)) throw std::invalid_argument("critic_objective: lambda_gp must be >= 0");
  AdversarialLosses out;
  out.wd = wd_loss(fd, pooled_s, pooled_t);
  out.gp = gradient_penalty(fd, pooled_s, pooled_t, gen);
  out.combined = out.wd + lambda_gp * out.gp;
  return out;
}

AdversarialLosses critic_objective(CriticNet& fd, const FeatureMap& feat_s,
                                   const FeatureMap& feat_t, double lambda_gp,
                                   at::Generator& gen) {
  return critic_objective(fd, pool_features(feat_s), pool_features(feat_t), lambda_gp, gen);
}

double estimate_w1(const torch::Tensor& samples_a, const torch::Tensor& samples_b, int64_t steps,
                   uint64_t seed, const W1EstimatorOptions& options) {
  if (steps <= 0) throw std::invalid_argument("estimate_w1: steps must be positive");
  check_batches(samples_a, samples_b);

  const auto a = samples_a.to(torch::kFloat32);
  const auto b = samples_b.to(torch::kFloat32);
  torch::manual_seed(seed);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);

  CriticNet fd(CriticOptions{a.size(1), options.hidden_width, options.hidden_layers, 0.2});
  torch::optim::Adam opt(fd->parameters(),
                         torch::optim::AdamOptions(options.learning_rate).betas({0.5, 0.9}));

  const int64_t batch = std::min({options.batch_size, a.size(0), b.size(0)});
  const auto idx_opts = torch::TensorOptions().dtype(torch::kLong);
  for (int64_t step = 0; step < steps; ++step) {
    const auto ia = torch::randint(a.size(0), {batch}, gen, idx_opts);
    const auto ib = torch::randint(b.size(0), {batch}, gen, idx_opts);
    opt.zero_grad();
    auto losses = critic_objective(fd, a.index_select(0, ia), b.index_select(0, ib),
                                   step < options.warmup_steps ? 0.0 : options.lambda_gp, gen);
    losses.combined.backward();
    opt.step();
  }

  torch::NoGradGuard no_grad;
  return -wd_loss(fd, a, b).item<double>();
}

}  // namespace awh
