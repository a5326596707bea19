#pragma once

#include "awh/simweight.hpp"

#include <torch/torch.h>

#include <cstdint>

namespace awh {

struct CriticOptions {
  int64_t input_dim = 64;
  int64_t hidden_width = 128;
  // 0 gives a purely linear critic, used by the closed-form checks.
  int hidden_layers = 2;
  double leaky_slope = 0.2;
};

/// Scalar scoring function f_d: R^n -> R over pooled feature vectors.
class CriticNetImpl : public torch::nn::Module {
 public:
  explicit CriticNetImpl(const CriticOptions& options = {});

  /// N x n -> N
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear& output_layer() { return output_; }
  const CriticOptions& options() const { return options_; }

 private:
  CriticOptions options_;
  torch::nn::ModuleList hidden_;
  torch::nn::Linear output_{nullptr};
};
TORCH_MODULE(CriticNet);

/// Global average over H x W: B x C x H x W -> B x C.
torch::Tensor pool_features(const FeatureMap& feat);

/// mean_s f_d(x_s) - mean_t f_d(x_t) on already pooled vectors.
torch::Tensor wd_loss(CriticNet& fd, const torch::Tensor& pooled_s, const torch::Tensor& pooled_t);
torch::Tensor wd_loss(CriticNet& fd, const FeatureMap& feat_s, const FeatureMap& feat_t);

/// Mean over pairs of (||grad f_d(x_m)||_2 - 1)^2, x_m = t x_s + (1 - t) x_t,
/// using the given per-pair rates t (shape N). Differentiable w.r.t. critic
/// parameters.
torch::Tensor gradient_penalty_at(CriticNet& fd, const torch::Tensor& pooled_s,
                                  const torch::Tensor& pooled_t, const torch::Tensor& rates);

/// As above with t ~ U(0, 1) drawn from gen.
torch::Tensor gradient_penalty(CriticNet& fd, const torch::Tensor& pooled_s,
                               const torch::Tensor& pooled_t, at::Generator& gen);
torch::Tensor gradient_penalty(CriticNet& fd, const FeatureMap& feat_s, const FeatureMap& feat_t,
                               at::Generator& gen);

struct AdversarialLosses {
  torch::Tensor wd;
  torch::Tensor gp;
  // minimized by the critic optimizer: wd + lambda_gp * gp
  torch::Tensor combined;
};

AdversarialLosses critic_objective(CriticNet& fd, const torch::Tensor& pooled_s,
                                   const torch::Tensor& pooled_t, double lambda_gp,
                                   at::Generator& gen);
AdversarialLosses critic_objective(CriticNet& fd, const FeatureMap& feat_s,
                                   const FeatureMap& feat_t, double lambda_gp,
                                   at::Generator& gen);

struct W1EstimatorOptions {
  int64_t hidden_width = 128;
  int hidden_layers = 2;
  int64_t batch_size = 512;
  double learning_rate = 1e-3;
  // A two-sided penalty trades slope against the dual objective: in 1-D the
  // optimum slope is 1 + W1 / (2 lambda_gp), so the estimate carries that
  // relative bias. 100 keeps it near 1.5% for W1 = 3.
  double lambda_gp = 100.0;
  // Unpenalized steps at the start. With a large lambda_gp the penalty
  // otherwise freezes the sign of the initial slope and the critic can settle
  // on -W1.
  int64_t warmup_steps = 20;
};

/// Trains a fresh critic on two sample sets (N x d each) for `steps` updates
/// and returns the resulting dual-form distance estimate. The critic minimizes
/// wd + lambda_gp * gp, so the learned wd sits near -W1; the returned value is
/// its negation, i.e. the W1 estimate itself.
double estimate_w1(const torch::Tensor& samples_a, const torch::Tensor& samples_b, int64_t steps,
                   uint64_t seed, const W1EstimatorOptions& options = {});

}  // namespace awh
