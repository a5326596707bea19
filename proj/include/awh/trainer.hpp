#pragma once

#include "awh/checkpoint.hpp"
#include "awh/config.hpp"
#include "awh/critic.hpp"
#include "awh/dataset.hpp"
#include "awh/depthreg.hpp"
#include "awh/eval.hpp"
#include "awh/posenet.hpp"

#include "json.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace awh {

/// Target indices of length source_count cycling through 0..target_count-1.
std::vector<int64_t> balance_target(int64_t source_count, int64_t target_count);

template <typename T>
struct LossComponents {
  T wd{};
  T res_source_25d{};
  T res_target_2d{};
  T reg_source{};
  T reg_target{};
  // summed intermediate-stack terms, zero when the tap is off
  T fss{};
};

/// -l_wd wd + l_res (res_s + res_t + fss) + l_reg (reg_s + reg_t). Works on
/// doubles and on scalar tensors so that the optimized value and its report
/// come from one formula.
template <typename T>
T combine_losses(const LossComponents<T>& c, const TrainConfig& config) {
  return -config.lambda_wd * c.wd +
         config.lambda_res * (c.res_source_25d + c.res_target_2d) +
         config.lambda_reg * (c.reg_source + c.reg_target) + config.lambda_res * c.fss;
}

/// combine_losses on plain numbers; throws naming the first non-finite
/// component.
double total_loss(const LossComponents<double>& c, const TrainConfig& config);

struct AlphaSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct StepReport {
  std::string phase;  // "pretrain" or "train"
  int epoch = 0;
  int64_t step = 0;
  LossComponents<double> losses;
  double gp = 0.0;
  double total = 0.0;
  std::optional<AlphaSummary> alpha;

  nlohmann::json to_json() const;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, StepReport last)
      : std::runtime_error(what), report(std::move(last)) {}
  StepReport report;
};

/// Deterministic generator for a (seed, phase, epoch) triple.
at::Generator make_generator(uint64_t seed, uint64_t phase, uint64_t epoch);

class Trainer {
 public:
  /// Builds fresh modules. The model's input side is config.model.image_size
  /// and the renderer's output side is depth_size.
  Trainer(const TrainConfig& config, int64_t depth_size);

  const TrainConfig& config() const { return config_; }
  PoseNet& model() { return model_; }
  DepthRenderer& renderer() { return renderer_; }
  CriticNet& critic() { return critic_; }
  torch::optim::Adam& main_optimizer() { return *main_opt_; }
  torch::optim::Adam& critic_optimizer() { return *critic_opt_; }
  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }

  /// One source-only update: l_res * L25 + l_reg * reg (+ FSS source terms).
  StepReport pretrain_step(const Batch& source);

  /// n_critic critic updates followed by one main update.
  StepReport train_step(const Batch& source, const Batch& target, at::Generator& gen);

  using StepSink = std::function<void(const StepReport&)>;

  /// Runs the remaining pretraining epochs over the source set.
  void pretrain(const Dataset& source, const StepSink& sink = {});
  /// One pass over the source set (state().pretrain_epoch), then advances it.
  void pretrain_epoch(const Dataset& source, const StepSink& sink = {});

  /// Runs one adversarial/joint epoch (state().train_epoch) and advances it.
  void train_epoch(const Dataset& source, const Dataset& target, const StepSink& sink = {});

  void save(const std::filesystem::path& path) const;
  /// Restores modules, optimizers and epoch counters. The stored config must
  /// match this trainer's config.
  void load(const std::filesystem::path& path);

 private:
  TrainConfig config_;
  int64_t depth_size_;
  PoseNet model_{nullptr};
  DepthRenderer renderer_{nullptr};
  CriticNet critic_{nullptr};
  std::unique_ptr<torch::optim::Adam> main_opt_, critic_opt_;
  TrainerState state_;
  // step index stamped on the next report
  int64_t step_index_ = 0;
};

struct RunPaths {
  std::filesystem::path metrics;     // metrics.jsonl
  std::filesystem::path checkpoint;  // checkpoint.pt (latest epoch)
};

struct RunOptions {
  std::optional<std::filesystem::path> resume;
  // called after every epoch-level checkpoint with its path
  std::function<void(const std::filesystem::path&)> on_checkpoint;
  // keep a copy of every epoch checkpoint as checkpoint_<phase>_<epoch>.pt
  bool keep_epoch_checkpoints = false;
};

struct RunResult {
  RunPaths paths;
  std::optional<EvalReport> final_eval;
};

/// pretrain -> balanced train epochs with periodic evaluation on target_test.
/// Writes metrics.jsonl and checkpoint.pt under output_dir. A resumed run
/// appends to the existing metrics log.
RunResult run(const TrainConfig& config, const Dataset& source, const Dataset& target_train,
              const Dataset* target_test, const std::filesystem::path& output_dir,
              const RunOptions& options = {});

}  // namespace awh
