#pragma once

#include "awh/posenet.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

namespace awh {

struct GenConfig {
  uint64_t seed = 7;
  int64_t image_size = 128;
  int64_t depth_size = 32;
  int64_t n_source_train = 8000;
  int64_t n_target_train = 1000;
  int64_t n_target_test = 1000;

  void validate() const;
};

/// Losses attachable to the first hourglass stack: source 2D, source depth
/// ("3D"), target 2D.
enum class FssLoss { R2D, R3D, S2D };

struct TrainConfig {
  double lambda_wd = 1e-2;
  double lambda_res = 1.0;
  double lambda_reg = 0.1;
  double lambda_gp = 10.0;
  double lambda_alpha = 1.0;
  double lr_main = 1e-4;
  double lr_critic = 1e-4;
  int n_critic = 5;
  int64_t batch_size = 16;
  int pretrain_epochs = 1;
  int train_epochs = 2;
  uint64_t seed = 0;
  bool use_awh = true;
  bool use_plain_wd = false;
  bool fss_tap = false;
  std::set<FssLoss> fss_losses;
  double constant_c = 1.0;
  // backpropagate through the similarity weights instead of detaching them
  bool alpha_grad = false;
  // clamp negative similarity weights to zero before weighting
  bool alpha_clamp = false;
  // evaluate on the target test split every this many epochs (0 disables)
  int eval_interval = 1;
  // cap on steps per epoch, 0 for a full pass
  int64_t max_steps_per_epoch = 0;
  int64_t critic_hidden = 128;
  int64_t depth_hidden = 32;
  HourglassConfig model;

  void validate() const;
  bool adversarial() const { return use_awh || use_plain_wd; }
};

std::string to_string(FssLoss loss);
FssLoss fss_loss_from_string(const std::string& s);

nlohmann::json to_json(const GenConfig& c);
nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
GenConfig gen_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct ConfigFile {
  GenConfig generate;
  TrainConfig train;
};

/// {"generate": {...}, "train": {..., "model": {...}}}
ConfigFile load_config(const std::filesystem::path& path);

}  // namespace awh
