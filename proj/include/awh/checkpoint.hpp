#pragma once

#include "awh/config.hpp"
#include "awh/critic.hpp"
#include "awh/depthreg.hpp"
#include "awh/posenet.hpp"

#include <torch/torch.h>

#include <filesystem>

namespace awh {

inline constexpr const char* kCheckpointFormat = "awh-ckpt-v1";

struct TrainerState {
  // next epoch to run in each phase
  int pretrain_epoch = 0;
  int train_epoch = 0;
};

struct CheckpointMeta {
  TrainConfig config;  // config.model is the embedded network description
  int64_t depth_size = 0;
  TrainerState state;
};

struct CheckpointParts {
  PoseNet* model = nullptr;
  DepthRenderer* renderer = nullptr;
  CriticNet* critic = nullptr;
  torch::optim::Optimizer* main_opt = nullptr;
  torch::optim::Optimizer* critic_opt = nullptr;
};

/// One archive: format tag, JSON metadata, and every non-null part.
void write_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                      const CheckpointParts& parts);

/// Checks the format tag and parses the metadata.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Loads every non-null part; throws if the archive lacks one.
void read_checkpoint(const std::filesystem::path& path, const CheckpointParts& parts);

struct LoadedModel {
  PoseNet model{nullptr};
  CheckpointMeta meta;
};

/// Rebuilds the pose network described by the archive and loads its weights.
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace awh
