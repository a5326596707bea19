#pragma once

#include "awh/config.hpp"
#include "awh/manifest.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <vector>

namespace awh {

/// What a batch carries. Weak batches (target domain during training) hold
/// 2D keypoints and depth images only.
enum class Supervision { Full, Weak };

struct Batch {
  Domain domain = Domain::Source;
  torch::Tensor images;  // B x 3 x S x S float in [0, 1]
  torch::Tensor uv;      // B x K x 2 ground-truth pixels
  torch::Tensor depth;   // B x 1 x D x D normalized depth images
  std::optional<torch::Tensor> zn;    // B x K normalized root-relative depth
  std::optional<torch::Tensor> kp3d;  // B x K x 3 camera-space mm

  int64_t size() const { return images.size(0); }
  bool carries_3d() const { return zn.has_value() || kp3d.has_value(); }
};

/// A manifest loaded into memory as tensors.
struct Dataset {
  Domain domain = Domain::Source;
  CameraIntrinsics intrinsics;
  NormalizationSpec norm;
  int64_t image_size = 0;
  int64_t depth_size = 0;
  torch::Tensor images;  // N x 3 x S x S uint8
  torch::Tensor depth;   // N x 1 x D x D float
  torch::Tensor uv;      // N x K x 2 float
  torch::Tensor zn;      // N x K float
  torch::Tensor kp3d;    // N x K x 3 double
  torch::Tensor root_z;  // N double
  torch::Tensor bone_d;  // N double

  int64_t size() const { return images.size(0); }

  static Dataset load(const Manifest& manifest, const NormalizationSpec& norm = {});
  static Dataset load(const std::filesystem::path& manifest_path, const NormalizationSpec& norm = {});

  Batch make_batch(const std::vector<int64_t>& indices, Supervision supervision) const;
};

struct GeneratedPaths {
  std::filesystem::path source_train;
  std::filesystem::path target_train;
  std::filesystem::path target_test;
};

/// Renders the three splits under out_dir. Sample i of a split uses the
/// stream (seed, split, i), so output is a pure function of the config.
GeneratedPaths generate_dataset(const GenConfig& config, const std::filesystem::path& out_dir);

}  // namespace awh
