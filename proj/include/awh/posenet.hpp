#pragma once

#include "awh/geometry25d.hpp"
#include "awh/simweight.hpp"

#include <torch/torch.h>

#include <optional>
#include <vector>

namespace awh {

struct HourglassConfig {
  int stacks = 2;
  int64_t latent_channels = 64;
  // Square RGB input side. Heatmaps live at image_size / 4, the latent
  // feature map at image_size / 8.
  int64_t image_size = 128;
  // down/up levels per hourglass stack
  int levels = 3;
  bool skip_connections = true;
  bool intermediate_tap = false;

  int64_t latent_size() const { return image_size / 8; }
  int64_t heatmap_size() const { return image_size / 4; }
  void validate() const;
};

/// Per-keypoint localization logits and latent depth maps, each B x K x Hh x Wh.
struct LatentHeatmaps25D {
  torch::Tensor heat2d;
  torch::Tensor depthmaps;
};

/// Batched 2.5D pose: uv is B x K x 2 in input pixels, zn is B x K.
struct Pose25DBatch {
  torch::Tensor uv;
  torch::Tensor zn;
};

Pose25DBatch to_batch(const std::vector<Pose25D>& poses, torch::Dtype dtype = torch::kFloat32);
std::vector<Pose25D> from_batch(const Pose25DBatch& batch);

/// Softmax over each map followed by the expected cell-center coordinate,
/// scaled to a square image of side image_size. Returns B x K x 2 (x, y) and
/// writes the normalized maps to `probs` when given.
torch::Tensor soft_argmax(const torch::Tensor& logits, int64_t image_size,
                          torch::Tensor* probs = nullptr);

/// Soft-argmax readout of 2D locations plus the probability-weighted latent depth.
Pose25DBatch readout(const LatentHeatmaps25D& maps, int64_t image_size);

/// Batch mean of sum_k ( |du| + |dv| + lambda_alpha |dz| ).
torch::Tensor loss_25d(const Pose25DBatch& pred, const Pose25DBatch& gt, double lambda_alpha);

/// The 2D part of loss_25d, for target-domain weak labels (gt_uv: B x K x 2).
torch::Tensor loss_2d(const torch::Tensor& pred_uv, const torch::Tensor& gt_uv);

class ResidualImpl : public torch::nn::Module {
 public:
  ResidualImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
};
TORCH_MODULE(Residual);

/// One hourglass: recursive down/up path with a same-resolution branch at
/// every level, merged by addition after bilinear upsampling.
class HourglassImpl : public torch::nn::Module {
 public:
  HourglassImpl(int levels, int64_t channels, bool skip_connections);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor level_forward(int level, const torch::Tensor& x);

  int levels_;
  bool skip_;
  torch::nn::ModuleList upper_, lower_in_, lower_out_;
  Residual bottom_{nullptr};
};
TORCH_MODULE(Hourglass);

struct PoseNetOutput {
  torch::Tensor latent;                   // B x C x H x W
  std::vector<LatentHeatmaps25D> stacks;  // one per hourglass stack
  Pose25DBatch pose;                      // readout of the last stack
};

class PoseNetImpl : public torch::nn::Module {
 public:
  explicit PoseNetImpl(const HourglassConfig& config = {});

  /// images: B x 3 x S x S in [0, 1] -> B x C x S/8 x S/8
  torch::Tensor encode(const torch::Tensor& images);
  FeatureMap encode(const torch::Tensor& images, Domain domain);

  /// Stacked hourglass decoder from the latent map to per-stack heatmaps.
  std::vector<LatentHeatmaps25D> decode(const torch::Tensor& latent);

  /// decode + readout of the final stack
  std::pair<LatentHeatmaps25D, Pose25DBatch> regress(const torch::Tensor& latent);

  PoseNetOutput forward(const torch::Tensor& images);

  /// First-stack maps for intermediate supervision; nullopt when the tap is
  /// off.
  std::optional<LatentHeatmaps25D> intermediate_outputs(const PoseNetOutput& out) const;

  const HourglassConfig& config() const { return config_; }

 private:
  HourglassConfig config_;
  torch::nn::Conv2d stem_{nullptr}, down1_{nullptr}, down2_{nullptr};
  torch::nn::GroupNorm stem_norm_{nullptr};
  Residual enc_res1_{nullptr}, enc_res2_{nullptr};
  torch::nn::ModuleList hourglasses_, post_, head_hidden_, head_out_, merge_feat_, merge_maps_;
};
TORCH_MODULE(PoseNet);

}  // namespace awh
