#pragma once

#include <torch/torch.h>

namespace awh {

/// Far bound and extent of the hand's depth, both in mm.
struct DepthNormSpec {
  double d_max = 0.0;
  double d_range = 1.0;

  void validate() const;
};

/// Per-pixel (d_max - d) / d_range clamped to [0, 1] on the foreground, 0 on
/// the background. raw: H x W depth in mm, mask: H x W foreground flags.
torch::Tensor normalize_depth(const torch::Tensor& raw_mm, const torch::Tensor& mask,
                              const DepthNormSpec& spec);

struct DepthRendererOptions {
  int64_t image_size = 128;  // pixel frame of the 2D keypoints
  int64_t depth_size = 32;   // output resolution
  double sigma = 1.5;        // splat radius, in depth-map cells
  int64_t hidden = 32;
};

/// Small generator rendering a normalized depth image from 2D keypoints and
/// normalized root-relative depths. Input encoding: one Gaussian splat per
/// keypoint with amplitude z_n, plus one unit-amplitude occupancy channel.
class DepthRendererImpl : public torch::nn::Module {
 public:
  explicit DepthRendererImpl(const DepthRendererOptions& options = {});

  /// uv: B x K x 2 pixels, zn: B x K -> B x 1 x D x D in [0, 1]
  torch::Tensor forward(const torch::Tensor& uv, const torch::Tensor& zn);

  /// The conditioning tensor B x (K + 1) x D x D fed to the convolutions.
  torch::Tensor splat(const torch::Tensor& uv, const torch::Tensor& zn) const;

  const DepthRendererOptions& options() const { return options_; }

 private:
  DepthRendererOptions options_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(DepthRenderer);

/// Mean absolute difference over all pixels.
torch::Tensor loss_depth(const torch::Tensor& rendered, const torch::Tensor& gt);

}  // namespace awh
