#include "awh/posenet.hpp"

#include <stdexcept>
#include <string>

namespace F = torch::nn::functional;

namespace awh {

namespace {

constexpr int64_t K = static_cast<int64_t>(kNumKeypoints);

bool is_power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

int64_t groups_for(int64_t channels) {
  int64_t g = std::min<int64_t>(8, channels);
  while (channels % g != 0) --g;
  return g;
}

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

}  // namespace

void HourglassConfig::validate() const {
  if (stacks < 1) throw std::invalid_argument("hourglass: stacks must be >= 1");
  if (!is_power_of_two(latent_channels) || latent_channels < 8) {
    throw std::invalid_argument("hourglass: latent_channels must be a power of two >= 8");
  }
  if (!is_power_of_two(image_size) || latent_size() < 8) {
    throw std::invalid_argument("hourglass: image_size must be a power of two >= 64");
  }
  if (levels < 1 || (latent_size() >> levels) < 1) {
    throw std::invalid_argument("hourglass: too many levels for the latent resolution");
  }
  if (intermediate_tap && stacks < 2) {
    throw std::invalid_argument("hourglass: intermediate tap requires at least two stacks");
  }
}

Pose25DBatch to_batch(const std::vector<Pose25D>& poses, torch::Dtype dtype) {
  const auto n = static_cast<int64_t>(poses.size());
  auto uv = torch::empty({n, K, 2}, torch::kFloat64);
  auto zn = torch::empty({n, K}, torch::kFloat64);
  auto uv_a = uv.accessor<double, 3>();
  auto zn_a = zn.accessor<double, 2>();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t k = 0; k < K; ++k) {
      uv_a[b][k][0] = poses[b].pixels[k].x;
      uv_a[b][k][1] = poses[b].pixels[k].y;
      zn_a[b][k] = poses[b].z_norm[k];
    }
  }
  return {uv.to(dtype), zn.to(dtype)};
}

std::vector<Pose25D> from_batch(const Pose25DBatch& batch) {
  const auto uv = batch.uv.detach().to(torch::kFloat64).contiguous();
  const auto zn = batch.zn.detach().to(torch::kFloat64).contiguous();
  auto uv_a = uv.accessor<double, 3>();
  auto zn_a = zn.accessor<double, 2>();
  std::vector<Pose25D> out(static_cast<std::size_t>(uv.size(0)));
  for (int64_t b = 0; b < uv.size(0); ++b) {
    for (int64_t k = 0; k < K; ++k) {
      out[b].pixels[k] = {uv_a[b][k][0], uv_a[b][k][1]};
      out[b].z_norm[k] = zn_a[b][k];
    }
  }
  return out;
}

torch::Tensor soft_argmax(const torch::Tensor& logits, int64_t image_size, torch::Tensor* probs) {
  if (logits.dim() != 4 || logits.size(2) != logits.size(3)) {
    throw std::invalid_argument("soft_argmax expects square B x K x H x W maps");
  }
  const auto side = logits.size(3);
  const auto p = torch::softmax(logits.flatten(2), -1).view_as(logits);
  const double cell = static_cast<double>(image_size) / static_cast<double>(side);
  const auto centers = (torch::arange(side, logits.options()) + 0.5) * cell;
  const auto x = (p.sum(2) * centers).sum(-1);
  const auto y = (p.sum(3) * centers).sum(-1);
  if (probs != nullptr) *probs = p;
  return torch::stack({x, y}, -1);
}

Pose25DBatch readout(const LatentHeatmaps25D& maps, int64_t image_size) {
  torch::Tensor probs;
  auto uv = soft_argmax(maps.heat2d, image_size, &probs);
  auto zn = (probs * maps.depthmaps).sum({2, 3});
  return {uv, zn};
}

torch::Tensor loss_25d(const Pose25DBatch& pred, const Pose25DBatch& gt, double lambda_alpha) {
  if (pred.uv.sizes() != gt.uv.sizes() || pred.zn.sizes() != gt.zn.sizes()) {
    throw std::invalid_argument("loss_25d: prediction and ground truth shapes differ");
  }
  const auto l2d = (pred.uv - gt.uv).abs().sum({1, 2});
  const auto ldepth = (pred.zn - gt.zn).abs().sum(1);
  return (l2d + lambda_alpha * ldepth).mean();
}

torch::Tensor loss_2d(const torch::Tensor& pred_uv, const torch::Tensor& gt_uv) {
  if (pred_uv.sizes() != gt_uv.sizes()) {
    throw std::invalid_argument("loss_2d: prediction and ground truth shapes differ");
  }
  return (pred_uv - gt_uv).abs().sum({1, 2}).mean();
}

ResidualImpl::ResidualImpl(int64_t in_channels, int64_t out_channels) {
  norm1_ = register_module("norm1", torch::nn::GroupNorm(groups_for(in_channels), in_channels));
  conv1_ = register_module("conv1", conv(in_channels, out_channels, 3));
  norm2_ = register_module("norm2", torch::nn::GroupNorm(groups_for(out_channels), out_channels));
  conv2_ = register_module("conv2", conv(out_channels, out_channels, 3));
  if (in_channels != out_channels) {
    skip_ = register_module("skip", conv(in_channels, out_channels, 1));
  }
}

torch::Tensor ResidualImpl::forward(const torch::Tensor& x) {
  auto h = conv1_(torch::relu(norm1_(x)));
  h = conv2_(torch::relu(norm2_(h)));
  return h + (skip_ ? skip_(x) : x);
}

HourglassImpl::HourglassImpl(int levels, int64_t channels, bool skip_connections)
    : levels_(levels), skip_(skip_connections) {
  upper_ = register_module("upper", torch::nn::ModuleList());
  lower_in_ = register_module("lower_in", torch::nn::ModuleList());
  lower_out_ = register_module("lower_out", torch::nn::ModuleList());
  for (int l = 0; l < levels; ++l) {
    if (skip_) upper_->push_back(Residual(channels, channels));
    lower_in_->push_back(Residual(channels, channels));
    lower_out_->push_back(Residual(channels, channels));
  }
  bottom_ = register_module("bottom", Residual(channels, channels));
}

torch::Tensor HourglassImpl::level_forward(int level, const torch::Tensor& x) {
  auto low = lower_in_[level]->as<Residual>()->forward(torch::max_pool2d(x, 2));
  low = level + 1 < levels_ ? level_forward(level + 1, low) : bottom_(low);
  low = lower_out_[level]->as<Residual>()->forward(low);
  auto up = F::interpolate(low, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{x.size(2), x.size(3)})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
  if (skip_) up = up + upper_[level]->as<Residual>()->forward(x);
  return up;
}

torch::Tensor HourglassImpl::forward(const torch::Tensor& x) { return level_forward(0, x); }

PoseNetImpl::PoseNetImpl(const HourglassConfig& config) : config_(config) {
  config_.validate();
  const int64_t c = config_.latent_channels;
  stem_ = register_module("stem", conv(3, 32, 7, 2));
  stem_norm_ = register_module("stem_norm", torch::nn::GroupNorm(8, 32));
  down1_ = register_module("down1", conv(32, 64, 3, 2));
  enc_res1_ = register_module("enc_res1", Residual(64, 64));
  down2_ = register_module("down2", conv(64, c, 3, 2));
  enc_res2_ = register_module("enc_res2", Residual(c, c));

  hourglasses_ = register_module("hourglasses", torch::nn::ModuleList());
  post_ = register_module("post", torch::nn::ModuleList());
  head_hidden_ = register_module("head_hidden", torch::nn::ModuleList());
  head_out_ = register_module("head_out", torch::nn::ModuleList());
  merge_feat_ = register_module("merge_feat", torch::nn::ModuleList());
  merge_maps_ = register_module("merge_maps", torch::nn::ModuleList());
  for (int s = 0; s < config_.stacks; ++s) {
    hourglasses_->push_back(Hourglass(config_.levels, c, config_.skip_connections));
    post_->push_back(torch::nn::Sequential(Residual(c, c), conv(c, c, 1),
                                           torch::nn::GroupNorm(groups_for(c), c),
                                           torch::nn::ReLU()));
    head_hidden_->push_back(conv(c, c, 3));
    head_out_->push_back(conv(c, 2 * K, 1));
    if (s + 1 < config_.stacks) {
      merge_feat_->push_back(conv(c, c, 1));
      merge_maps_->push_back(conv(2 * K, c, 1));
    }
  }
}

torch::Tensor PoseNetImpl::encode(const torch::Tensor& images) {
  const auto s = config_.image_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s) {
    throw std::invalid_argument("encode: expected B x 3 x " + std::to_string(s) + " x " +
                                std::to_string(s) + " images");
  }
  auto h = torch::relu(stem_norm_(stem_(images)));
  h = enc_res1_(down1_(h));
  return enc_res2_(down2_(h));
}

FeatureMap PoseNetImpl::encode(const torch::Tensor& images, Domain domain) {
  return {encode(images), domain};
}

std::vector<LatentHeatmaps25D> PoseNetImpl::decode(const torch::Tensor& latent) {
  const auto hs = config_.heatmap_size();
  std::vector<LatentHeatmaps25D> out;
  out.reserve(static_cast<std::size_t>(config_.stacks));
  auto x = latent;
  for (int s = 0; s < config_.stacks; ++s) {
    auto f = hourglasses_[s]->as<Hourglass>()->forward(x);
    f = post_[s]->as<torch::nn::Sequential>()->forward(f);
    auto up = F::interpolate(f, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{hs, hs})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
    auto hidden = torch::relu(head_hidden_[s]->as<torch::nn::Conv2d>()->forward(up));
    auto maps = head_out_[s]->as<torch::nn::Conv2d>()->forward(hidden);
    out.push_back({maps.narrow(1, 0, K), maps.narrow(1, K, K)});
    if (s + 1 < config_.stacks) {
      x = x + merge_feat_[s]->as<torch::nn::Conv2d>()->forward(f) +
          merge_maps_[s]->as<torch::nn::Conv2d>()->forward(torch::avg_pool2d(maps, 2));
    }
  }
  return out;
}

std::pair<LatentHeatmaps25D, Pose25DBatch> PoseNetImpl::regress(const torch::Tensor& latent) {
  auto stacks = decode(latent);
  auto pose = readout(stacks.back(), config_.image_size);
  return {stacks.back(), pose};
}

PoseNetOutput PoseNetImpl::forward(const torch::Tensor& images) {
  PoseNetOutput out;
  out.latent = encode(images);
  out.stacks = decode(out.latent);
  out.pose = readout(out.stacks.back(), config_.image_size);
  return out;
}

std::optional<LatentHeatmaps25D> PoseNetImpl::intermediate_outputs(const PoseNetOutput& out) const {
  if (!config_.intermediate_tap) return std::nullopt;
  return out.stacks.front();
}

}  // namespace awh
