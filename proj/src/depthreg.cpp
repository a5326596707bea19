#include "awh/depthreg.hpp"

#include "awh/geometry25d.hpp"

#include <stdexcept>

namespace awh {

void DepthNormSpec::validate() const {
  if (!(d_range > 0.0)) throw std::invalid_argument("depth normalization: d_range must be > 0");
}

torch::Tensor normalize_depth(const torch::Tensor& raw_mm, const torch::Tensor& mask,
                              const DepthNormSpec& spec) {
  spec.validate();
  if (raw_mm.sizes() != mask.sizes()) {
    throw std::invalid_argument("normalize_depth: depth and mask sizes differ");
  }
  const auto fg = mask.to(torch::kBool);
  const auto normalized = ((spec.d_max - raw_mm) / spec.d_range).clamp(0.0, 1.0);
  return torch::where(fg, normalized, torch::zeros_like(normalized));
}

DepthRendererImpl::DepthRendererImpl(const DepthRendererOptions& options) : options_(options) {
  if (options.depth_size < 1 || options.image_size < 1 || !(options.sigma > 0.0)) {
    throw std::invalid_argument("depth renderer: invalid options");
  }
  const int64_t in = static_cast<int64_t>(kNumKeypoints) + 1;
  const auto opts = [](int64_t i, int64_t o) {
    return torch::nn::Conv2dOptions(i, o, 3).padding(1);
  };
  conv1_ = register_module("conv1", torch::nn::Conv2d(opts(in, options.hidden)));
  conv2_ = register_module("conv2", torch::nn::Conv2d(opts(options.hidden, options.hidden)));
  conv3_ = register_module("conv3", torch::nn::Conv2d(opts(options.hidden, 1)));
}

torch::Tensor DepthRendererImpl::splat(const torch::Tensor& uv, const torch::Tensor& zn) const {
  if (uv.dim() != 3 || uv.size(2) != 2 || zn.dim() != 2 || zn.size(0) != uv.size(0) ||
      zn.size(1) != uv.size(1)) {
    throw std::invalid_argument("depth renderer: expected uv B x K x 2 and zn B x K");
  }
  const auto d = options_.depth_size;
  const double scale = static_cast<double>(d) / static_cast<double>(options_.image_size);
  // continuous pixel coordinate -> depth-cell index coordinate
  const auto cells = uv * scale - 0.5;
  const auto grid = torch::arange(d, uv.options());
  const auto dx = grid.view({1, 1, 1, d}) - cells.select(2, 0).unsqueeze(-1).unsqueeze(-1);
  const auto dy = grid.view({1, 1, d, 1}) - cells.select(2, 1).unsqueeze(-1).unsqueeze(-1);
  const auto g = torch::exp(-(dx * dx + dy * dy) / (2.0 * options_.sigma * options_.sigma));
  const auto amplitude = g * zn.unsqueeze(-1).unsqueeze(-1);
  const auto occupancy = std::get<0>(g.max(1, /*keepdim=*/true));
  return torch::cat({amplitude, occupancy}, 1);
}

torch::Tensor DepthRendererImpl::forward(const torch::Tensor& uv, const torch::Tensor& zn) {
  auto h = torch::relu(conv1_(splat(uv, zn)));
  h = torch::relu(conv2_(h));
  return torch::sigmoid(conv3_(h));
}

torch::Tensor loss_depth(const torch::Tensor& rendered, const torch::Tensor& gt) {
  if (rendered.sizes() != gt.sizes()) {
    throw std::invalid_argument("loss_depth: resolution mismatch");
  }
  return (rendered - gt).abs().mean();
}

}  // namespace awh
