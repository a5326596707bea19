#include "awh/simweight.hpp"

#include <stdexcept>
#include <string>

namespace awh {

std::string_view to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

Domain domain_from_string(std::string_view s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw std::invalid_argument("unknown domain tag '" + std::string(s) + "'");
}

void FeatureMap::validate() const {
  if (!values.defined() || values.dim() != 4) {
    throw std::invalid_argument("feature map must be a 4-D tensor B x C x H x W");
  }
  if (values.size(0) < 1 || values.size(1) < 1 || values.size(2) < 1 || values.size(3) < 1) {
    throw std::invalid_argument("feature map has an empty dimension");
  }
}

namespace {

void check_pair(const FeatureMap& z_s, const FeatureMap& z_t) {
  z_s.validate();
  z_t.validate();
  if (z_s.domain != Domain::Source || z_t.domain != Domain::Target) {
    throw std::invalid_argument("channel_similarity expects (source, target) feature maps");
  }
  if (z_s.values.sizes().slice(1) != z_t.values.sizes().slice(1)) {
    throw std::invalid_argument("channel_similarity: C x H x W mismatch between domains");
  }
}

torch::Tensor normalized_channel_maps(const torch::Tensor& z) {
  // B x C x H x W -> C x (H*W), unit L2 norm per row; zero rows stay zero.
  const auto reduced = z.mean(0).flatten(1);
  const auto norms = reduced.norm(2, 1, /*keepdim=*/true);
  const auto safe = torch::where(norms > 0, norms, torch::ones_like(norms));
  return reduced / safe;
}

torch::Tensor similarity(const torch::Tensor& s, const torch::Tensor& t) {
  return (normalized_channel_maps(s) * normalized_channel_maps(t)).sum(1);
}

}  // namespace

ChannelWeights channel_similarity(const FeatureMap& z_s, const FeatureMap& z_t) {
  check_pair(z_s, z_t);
  torch::NoGradGuard no_grad;
  return {similarity(z_s.values.detach(), z_t.values.detach())};
}

ChannelWeights channel_similarity_differentiable(const FeatureMap& z_s, const FeatureMap& z_t) {
  check_pair(z_s, z_t);
  return {similarity(z_s.values, z_t.values)};
}

FeatureMap apply_weights(const FeatureMap& z, const ChannelWeights& w) {
  z.validate();
  if (!w.alpha.defined() || w.alpha.dim() != 1 || w.alpha.size(0) != z.channels()) {
    throw std::invalid_argument("apply_weights: weight vector length must equal channel count");
  }
  const auto alpha = w.alpha.to(z.values.dtype()).view({1, -1, 1, 1});
  return {z.values * alpha, z.domain};
}

}  // namespace awh
