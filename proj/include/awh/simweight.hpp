#pragma once

#include <torch/torch.h>

#include <string_view>

namespace awh {

enum class Domain { Source, Target };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);

/// Batched latent features, shape B x C x H x W.
struct FeatureMap {
  torch::Tensor values;
  Domain domain = Domain::Source;

  int64_t batch() const { return values.size(0); }
  int64_t channels() const { return values.size(1); }
  void validate() const;
};

/// Per-channel similarity scores, shape C.
struct ChannelWeights {
  torch::Tensor alpha;
};

/// Cosine similarity, channel by channel, between the batch-mean maps of the
/// two domains. Each reduced H x W map is L2-normalized; an all-zero map
/// normalizes to zero and yields alpha = 0. The result carries no autograd
/// history.
ChannelWeights channel_similarity(const FeatureMap& z_s, const FeatureMap& z_t);

/// Same metric, but differentiable through both feature maps.
ChannelWeights channel_similarity_differentiable(const FeatureMap& z_s, const FeatureMap& z_t);

/// Scales channel i of z by alpha^i. Differentiable with respect to z.
FeatureMap apply_weights(const FeatureMap& z, const ChannelWeights& w);

}  // namespace awh
