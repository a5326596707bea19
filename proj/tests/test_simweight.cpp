#include "awh/simweight.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace awh;

namespace {

// Independent loop-based cosine of batch-mean channel maps.
std::vector<double> brute_alpha(const torch::Tensor& s, const torch::Tensor& t) {
  const auto a = s.to(torch::kFloat64).contiguous();
  const auto b = t.to(torch::kFloat64).contiguous();
  const auto B1 = a.size(0), B2 = b.size(0), C = a.size(1), H = a.size(2), W = a.size(3);
  const auto A = a.accessor<double, 4>();
  const auto Bt = b.accessor<double, 4>();
  std::vector<double> out;
  for (int64_t c = 0; c < C; ++c) {
    std::vector<double> ms(H * W, 0.0), mt(H * W, 0.0);
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        for (int64_t n = 0; n < B1; ++n) ms[y * W + x] += A[n][c][y][x] / B1;
        for (int64_t n = 0; n < B2; ++n) mt[y * W + x] += Bt[n][c][y][x] / B2;
      }
    double dot = 0, ns = 0, nt = 0;
    for (int64_t i = 0; i < H * W; ++i) {
      dot += ms[i] * mt[i];
      ns += ms[i] * ms[i];
      nt += mt[i] * mt[i];
    }
    out.push_back(ns == 0 || nt == 0 ? 0.0 : dot / std::sqrt(ns * nt));
  }
  return out;
}

torch::Tensor f64(std::vector<double> v, std::vector<int64_t> shape) {
  return torch::tensor(v, torch::kFloat64).view(shape);
}

}  // namespace

TEST(ChannelSimilarity, HandComputedCase) {
  const FeatureMap s{f64({1, 0, 0, 1}, {1, 1, 2, 2}), Domain::Source};
  const FeatureMap t{f64({1, 1, 0, 0}, {1, 1, 2, 2}), Domain::Target};
  const auto w = channel_similarity(s, t);
  EXPECT_NEAR(w.alpha[0].item<double>(), 0.5, 1e-12);
}

TEST(ChannelSimilarity, IdenticalInputsGiveOne) {
  auto gen = awh::testing::cpu_gen(1);
  const auto z = torch::randn({4, 6, 5, 5}, gen, torch::kFloat64);
  const auto w = channel_similarity({z, Domain::Source}, {z.clone(), Domain::Target});
  for (int64_t c = 0; c < 6; ++c) EXPECT_NEAR(w.alpha[c].item<double>(), 1.0, 1e-12);
}

TEST(ChannelSimilarity, DisjointSupportGivesZero) {
  const FeatureMap s{f64({3, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 3, 3}), Domain::Source};
  const FeatureMap t{f64({0, 0, 0, 0, 2, 5, 0, 1, 1}, {1, 1, 3, 3}), Domain::Target};
  EXPECT_EQ(channel_similarity(s, t).alpha[0].item<double>(), 0.0);
}

TEST(ChannelSimilarity, ZeroChannelGivesZero) {
  auto gen = awh::testing::cpu_gen(2);
  auto s = torch::randn({2, 3, 4, 4}, gen, torch::kFloat64);
  s.select(1, 1).zero_();
  const auto t = torch::randn({2, 3, 4, 4}, gen, torch::kFloat64);
  const auto a = channel_similarity({s, Domain::Source}, {t, Domain::Target}).alpha;
  EXPECT_EQ(a[1].item<double>(), 0.0);
  EXPECT_TRUE(torch::isfinite(a).all().item<bool>());
}

TEST(ChannelSimilarity, MatchesBruteForceBoundedSymmetricScaleInvariant) {
  auto gen = awh::testing::cpu_gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = torch::randn({3, 8, 4, 4}, gen, torch::kFloat64) * (1 + trial);
    const auto t = torch::randn({5, 8, 4, 4}, gen, torch::kFloat64) + 0.3;
    const auto a = channel_similarity({s, Domain::Source}, {t, Domain::Target}).alpha;
    const auto oracle = brute_alpha(s, t);
    const auto swapped = channel_similarity({t, Domain::Source}, {s, Domain::Target}).alpha;
    auto scaled_s = s.clone();
    scaled_s.select(1, 2).mul_(7.5);
    const auto scaled = channel_similarity({scaled_s, Domain::Source}, {t, Domain::Target}).alpha;
    for (int64_t c = 0; c < 8; ++c) {
      const double v = a[c].item<double>();
      EXPECT_NEAR(v, oracle[c], 1e-12);
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      EXPECT_NEAR(swapped[c].item<double>(), v, 1e-12);
    }
    EXPECT_NEAR(scaled[2].item<double>(), a[2].item<double>(), 1e-12);
  }
}

TEST(ChannelSimilarity, DetachedByDefault) {
  auto s = torch::randn({2, 4, 3, 3}, torch::kFloat64).requires_grad_(true);
  auto t = torch::randn({2, 4, 3, 3}, torch::kFloat64).requires_grad_(true);
  const auto a = channel_similarity({s, Domain::Source}, {t, Domain::Target}).alpha;
  EXPECT_FALSE(a.requires_grad());
  const auto d = channel_similarity_differentiable({s, Domain::Source}, {t, Domain::Target}).alpha;
  EXPECT_TRUE(d.requires_grad());
  EXPECT_TRUE(torch::allclose(a, d.detach()));
}

TEST(ChannelSimilarity, RejectsShapeAndTagErrors) {
  const auto a = torch::zeros({1, 2, 3, 3});
  const auto b = torch::zeros({1, 3, 3, 3});
  EXPECT_THROW(channel_similarity({a, Domain::Source}, {b, Domain::Target}), std::invalid_argument);
  EXPECT_THROW(channel_similarity({a, Domain::Target}, {a, Domain::Target}), std::invalid_argument);
}

TEST(ApplyWeights, Examples) {
  auto gen = awh::testing::cpu_gen(4);
  const auto z = torch::randn({2, 3, 4, 4}, gen, torch::kFloat64);
  const FeatureMap f{z, Domain::Source};
  EXPECT_TRUE(torch::equal(apply_weights(f, {torch::ones({3}, torch::kFloat64)}).values, z));
  EXPECT_EQ(apply_weights(f, {torch::zeros({3}, torch::kFloat64)}).values.abs().sum().item<double>(), 0.0);
  const FeatureMap one{z.slice(1, 0, 1), Domain::Source};
  const auto halved = apply_weights(one, {torch::tensor({0.5}, torch::kFloat64)}).values;
  EXPECT_TRUE(torch::equal(halved, one.values * 0.5));
  EXPECT_THROW(apply_weights(f, {torch::ones({2}, torch::kFloat64)}), std::invalid_argument);
}

TEST(ApplyWeights, NormScalesWithAbsAlphaAndIsDifferentiable) {
  auto gen = awh::testing::cpu_gen(5);
  auto z = torch::randn({2, 4, 3, 3}, gen, torch::kFloat64).requires_grad_(true);
  const auto alpha = torch::tensor({-0.9, 0.1, 0.5, 1.0}, torch::kFloat64);
  const auto out = apply_weights({z, Domain::Target}, {alpha}).values;
  for (int64_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(out.select(1, c).norm().item<double>(),
                std::abs(alpha[c].item<double>()) * z.select(1, c).norm().item<double>(), 1e-12);
  }
  out.sum().backward();
  EXPECT_TRUE(torch::allclose(z.grad().select(1, 0), torch::full({2, 3, 3}, -0.9, torch::kFloat64)));
}
