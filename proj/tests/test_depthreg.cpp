#include "awh/depthreg.hpp"
#include "awh/oracle.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace awh;
using awh::testing::cpu_gen;

TEST(NormalizeDepth, Examples) {
  const DepthNormSpec spec{600.0, 100.0};
  const auto raw = torch::tensor({600.0, 500.0, 550.0, 700.0, 450.0, 580.0}, torch::kFloat64).view({2, 3});
  const auto mask = torch::tensor({1, 1, 1, 1, 1, 0}, torch::kUInt8).view({2, 3});
  const auto d = normalize_depth(raw, mask, spec);
  EXPECT_EQ(d[0][0].item<double>(), 0.0);
  EXPECT_EQ(d[0][1].item<double>(), 1.0);
  EXPECT_EQ(d[0][2].item<double>(), 0.5);
  EXPECT_EQ(d[1][0].item<double>(), 0.0);  // clamped
  EXPECT_EQ(d[1][1].item<double>(), 1.0);  // clamped
  EXPECT_EQ(d[1][2].item<double>(), 0.0);  // background
}

TEST(NormalizeDepth, RejectsBadRange) {
  const auto raw = torch::zeros({2, 2});
  const auto mask = torch::ones({2, 2}, torch::kUInt8);
  EXPECT_THROW(normalize_depth(raw, mask, {600.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(normalize_depth(raw, mask, {600.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(normalize_depth(raw, torch::ones({3, 2}, torch::kUInt8), {600.0, 1.0}), std::invalid_argument);
}

TEST(NormalizeDepth, MonotoneDecreasing) {
  const auto raw = torch::linspace(400.0, 700.0, 301, torch::kFloat64).view({1, -1});
  const auto d = normalize_depth(raw, torch::ones_like(raw, torch::kUInt8), {650.0, 200.0});
  EXPECT_TRUE((d.slice(1, 1) <= d.slice(1, 0, -1)).all().item<bool>());
}

TEST(LossDepth, Examples) {
  const auto a = torch::rand({2, 1, 8, 8});
  EXPECT_EQ(loss_depth(a, a).item<double>(), 0.0);
  EXPECT_EQ(loss_depth(torch::zeros({1, 1, 4, 4}), torch::ones({1, 1, 4, 4})).item<double>(), 1.0);
  auto half = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
  half.slice(2, 0, 2).fill_(0.5);
  EXPECT_DOUBLE_EQ(loss_depth(half, torch::zeros_like(half)).item<double>(), 0.25);
  EXPECT_THROW(loss_depth(torch::zeros({1, 1, 4, 4}), torch::zeros({1, 1, 8, 8})), std::invalid_argument);
}

TEST(LossDepth, SymmetricAndTriangle) {
  auto gen = cpu_gen(1);
  for (int i = 0; i < 50; ++i) {
    const auto a = torch::rand({1, 1, 6, 6}, gen, torch::kFloat64);
    const auto b = torch::rand({1, 1, 6, 6}, gen, torch::kFloat64);
    const auto c = torch::rand({1, 1, 6, 6}, gen, torch::kFloat64);
    const double ab = loss_depth(a, b).item<double>();
    EXPECT_EQ(ab, loss_depth(b, a).item<double>());
    EXPECT_LE(loss_depth(a, c).item<double>(), ab + loss_depth(b, c).item<double>() + 1e-15);
  }
}

TEST(RenderDepth, BoundedDeterministicAndSensitiveToDepth) {
  DepthRendererOptions opts;
  torch::manual_seed(3);
  DepthRenderer r1(opts);
  torch::manual_seed(3);
  DepthRenderer r2(opts);
  auto gen = cpu_gen(3);
  const auto uv = torch::rand({4, 21, 2}, gen) * 128;
  auto zn = (torch::randn({4, 21}, gen) * 5).requires_grad_(true);
  const auto out = r1->forward(uv, zn);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{4, 1, 32, 32}));
  EXPECT_GE(out.min().item<double>(), 0.0);
  EXPECT_LE(out.max().item<double>(), 1.0);
  EXPECT_TRUE(torch::equal(out, r2->forward(uv, zn)));
  loss_depth(out, torch::rand({4, 1, 32, 32}, gen)).backward();
  EXPECT_GT(zn.grad().abs().max().item<double>(), 0.0);
}

TEST(RenderDepth, SplatPeaksAtKeypointCell) {
  DepthRenderer r(DepthRendererOptions{128, 32, 1.5, 8});
  auto uv = torch::zeros({1, 21, 2});
  uv[0][0][0] = 4.0 * 10 + 2.0;  // center of cell (row 20, column 10)
  uv[0][0][1] = 4.0 * 20 + 2.0;
  const auto zn = torch::full({1, 21}, 0.5);
  const auto s = r->splat(uv, zn);
  EXPECT_EQ(s.sizes(), (std::vector<int64_t>{1, 22, 32, 32}));
  EXPECT_NEAR(s[0][0][20][10].item<double>(), 0.5, 1e-6);
  EXPECT_NEAR(s[0][0].max().item<double>(), 0.5, 1e-6);
  EXPECT_NEAR(s[0][21].max().item<double>(), 1.0, 1e-6);
}

TEST(LossDepth, FiniteDifferencesThroughRenderer) {
  const auto check = check_fd_loss_depth(5, 9);
  EXPECT_TRUE(check.pass) << check.detail;
}
