#include "awh/oracle.hpp"

#include "awh/critic.hpp"
#include "awh/depthreg.hpp"
#include "awh/posenet.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace awh {

double empirical_w1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("empirical_w1_1d: needs two nonempty samples of equal size");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

std::vector<double> to_vector(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous().view({-1});
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

// Central differences of f over every element of every tensor in `vars`
// (perturbed in place), compared with the analytic gradients.
double fd_error(const std::vector<torch::Tensor>& vars, const std::function<torch::Tensor()>& f,
                double h = 1e-6) {
  for (const auto& v : vars) {
    if (v.grad().defined()) v.mutable_grad().zero_();
  }
  f().backward();
  std::vector<double> analytic, numeric;
  for (const auto& v : vars) {
    const auto g = v.grad().defined() ? to_vector(v.grad()) : std::vector<double>(v.numel(), 0.0);
    analytic.insert(analytic.end(), g.begin(), g.end());
  }
  torch::NoGradGuard no_grad;
  for (const auto& v : vars) {
    auto flat = v.view({-1});
    for (int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + h;
      double up, down;
      {
        torch::AutoGradMode on(true);
        up = f().item<double>();
      }
      flat[i] = orig - h;
      {
        torch::AutoGradMode on(true);
        down = f().item<double>();
      }
      flat[i] = orig;
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  return relative_error(analytic, numeric);
}

at::Generator cpu_generator(uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

OracleCheck fd_summary(const char* name, const std::vector<double>& errors) {
  const double worst = *std::max_element(errors.begin(), errors.end());
  return {name, worst < 1e-4,
          fmt("worst relative error %.3g over %.0f instances (limit 1e-4)", worst,
              static_cast<double>(errors.size()))};
}

}  // namespace

OracleCheck check_w1_calibration(uint64_t seed) {
  auto gen = cpu_generator(seed);
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  const auto a = torch::randn({4096, 1}, gen, opts);
  const auto b = torch::randn({4096, 1}, gen, opts) + 3.0;
  const double est = estimate_w1(a, b, 1500, seed);
  const double exact = empirical_w1_1d(to_vector(a), to_vector(b));
  const bool pass = est >= 2.7 && est <= 3.3 && std::abs(est - exact) <= 0.3;
  return {"w1_calibration", pass,
          fmt("estimate %.4f, sorted-sample W1 %.4f, closed form 3", est, exact)};
}

OracleCheck check_gp_closed_forms() {
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  const auto linear = [&](std::vector<double> w) {
    CriticNet fd(CriticOptions{static_cast<int64_t>(w.size()), 1, 0, 0.2});
    fd->to(torch::kFloat64);
    torch::NoGradGuard no_grad;
    fd->output_layer()->weight.copy_(torch::tensor(w, opts).view({1, -1}));
    fd->output_layer()->bias.fill_(0.25);
    return fd;
  };
  auto gen = cpu_generator(11);
  const auto s = torch::randn({64, 4}, gen, opts);
  const auto t = torch::randn({64, 4}, gen, opts) + 2.0;
  const auto rates = torch::rand({64}, gen, opts);

  struct Case {
    std::vector<double> w;
    double expected;
  };
  const Case cases[] = {{{0.6, 0.8, 0.0, 0.0}, 0.0}, {{2.0, 2.0, 1.0, 0.0}, 4.0}, {{0.0, 0.0, 0.0, 0.0}, 1.0}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    auto fd = linear(c.w);
    const double gp = gradient_penalty_at(fd, s, t, rates).item<double>();
    pass = pass && std::abs(gp - c.expected) <= 1e-9;
    detail += fmt("gp %.12g (expected %.0f); ", gp, c.expected);
  }
  return {"gp_closed_forms", pass, detail};
}

OracleCheck check_fd_critic_objective(int instances, uint64_t seed) {
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  std::vector<double> errors;
  for (int i = 0; i < instances; ++i) {
    torch::manual_seed(seed * 1000 + static_cast<uint64_t>(i));
    CriticNet fd(CriticOptions{6, 12, 2, 0.2});
    fd->to(torch::kFloat64);
    auto gen = cpu_generator(seed + static_cast<uint64_t>(i));
    const auto s = torch::randn({8, 6}, gen, opts);
    const auto t = torch::randn({8, 6}, gen, opts) + 1.0;
    const auto f = [&] {
      // same interpolation rates on every evaluation
      auto g = cpu_generator(1234 + static_cast<uint64_t>(i));
      return critic_objective(fd, s, t, 10.0, g).combined;
    };
    errors.push_back(fd_error(fd->parameters(), f));
  }
  return fd_summary("fd_critic_objective", errors);
}

OracleCheck check_fd_loss_25d(int instances, uint64_t seed) {
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  constexpr int64_t B = 2, K = kNumKeypoints, H = 4, S = 16;
  std::vector<double> errors;
  for (int i = 0; i < instances; ++i) {
    auto gen = cpu_generator(seed * 7919 + static_cast<uint64_t>(i));
    auto logits = torch::randn({B, K, H, H}, gen, opts).requires_grad_(true);
    auto depth = torch::randn({B, K, H, H}, gen, opts).requires_grad_(true);
    Pose25DBatch gt;
    {
      torch::NoGradGuard no_grad;
      const auto pred = readout({logits, depth}, S);
      // keep every residual at least 1 away from the |.| kink
      const auto push = [&](const torch::Tensor& x) {
        const auto sign = torch::randint(0, 2, x.sizes(), gen, opts) * 2.0 - 1.0;
        return x + sign * (1.0 + 2.0 * torch::rand(x.sizes(), gen, opts));
      };
      gt = {push(pred.uv), push(pred.zn)};
    }
    const auto f = [&] { return loss_25d(readout({logits, depth}, S), gt, 0.7); };
    errors.push_back(fd_error({logits, depth}, f));
  }
  return fd_summary("fd_loss_25d", errors);
}

OracleCheck check_fd_loss_depth(int instances, uint64_t seed) {
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  constexpr int64_t B = 2, K = kNumKeypoints;
  std::vector<double> errors;
  for (int i = 0; i < instances; ++i) {
    torch::manual_seed(seed * 31 + static_cast<uint64_t>(i));
    DepthRenderer renderer(DepthRendererOptions{32, 8, 1.5, 4});
    renderer->to(torch::kFloat64);
    auto gen = cpu_generator(seed * 104729 + static_cast<uint64_t>(i));
    const auto uv = torch::rand({B, K, 2}, gen, opts) * 32.0;
    auto zn = torch::randn({B, K}, gen, opts).requires_grad_(true);
    torch::Tensor gt;
    {
      torch::NoGradGuard no_grad;
      const auto r = renderer->forward(uv, zn);
      const auto sign = torch::randint(0, 2, r.sizes(), gen, opts) * 2.0 - 1.0;
      gt = r + sign * (0.05 + 0.1 * torch::rand(r.sizes(), gen, opts));
    }
    auto vars = renderer->parameters();
    vars.push_back(zn);
    const auto f = [&] { return loss_depth(renderer->forward(uv, zn), gt); };
    errors.push_back(fd_error(vars, f));
  }
  return fd_summary("fd_loss_depth", errors);
}

std::vector<OracleCheck> run_oracle_suite(uint64_t seed) {
  return {check_w1_calibration(seed), check_gp_closed_forms(), check_fd_critic_objective(20, seed),
          check_fd_loss_25d(20, seed), check_fd_loss_depth(20, seed)};
}

}  // namespace awh
