#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace awh {

/// Outcome of one self-check; detail carries the measured numbers.
struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Exact W1 between two equal-size 1-D samples: mean gap of the sorted values.
double empirical_w1_1d(std::vector<double> a, std::vector<double> b);

/// ||g_a - g_n|| / max(||g_a||, ||g_n||), 0 when both vanish.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// estimate_w1 on N(0,1) vs N(3,1), 4096 draws each, against [2.7, 3.3] and
/// the sorted-sample value.
OracleCheck check_w1_calibration(uint64_t seed = 0);

/// Penalty of linear critics with gradient norm 1 and 3 and of a constant
/// critic, each against its closed form.
OracleCheck check_gp_closed_forms();

/// Central differences at double precision on seeded random instances.
OracleCheck check_fd_critic_objective(int instances = 20, uint64_t seed = 0);
OracleCheck check_fd_loss_25d(int instances = 20, uint64_t seed = 0);
OracleCheck check_fd_loss_depth(int instances = 20, uint64_t seed = 0);

std::vector<OracleCheck> run_oracle_suite(uint64_t seed = 0);

}  // namespace awh
