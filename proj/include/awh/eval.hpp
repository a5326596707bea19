#pragma once

#include "awh/dataset.hpp"
#include "awh/geometry25d.hpp"
#include "awh/posenet.hpp"

#include <Eigen/Dense>

#include "json.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace awh {

struct EpeResult {
  double mean_mm = 0.0;
  std::array<double, kNumKeypoints> per_joint{};
  // per-sample-per-joint distances, sample-major
  std::vector<double> errors;
};

EpeResult epe(std::span<const Keypoints3D> pred, std::span<const Keypoints3D> gt);

struct PckPoint {
  double threshold_mm = 0.0;
  double fraction = 0.0;
  bool operator==(const PckPoint&) const = default;
};
using PckCurve = std::vector<PckPoint>;

/// 20..50 mm in 1 mm steps.
std::vector<double> thresholds_20_50();
/// 0..30 mm in 1 mm steps.
std::vector<double> thresholds_0_30();

PckCurve pck_curve(std::span<const double> errors, std::span<const double> thresholds);

/// Trapezoid area over the threshold range divided by its width.
double auc(const PckCurve& curve);

struct EvalReport {
  double mean_epe_mm = 0.0;
  PckCurve pck;
  double auc = 0.0;
  std::array<double, kNumKeypoints> per_joint{};
  int64_t samples = 0;
  // lifts that produced a non-positive depth
  int64_t invalid_lifts = 0;

  bool operator==(const EvalReport&) const = default;
  void validate() const;
};

EvalReport make_report(const EpeResult& result, std::span<const double> thresholds);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);
void write_pck_csv(const PckCurve& curve, const std::filesystem::path& path);
PckCurve read_pck_csv(const std::filesystem::path& path);

/// Runs the network over the whole split in eval mode.
Pose25DBatch predict(PoseNet& model, const Dataset& data, int64_t batch_size = 32);

/// Lifts predictions with the ground-truth root depth and scale, then scores
/// them against the stored 3D keypoints.
EvalReport evaluate(PoseNet& model, const Dataset& data,
                    std::span<const double> thresholds = {}, int64_t batch_size = 32);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  Domain domain = Domain::Source;
};

/// Rows of `features` projected onto the two leading principal axes. Each
/// axis is signed so that its largest-magnitude loading is positive.
Eigen::MatrixX2d pca_2d(const Eigen::MatrixXd& features);

/// Pooled encoder features of up to n_samples images, half from each split,
/// projected to 2D. Shortfalls are reported on `warn`.
std::vector<ScatterPoint> project_features(PoseNet& model, const Dataset& source,
                                           const Dataset& target, int64_t n_samples,
                                           std::ostream* warn = nullptr);

void write_scatter_csv(std::span<const ScatterPoint> points, const std::filesystem::path& path);

}  // namespace awh
