#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

namespace awh {

inline constexpr std::size_t kNumKeypoints = 21;

// Keypoint layout: 0 = palm (root), then thumb, index, middle, ring, pinky,
// each listed base -> tip (4 joints per finger).
inline constexpr std::size_t kRootIndex = 0;
inline constexpr std::size_t kMiddleMcp = 9;

struct CameraIntrinsics {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 64.0;
  double cy = 64.0;

  void validate() const;
};

struct Keypoints3D {
  std::array<Eigen::Vector3d, kNumKeypoints> points{};

  Eigen::Vector3d& operator[](std::size_t i) { return points[i]; }
  const Eigen::Vector3d& operator[](std::size_t i) const { return points[i]; }
};

struct Pixel2D {
  double x = 0.0;
  double y = 0.0;
};

using Keypoints2D = std::array<Pixel2D, kNumKeypoints>;

struct NormalizationSpec {
  std::size_t root_index = kRootIndex;
  std::size_t bone_k1 = kRootIndex;
  std::size_t bone_k2 = kMiddleMcp;  // middle-finger metacarpal
  double constant_c = 1.0;

  void validate() const;
};

struct Pose25D {
  Keypoints2D pixels{};
  std::array<double, kNumKeypoints> z_norm{};
};

/// Bone length below which normalization is rejected (mm).
inline constexpr double kDegenerateBone = 1e-9;

double bone_length(const Keypoints3D& p, const NormalizationSpec& spec);

/// (C / d) * (P_i - P_root) for every keypoint, d being the length of the
/// normalizing bone. Throws std::invalid_argument on a degenerate bone.
Keypoints3D normalize_root_relative(const Keypoints3D& p, const NormalizationSpec& spec);

Pixel2D project(const Eigen::Vector3d& point, const CameraIntrinsics& cam);
Keypoints2D project(const Keypoints3D& p, const CameraIntrinsics& cam);

Pose25D to_pose25d(const Keypoints3D& p, const CameraIntrinsics& cam, const NormalizationSpec& spec);

struct LiftResult {
  Keypoints3D points;
  // false when some recovered depth is not in front of the camera
  bool valid = true;
};

/// Inverse of to_pose25d when the root depth and the normalizing bone length
/// are known (the evaluation protocol).
LiftResult lift_to_3d(const Pose25D& pose, const CameraIntrinsics& cam, double root_z,
                      double bone_length_d, const NormalizationSpec& spec);

}  // namespace awh
