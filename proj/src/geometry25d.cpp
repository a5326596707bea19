#include "awh/geometry25d.hpp"

#include <stdexcept>
#include <string>

namespace awh {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera intrinsics: focal lengths must be positive");
  }
}

void NormalizationSpec::validate() const {
  if (root_index >= kNumKeypoints || bone_k1 >= kNumKeypoints || bone_k2 >= kNumKeypoints) {
    throw std::invalid_argument("normalization spec: keypoint index out of range");
  }
  if (bone_k1 == bone_k2) {
    throw std::invalid_argument("normalization spec: bone endpoints must differ");
  }
  if (!(constant_c > 0.0)) {
    throw std::invalid_argument("normalization spec: constant_c must be positive");
  }
}

double bone_length(const Keypoints3D& p, const NormalizationSpec& spec) {
  spec.validate();
  return (p[spec.bone_k1] - p[spec.bone_k2]).norm();
}

Keypoints3D normalize_root_relative(const Keypoints3D& p, const NormalizationSpec& spec) {
  const double d = bone_length(p, spec);
  if (!(d >= kDegenerateBone)) {
    throw std::invalid_argument("normalize_root_relative: degenerate normalizing bone (length " +
                                std::to_string(d) + " mm)");
  }
  const double scale = spec.constant_c / d;
  const Eigen::Vector3d root = p[spec.root_index];
  Keypoints3D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    out[i] = scale * (p[i] - root);
  }
  // exact zero at the root regardless of rounding
  out[spec.root_index].setZero();
  return out;
}

Pixel2D project(const Eigen::Vector3d& point, const CameraIntrinsics& cam) {
  if (!(point.z() > 0.0)) {
    throw std::invalid_argument("project: point behind or on the camera plane (Z = " +
                                std::to_string(point.z()) + ")");
  }
  return {cam.fx * point.x() / point.z() + cam.cx, cam.fy * point.y() / point.z() + cam.cy};
}

Keypoints2D project(const Keypoints3D& p, const CameraIntrinsics& cam) {
  cam.validate();
  Keypoints2D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    out[i] = project(p[i], cam);
  }
  return out;
}

Pose25D to_pose25d(const Keypoints3D& p, const CameraIntrinsics& cam, const NormalizationSpec& spec) {
  Pose25D pose;
  pose.pixels = project(p, cam);
  const Keypoints3D n = normalize_root_relative(p, spec);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    pose.z_norm[i] = n[i].z();
  }
  return pose;
}

LiftResult lift_to_3d(const Pose25D& pose, const CameraIntrinsics& cam, double root_z,
                      double bone_length_d, const NormalizationSpec& spec) {
  cam.validate();
  spec.validate();
  if (!(root_z > 0.0)) throw std::invalid_argument("lift_to_3d: root_z must be positive");
  if (!(bone_length_d > 0.0)) throw std::invalid_argument("lift_to_3d: bone length must be positive");

  LiftResult result;
  const double depth_scale = bone_length_d / spec.constant_c;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const double z = i == spec.root_index ? root_z : root_z + depth_scale * pose.z_norm[i];
    if (!(z > 0.0)) result.valid = false;
    result.points[i] = Eigen::Vector3d((pose.pixels[i].x - cam.cx) * z / cam.fx,
                                       (pose.pixels[i].y - cam.cy) * z / cam.fy, z);
  }
  return result;
}

}  // namespace awh
