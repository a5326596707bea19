#pragma once

#include "awh/depthreg.hpp"
#include "awh/geometry25d.hpp"
#include "awh/simweight.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace awh {

/// Kinematic tree over the 21 keypoints. parent[0] is -1 (palm root);
/// bone_length[i] is the distance from parent[i] to joint i in mm.
struct HandSkeleton {
  std::array<int, kNumKeypoints> parent{};
  std::array<double, kNumKeypoints> bone_length{};

  static HandSkeleton standard();
  void validate() const;
};

using Rng = std::mt19937_64;

/// Independent stream per (seed, stream, index); generation order does not
/// affect the values drawn for a given sample.
Rng make_stream(uint64_t seed, uint64_t stream, uint64_t index);

/// Joint angles uniform within limits, forward kinematics, random global
/// rotation and root depth in [400, 800] mm. Root X/Y place the hand near the
/// optical axis.
Keypoints3D sample_pose(Rng& rng, const HandSkeleton& skeleton, const CameraIntrinsics& cam,
                        int64_t image_size);

/// True when every keypoint projects inside the frame with `margin` pixels
/// to spare.
bool pose_in_frame(const Keypoints3D& pose, const CameraIntrinsics& cam, int64_t image_size,
                   double margin);

/// Draws poses until one is in frame (at most `max_tries`).
Keypoints3D sample_framed_pose(Rng& rng, const HandSkeleton& skeleton, const CameraIntrinsics& cam,
                               int64_t image_size, int max_tries = 1000);

struct Sample {
  int64_t image_size = 128;
  int64_t depth_size = 32;
  std::vector<float> image;  // image_size^2 x 3, row-major interleaved RGB in [0, 1]
  std::vector<float> depth;  // depth_size^2 normalized depth in [0, 1]
  DepthNormSpec depth_spec;
  Keypoints3D kp3d;
  Keypoints2D kp2d;
  Domain domain = Domain::Source;
  CameraIntrinsics intrinsics;
};

/// Z-buffer result of rasterizing the hand's sphere-swept capsules.
/// `depth` holds the centerline depth (mm) of the frontmost primitive;
/// `owner` the keypoint index of a joint sphere, or -1 for bone interiors and
/// background; `shade` a Lambertian term of the frontmost surface.
struct RasterResult {
  int64_t size = 0;
  std::vector<double> depth;
  std::vector<uint8_t> mask;
  std::vector<int> owner;
  std::vector<float> shade;
};

RasterResult rasterize_hand(const Keypoints3D& pose, const CameraIntrinsics& cam,
                            int64_t image_size, int64_t raster_size);

/// Intrinsics for a square crop of side image_size.
CameraIntrinsics default_intrinsics(int64_t image_size);

/// Renders a pose with the appearance of `domain` (source: flat skin on a
/// solid background; target: perturbed skin, textured-noise background and
/// mild blur) plus a normalized depth image.
Sample render_sample(const Keypoints3D& pose, Domain domain, Rng& rng, const CameraIntrinsics& cam,
                     int64_t image_size, int64_t depth_size);

/// Mean per-channel variance of the background pixels of one rendered image.
double background_variance(const Sample& sample);

}  // namespace awh
