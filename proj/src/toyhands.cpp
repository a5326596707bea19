#include "awh/toyhands.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace awh {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kFingers = 5;

// Per-finger rest direction in the palm frame (x toward the pinky, y along
// the fingers, z out of the palm): in-plane angle from +y and out-of-plane
// tilt toward +z.
constexpr std::array<double, kFingers> kRestAngle = {-50.0, -10.0, 0.0, 10.0, 20.0};
constexpr std::array<double, kFingers> kRestTilt = {35.0, 0.0, 0.0, 0.0, 0.0};

struct Limits {
  double lo;
  double hi;
};

// MCP flexion, MCP abduction, PIP flexion, DIP flexion
constexpr std::array<Limits, 4> kFingerLimits = {{{-10, 90}, {-15, 15}, {0, 100}, {0, 80}}};
constexpr std::array<Limits, 4> kThumbLimits = {{{-10, 50}, {-20, 20}, {0, 70}, {0, 80}}};
constexpr Limits kThumbJitter = {-15, 15};

// Capsule radii (mm) by segment position within a finger chain.
constexpr double kRootRadius = 14.0;
constexpr std::array<double, 4> kBoneRadius = {10.0, 8.0, 7.0, 6.0};
constexpr std::array<double, 4> kJointRadius = {9.0, 7.5, 6.5, 5.5};
constexpr double kPalmFillRadius = 9.0;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(Rng& rng, Limits l) { return uniform(rng, l.lo * kDeg, l.hi * kDeg); }

Eigen::Vector3d rest_direction(int finger, double extra_angle, double extra_tilt) {
  const double a = kRestAngle[finger] * kDeg + extra_angle;
  const double t = kRestTilt[finger] * kDeg + extra_tilt;
  return Eigen::Vector3d(std::sin(a) * std::cos(t), std::cos(a) * std::cos(t), std::sin(t));
}

struct Sphere {
  Eigen::Vector3d center;
  double radius;
  int owner;
};

std::vector<Sphere> hand_primitives(const Keypoints3D& pose) {
  std::vector<Sphere> spheres;
  const auto segment = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b, double r) {
    const double len = (b - a).norm();
    const int steps = std::max(2, static_cast<int>(std::ceil(len / (0.5 * r))));
    for (int s = 1; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      spheres.push_back({a + t * (b - a), r, -1});
    }
  };
  spheres.push_back({pose[kRootIndex], kRootRadius, static_cast<int>(kRootIndex)});
  for (int f = 0; f < kFingers; ++f) {
    int prev = static_cast<int>(kRootIndex);
    for (int j = 0; j < 4; ++j) {
      const int idx = 1 + 4 * f + j;
      segment(pose[prev], pose[idx], kBoneRadius[j]);
      spheres.push_back({pose[idx], kJointRadius[j], idx});
      prev = idx;
    }
  }
  // palm webbing between neighbouring knuckles and toward the root
  for (int f = 1; f + 1 < kFingers; ++f) {
    const auto& a = pose[1 + 4 * f];
    const auto& b = pose[1 + 4 * (f + 1)];
    segment(a, b, kPalmFillRadius);
    segment(pose[kRootIndex], 0.5 * (a + b), kPalmFillRadius);
  }
  return spheres;
}

std::vector<float> blur3(const std::vector<float>& img, int64_t size) {
  std::vector<float> out(img.size());
  constexpr float w[3] = {0.25f, 0.5f, 0.25f};
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int64_t yy = std::clamp<int64_t>(y + dy, 0, size - 1);
            const int64_t xx = std::clamp<int64_t>(x + dx, 0, size - 1);
            acc += w[dy + 1] * w[dx + 1] * img[(yy * size + xx) * 3 + c];
          }
        }
        out[(y * size + x) * 3 + c] = acc;
      }
    }
  }
  return out;
}

// Multi-octave value noise in [0, 1], bilinear between random lattice values.
std::vector<float> value_noise(Rng& rng, int64_t size) {
  std::vector<float> out(static_cast<std::size_t>(size * size * 3), 0.0f);
  double total = 0.0;
  double amplitude = 0.5;
  for (int64_t cells : {4, 8, 16}) {
    std::vector<double> lattice(static_cast<std::size_t>((cells + 1) * (cells + 1) * 3));
    for (auto& v : lattice) v = uniform(rng, 0.0, 1.0);
    for (int64_t y = 0; y < size; ++y) {
      const double fy = (y + 0.5) * cells / size;
      const auto y0 = static_cast<int64_t>(fy);
      const double ty = fy - y0;
      for (int64_t x = 0; x < size; ++x) {
        const double fx = (x + 0.5) * cells / size;
        const auto x0 = static_cast<int64_t>(fx);
        const double tx = fx - x0;
        for (int c = 0; c < 3; ++c) {
          const auto at = [&](int64_t yy, int64_t xx) {
            return lattice[static_cast<std::size_t>((yy * (cells + 1) + xx) * 3 + c)];
          };
          const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                           ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
          out[static_cast<std::size_t>((y * size + x) * 3 + c)] += static_cast<float>(amplitude * v);
        }
      }
    }
    total += amplitude;
    amplitude *= 0.5;
  }
  for (auto& v : out) v = static_cast<float>(v / total);
  return out;
}

}  // namespace

HandSkeleton HandSkeleton::standard() {
  HandSkeleton s;
  // metacarpal, proximal, middle, distal per finger (thumb first)
  constexpr std::array<std::array<double, 4>, kFingers> lengths = {{
      {45.0, 32.0, 28.0, 24.0},
      {72.0, 40.0, 25.0, 20.0},
      {70.0, 45.0, 28.0, 22.0},
      {66.0, 42.0, 27.0, 21.0},
      {62.0, 33.0, 20.0, 18.0},
  }};
  s.parent[kRootIndex] = -1;
  s.bone_length[kRootIndex] = 0.0;
  for (int f = 0; f < kFingers; ++f) {
    for (int j = 0; j < 4; ++j) {
      const int idx = 1 + 4 * f + j;
      s.parent[idx] = j == 0 ? static_cast<int>(kRootIndex) : idx - 1;
      s.bone_length[idx] = lengths[f][j];
    }
  }
  return s;
}

void HandSkeleton::validate() const {
  if (parent[kRootIndex] != -1) throw std::invalid_argument("skeleton: root must have no parent");
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (i == kRootIndex) continue;
    // parents precede children, which makes the tree connected and acyclic
    if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= i) {
      throw std::invalid_argument("skeleton: joint " + std::to_string(i) + " has an invalid parent");
    }
    if (!(bone_length[i] > 0.0)) {
      throw std::invalid_argument("skeleton: bone lengths must be positive");
    }
  }
}

Rng make_stream(uint64_t seed, uint64_t stream, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(stream), static_cast<uint32_t>(index),
                    static_cast<uint32_t>(index >> 32)};
  return Rng(seq);
}

CameraIntrinsics default_intrinsics(int64_t image_size) {
  const double s = static_cast<double>(image_size);
  return {1.5625 * s, 1.5625 * s, 0.5 * s, 0.5 * s};
}

Keypoints3D sample_pose(Rng& rng, const HandSkeleton& skeleton, const CameraIntrinsics& cam,
                        int64_t image_size) {
  skeleton.validate();
  Keypoints3D local;
  local[kRootIndex].setZero();
  const Eigen::Vector3d palm_normal(0.0, 0.0, 1.0);
  for (int f = 0; f < kFingers; ++f) {
    const bool thumb = f == 0;
    const auto& lim = thumb ? kThumbLimits : kFingerLimits;
    const double jitter_a = thumb ? uniform(rng, kThumbJitter) : 0.0;
    const double jitter_t = thumb ? uniform(rng, kThumbJitter) : 0.0;
    const double mcp_flex = uniform(rng, lim[0]);
    const double abduction = uniform(rng, lim[1]);
    const double pip = uniform(rng, lim[2]);
    const double dip = uniform(rng, lim[3]);

    const Eigen::Vector3d rest = rest_direction(f, jitter_a, jitter_t);
    const int mcp = 1 + 4 * f;
    local[mcp] = skeleton.bone_length[mcp] * rest;

    // flexion plane spanned by the abducted rest direction and the part of
    // the palm normal orthogonal to it
    const Eigen::Vector3d n = (palm_normal - palm_normal.dot(rest) * rest).normalized();
    const Eigen::Vector3d u = std::cos(abduction) * rest + std::sin(abduction) * n.cross(rest);
    const std::array<double, 3> flex = {mcp_flex, mcp_flex + pip, mcp_flex + pip + dip};
    for (int j = 1; j < 4; ++j) {
      const int idx = mcp + j;
      const Eigen::Vector3d dir = std::cos(flex[j - 1]) * u + std::sin(flex[j - 1]) * n;
      local[idx] = local[idx - 1] + skeleton.bone_length[idx] * dir;
    }
  }

  // palm frame -> camera frame: fingers up in the image, palm facing the camera
  Eigen::Matrix3d base;
  base << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const Eigen::Matrix3d rotation =
      (Eigen::AngleAxisd(uniform(rng, -std::numbers::pi, std::numbers::pi), Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(uniform(rng, -45.0 * kDeg, 45.0 * kDeg), Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(uniform(rng, -45.0 * kDeg, 45.0 * kDeg), Eigen::Vector3d::UnitY()))
          .toRotationMatrix() *
      base;

  Keypoints3D pose;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    pose[i] = rotation * local[i];
    centroid += pose[i];
  }
  centroid /= static_cast<double>(kNumKeypoints);

  const double root_z = uniform(rng, 400.0, 800.0);
  const double jitter = 0.08 * static_cast<double>(image_size);
  const double u_target = cam.cx + uniform(rng, -jitter, jitter);
  const double v_target = cam.cy + uniform(rng, -jitter, jitter);
  const double centroid_z = root_z + centroid.z();
  const Eigen::Vector3d offset((u_target - cam.cx) * centroid_z / cam.fx - centroid.x(),
                               (v_target - cam.cy) * centroid_z / cam.fy - centroid.y(), root_z);
  for (auto& p : pose.points) p += offset;
  return pose;
}

bool pose_in_frame(const Keypoints3D& pose, const CameraIntrinsics& cam, int64_t image_size,
                   double margin) {
  const double hi = static_cast<double>(image_size) - margin;
  for (const auto& p : pose.points) {
    if (!(p.z() > 0.0)) return false;
    const auto px = project(p, cam);
    if (px.x < margin || px.y < margin || px.x > hi || px.y > hi) return false;
  }
  return true;
}

Keypoints3D sample_framed_pose(Rng& rng, const HandSkeleton& skeleton, const CameraIntrinsics& cam,
                               int64_t image_size, int max_tries) {
  const double margin = 0.04 * static_cast<double>(image_size);
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    auto pose = sample_pose(rng, skeleton, cam, image_size);
    if (pose_in_frame(pose, cam, image_size, margin)) return pose;
  }
  throw std::runtime_error("sample_framed_pose: no in-frame pose after " +
                           std::to_string(max_tries) + " attempts");
}

RasterResult rasterize_hand(const Keypoints3D& pose, const CameraIntrinsics& cam,
                            int64_t image_size, int64_t raster_size) {
  const double scale = static_cast<double>(raster_size) / static_cast<double>(image_size);
  const double fx = cam.fx * scale, fy = cam.fy * scale;
  const double cx = cam.cx * scale, cy = cam.cy * scale;

  RasterResult r;
  r.size = raster_size;
  const auto n = static_cast<std::size_t>(raster_size * raster_size);
  std::vector<double> front(n, std::numeric_limits<double>::infinity());
  r.depth.assign(n, 0.0);
  r.mask.assign(n, 0);
  r.owner.assign(n, -1);
  r.shade.assign(n, 0.0f);

  for (const auto& s : hand_primitives(pose)) {
    const double z = s.center.z();
    if (!(z > s.radius)) continue;
    const double u = fx * s.center.x() / z + cx;
    const double v = fy * s.center.y() / z + cy;
    const double rho = fx * s.radius / z;
    const auto x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(u - rho)));
    const auto x1 = std::min<int64_t>(raster_size - 1, static_cast<int64_t>(std::ceil(u + rho)));
    const auto y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(v - rho)));
    const auto y1 = std::min<int64_t>(raster_size - 1, static_cast<int64_t>(std::ceil(v + rho)));
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5 - u) * z / fx;
        const double dy = (y + 0.5 - v) * z / fy;
        const double lateral2 = dx * dx + dy * dy;
        if (lateral2 >= s.radius * s.radius) continue;
        const double h = std::sqrt(s.radius * s.radius - lateral2);
        const auto i = static_cast<std::size_t>(y * raster_size + x);
        if (z - h < front[i]) {
          front[i] = z - h;
          r.depth[i] = z;
          r.mask[i] = 1;
          r.owner[i] = s.owner;
          r.shade[i] = static_cast<float>(0.35 + 0.65 * h / s.radius);
        }
      }
    }
  }
  return r;
}

Sample render_sample(const Keypoints3D& pose, Domain domain, Rng& rng, const CameraIntrinsics& cam,
                     int64_t image_size, int64_t depth_size) {
  if (!pose_in_frame(pose, cam, image_size, 0.0)) {
    throw std::invalid_argument("render_sample: pose is not inside the frame");
  }
  Sample s;
  s.image_size = image_size;
  s.depth_size = depth_size;
  s.domain = domain;
  s.intrinsics = cam;
  s.kp3d = pose;
  s.kp2d = project(pose, cam);

  // appearance
  std::array<float, 3> skin = {0.88f, 0.68f, 0.56f};
  std::vector<float> background;
  const auto npix = static_cast<std::size_t>(image_size * image_size);
  if (domain == Domain::Source) {
    std::array<float, 3> solid{};
    for (auto& c : solid) c = static_cast<float>(uniform(rng, 0.05, 0.95));
    background.resize(npix * 3);
    for (std::size_t i = 0; i < npix; ++i) {
      for (int c = 0; c < 3; ++c) background[i * 3 + c] = solid[c];
    }
  } else {
    const double tone = uniform(rng, 0.55, 1.1);
    for (auto& c : skin) c = static_cast<float>(std::clamp(c * tone + uniform(rng, -0.08, 0.08), 0.0, 1.0));
    background = value_noise(rng, image_size);
  }

  const auto raster = rasterize_hand(pose, cam, image_size, image_size);
  s.image.resize(npix * 3);
  for (std::size_t i = 0; i < npix; ++i) {
    for (int c = 0; c < 3; ++c) {
      s.image[i * 3 + c] = raster.mask[i] ? skin[c] * raster.shade[i] : background[i * 3 + c];
    }
  }
  if (domain == Domain::Target) {
    s.image = blur3(s.image, image_size);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (auto& v : s.image) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
  }

  // normalized depth from the centerline z-buffer at depth resolution
  const auto depth_raster = rasterize_hand(pose, cam, image_size, depth_size);
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < depth_raster.depth.size(); ++i) {
    if (!depth_raster.mask[i]) continue;
    d_min = std::min(d_min, depth_raster.depth[i]);
    d_max = std::max(d_max, depth_raster.depth[i]);
  }
  if (!std::isfinite(d_max)) throw std::runtime_error("render_sample: empty depth raster");
  s.depth_spec = {d_max, std::max(d_max - d_min, 1.0)};
  const auto raw = torch::from_blob(const_cast<double*>(depth_raster.depth.data()),
                                    {depth_size, depth_size}, torch::kFloat64);
  const auto mask = torch::from_blob(const_cast<uint8_t*>(depth_raster.mask.data()),
                                     {depth_size, depth_size}, torch::kUInt8);
  const auto normalized = normalize_depth(raw, mask, s.depth_spec).to(torch::kFloat32).contiguous();
  s.depth.assign(normalized.data_ptr<float>(), normalized.data_ptr<float>() + normalized.numel());
  return s;
}

double background_variance(const Sample& sample) {
  const auto raster = rasterize_hand(sample.kp3d, sample.intrinsics, sample.image_size,
                                     sample.image_size);
  // per-channel variance, averaged; a solid colour scores zero
  std::array<double, 3> sum{}, sum2{};
  std::size_t count = 0;
  for (std::size_t i = 0; i < raster.mask.size(); ++i) {
    if (raster.mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double v = sample.image[i * 3 + c];
      sum[c] += v;
      sum2[c] += v * v;
    }
    ++count;
  }
  if (count == 0) return 0.0;
  const auto n = static_cast<double>(count);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) total += sum2[c] / n - (sum[c] / n) * (sum[c] / n);
  return total / 3.0;
}

}  // namespace awh
