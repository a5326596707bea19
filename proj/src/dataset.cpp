#include "awh/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace awh {

namespace {

constexpr int64_t K = static_cast<int64_t>(kNumKeypoints);

}  // namespace

Dataset Dataset::load(const Manifest& manifest, const NormalizationSpec& norm) {
  Dataset d;
  const auto n = static_cast<int64_t>(manifest.records.size());
  if (n == 0) throw std::invalid_argument("dataset: manifest " + manifest.path.string() + " is empty");
  d.domain = manifest.records.front().domain;
  d.intrinsics = manifest.header.intrinsics;
  d.norm = norm;
  d.image_size = manifest.header.image_size;
  d.depth_size = manifest.header.depth_size;
  const auto s = d.image_size;
  const auto ds = d.depth_size;
  d.images = torch::empty({n, 3, s, s}, torch::kUInt8);
  d.depth = torch::empty({n, 1, ds, ds}, torch::kFloat32);
  d.uv = torch::empty({n, K, 2}, torch::kFloat32);
  d.zn = torch::empty({n, K}, torch::kFloat32);
  d.kp3d = torch::empty({n, K, 3}, torch::kFloat64);
  d.root_z = torch::empty({n}, torch::kFloat64);
  d.bone_d = torch::empty({n}, torch::kFloat64);

  auto uv = d.uv.accessor<float, 3>();
  auto zn = d.zn.accessor<float, 2>();
  auto kp = d.kp3d.accessor<double, 3>();
  auto rz = d.root_z.accessor<double, 1>();
  auto bd = d.bone_d.accessor<double, 1>();
  for (int64_t i = 0; i < n; ++i) {
    const auto sample = load_sample(manifest, static_cast<std::size_t>(i));
    if (sample.domain != d.domain) {
      throw std::runtime_error(manifest.path.string() + ": record " + std::to_string(i) +
                               " mixes domains within one split");
    }
    // HWC float -> CHW uint8 (values were stored as 8-bit, so this is exact)
    auto img = d.images[i];
    auto* dst = img.data_ptr<uint8_t>();
    for (int64_t y = 0; y < s; ++y) {
      for (int64_t x = 0; x < s; ++x) {
        for (int64_t c = 0; c < 3; ++c) {
          dst[(c * s + y) * s + x] =
              static_cast<uint8_t>(std::lround(sample.image[(y * s + x) * 3 + c] * 255.0f));
        }
      }
    }
    std::memcpy(d.depth[i].data_ptr<float>(), sample.depth.data(), sample.depth.size() * sizeof(float));

    const auto pose = to_pose25d(sample.kp3d, sample.intrinsics, norm);
    for (int64_t k = 0; k < K; ++k) {
      uv[i][k][0] = static_cast<float>(sample.kp2d[k].x);
      uv[i][k][1] = static_cast<float>(sample.kp2d[k].y);
      zn[i][k] = static_cast<float>(pose.z_norm[k]);
      for (int c = 0; c < 3; ++c) kp[i][k][c] = sample.kp3d[k][c];
    }
    rz[i] = sample.kp3d[norm.root_index].z();
    bd[i] = bone_length(sample.kp3d, norm);
  }
  return d;
}

Dataset Dataset::load(const std::filesystem::path& manifest_path, const NormalizationSpec& norm) {
  return load(read_manifest(manifest_path), norm);
}

Batch Dataset::make_batch(const std::vector<int64_t>& indices, Supervision supervision) const {
  if (indices.empty()) throw std::invalid_argument("make_batch: no indices");
  const auto idx = torch::tensor(indices, torch::kLong);
  Batch b;
  b.domain = domain;
  b.images = images.index_select(0, idx).to(torch::kFloat32) / 255.0f;
  b.uv = uv.index_select(0, idx);
  b.depth = depth.index_select(0, idx);
  if (supervision == Supervision::Full) {
    b.zn = zn.index_select(0, idx);
    b.kp3d = kp3d.index_select(0, idx);
  }
  return b;
}

GeneratedPaths generate_dataset(const GenConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const auto skeleton = HandSkeleton::standard();
  const auto cam = default_intrinsics(config.image_size);

  struct Split {
    const char* name;
    Domain domain;
    int64_t count;
    std::filesystem::path path;
  };
  GeneratedPaths paths{out_dir / "source_train.jsonl", out_dir / "target_train.jsonl",
                       out_dir / "target_test.jsonl"};
  const std::array<Split, 3> splits = {{
      {"source_train", Domain::Source, config.n_source_train, paths.source_train},
      {"target_train", Domain::Target, config.n_target_train, paths.target_train},
      {"target_test", Domain::Target, config.n_target_test, paths.target_test},
  }};

  for (std::size_t si = 0; si < splits.size(); ++si) {
    const auto& split = splits[si];
    ManifestHeader header;
    header.split = split.name;
    header.count = split.count;
    header.image_size = config.image_size;
    header.depth_size = config.depth_size;
    header.intrinsics = cam;
    header.skeleton = skeleton;
    ManifestWriter writer(split.path, header);
    for (int64_t i = 0; i < split.count; ++i) {
      auto rng = make_stream(config.seed, si, static_cast<uint64_t>(i));
      const auto pose = sample_framed_pose(rng, skeleton, cam, config.image_size);
      const auto sample = render_sample(pose, split.domain, rng, cam, config.image_size,
                                        config.depth_size);
      char stem[64];
      std::snprintf(stem, sizeof(stem), "%s_%06lld", split.name, static_cast<long long>(i));
      writer.add(sample, stem);
    }
    writer.finish();
  }
  return paths;
}

}  // namespace awh
