#pragma once

#include "awh/toyhands.hpp"

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace awh {

inline constexpr const char* kManifestFormat = "toyhands-v1";

struct ManifestHeader {
  std::string format = kManifestFormat;
  std::string split;
  int64_t count = 0;
  int64_t image_size = 128;
  int64_t depth_size = 32;
  CameraIntrinsics intrinsics;
  HandSkeleton skeleton = HandSkeleton::standard();
};

struct ManifestRecord {
  std::string image_path;  // relative to the manifest's directory
  std::string depth_path;
  Domain domain = Domain::Source;
  Keypoints2D kp2d{};
  Keypoints3D kp3d;
  DepthNormSpec depth_spec;
};

struct Manifest {
  std::filesystem::path path;
  ManifestHeader header;
  std::vector<ManifestRecord> records;

  std::filesystem::path root() const { return path.parent_path(); }
};

/// Streams samples to disk: images/<stem>.png (8-bit RGB),
/// depth/<stem>.png (16-bit gray) and one JSON line per record after the
/// header line. The header's count must match the number of added samples.
class ManifestWriter {
 public:
  ManifestWriter(const std::filesystem::path& path, const ManifestHeader& header);
  void add(const Sample& sample, const std::string& stem);
  void finish();

 private:
  std::filesystem::path path_;
  ManifestHeader header_;
  std::ofstream out_;
  int64_t written_ = 0;
};

/// Writes samples with stems "<split>_<index>".
void write_manifest(std::span<const Sample> samples, const std::filesystem::path& path,
                    const std::string& split);

/// Parses and validates a manifest; errors name the file and line.
Manifest read_manifest(const std::filesystem::path& path);

/// Loads image and depth of one record, quantized as stored.
Sample load_sample(const Manifest& manifest, std::size_t index);

uint16_t quantize_depth(float value);
float dequantize_depth(uint16_t value);

}  // namespace awh
