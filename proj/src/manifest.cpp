#include "awh/manifest.hpp"

#include "awh/png_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace awh {

using nlohmann::json;

namespace {

json header_to_json(const ManifestHeader& h) {
  return {{"format", h.format},
          {"split", h.split},
          {"count", h.count},
          {"image_size", h.image_size},
          {"depth_size", h.depth_size},
          {"intrinsics", {{"fx", h.intrinsics.fx}, {"fy", h.intrinsics.fy},
                          {"cx", h.intrinsics.cx}, {"cy", h.intrinsics.cy}}},
          {"skeleton", {{"parent", h.skeleton.parent}, {"bone_length", h.skeleton.bone_length}}}};
}

ManifestHeader header_from_json(const json& j) {
  ManifestHeader h;
  h.format = j.at("format").get<std::string>();
  if (h.format != kManifestFormat) {
    throw std::runtime_error("unsupported manifest format '" + h.format + "'");
  }
  h.split = j.at("split").get<std::string>();
  h.count = j.at("count").get<int64_t>();
  h.image_size = j.at("image_size").get<int64_t>();
  h.depth_size = j.at("depth_size").get<int64_t>();
  const auto& in = j.at("intrinsics");
  h.intrinsics = {in.at("fx").get<double>(), in.at("fy").get<double>(), in.at("cx").get<double>(),
                  in.at("cy").get<double>()};
  h.skeleton.parent = j.at("skeleton").at("parent").get<std::array<int, kNumKeypoints>>();
  h.skeleton.bone_length =
      j.at("skeleton").at("bone_length").get<std::array<double, kNumKeypoints>>();
  h.intrinsics.validate();
  h.skeleton.validate();
  return h;
}

json record_to_json(const ManifestRecord& r) {
  json kp2d = json::array();
  json kp3d = json::array();
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    kp2d.push_back({r.kp2d[k].x, r.kp2d[k].y});
    kp3d.push_back({r.kp3d[k].x(), r.kp3d[k].y(), r.kp3d[k].z()});
  }
  return {{"image_path", r.image_path}, {"depth_path", r.depth_path},
          {"domain", std::string(to_string(r.domain))},
          {"kp2d", kp2d}, {"kp3d", kp3d},
          {"d_max", r.depth_spec.d_max}, {"d_range", r.depth_spec.d_range}};
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.image_path = j.at("image_path").get<std::string>();
  r.depth_path = j.at("depth_path").get<std::string>();
  r.domain = domain_from_string(j.at("domain").get<std::string>());
  const auto& kp2d = j.at("kp2d");
  const auto& kp3d = j.at("kp3d");
  if (kp2d.size() != kNumKeypoints || kp3d.size() != kNumKeypoints) {
    throw std::runtime_error("expected 21 keypoints");
  }
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    r.kp2d[k] = {kp2d.at(k).at(0).get<double>(), kp2d.at(k).at(1).get<double>()};
    r.kp3d[k] = Eigen::Vector3d(kp3d.at(k).at(0).get<double>(), kp3d.at(k).at(1).get<double>(),
                                kp3d.at(k).at(2).get<double>());
  }
  r.depth_spec = {j.at("d_max").get<double>(), j.at("d_range").get<double>()};
  r.depth_spec.validate();
  return r;
}

}  // namespace

uint16_t quantize_depth(float value) {
  return static_cast<uint16_t>(std::lround(std::clamp(value, 0.0f, 1.0f) * 65535.0f));
}

float dequantize_depth(uint16_t value) { return static_cast<float>(value) / 65535.0f; }

ManifestWriter::ManifestWriter(const std::filesystem::path& path, const ManifestHeader& header)
    : path_(path), header_(header) {
  const auto root = path.parent_path();
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "depth");
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write manifest " + path.string());
  out_ << header_to_json(header_).dump() << '\n';
}

void ManifestWriter::add(const Sample& sample, const std::string& stem) {
  if (sample.image_size != header_.image_size || sample.depth_size != header_.depth_size) {
    throw std::invalid_argument("manifest writer: sample resolution differs from header");
  }
  ManifestRecord rec;
  rec.image_path = "images/" + stem + ".png";
  rec.depth_path = "depth/" + stem + ".png";
  rec.domain = sample.domain;
  rec.kp2d = sample.kp2d;
  rec.kp3d = sample.kp3d;
  rec.depth_spec = sample.depth_spec;

  const auto root = path_.parent_path();
  std::vector<uint8_t> rgb(sample.image.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    rgb[i] = static_cast<uint8_t>(std::lround(std::clamp(sample.image[i], 0.0f, 1.0f) * 255.0f));
  }
  const auto s = static_cast<int>(sample.image_size);
  png::write_rgb8(root / rec.image_path, s, s, rgb);
  std::vector<uint16_t> depth(sample.depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = quantize_depth(sample.depth[i]);
  const auto d = static_cast<int>(sample.depth_size);
  png::write_gray16(root / rec.depth_path, d, d, depth);

  out_ << record_to_json(rec).dump() << '\n';
  ++written_;
}

void ManifestWriter::finish() {
  out_.flush();
  if (!out_) throw std::runtime_error("failed writing manifest " + path_.string());
  out_.close();
  if (written_ != header_.count) {
    throw std::runtime_error("manifest " + path_.string() + ": declared " +
                             std::to_string(header_.count) + " records, wrote " +
                             std::to_string(written_));
  }
}

void write_manifest(std::span<const Sample> samples, const std::filesystem::path& path,
                    const std::string& split) {
  ManifestHeader header;
  header.split = split;
  header.count = static_cast<int64_t>(samples.size());
  if (!samples.empty()) {
    header.image_size = samples.front().image_size;
    header.depth_size = samples.front().depth_size;
    header.intrinsics = samples.front().intrinsics;
  }
  ManifestWriter writer(path, header);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[64];
    std::snprintf(stem, sizeof(stem), "%s_%06zu", split.c_str(), i);
    writer.add(samples[i], stem);
  }
  writer.finish();
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  Manifest m;
  m.path = path;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    return std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (line_no == 1) {
        m.header = header_from_json(j);
      } else {
        m.records.push_back(record_from_json(j));
      }
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
    if (line_no > 1) {
      const auto& rec = m.records.back();
      for (const auto& rel : {rec.image_path, rec.depth_path}) {
        if (!std::filesystem::exists(m.root() / rel)) throw fail("missing file " + rel);
      }
    }
  }
  if (line_no == 0) throw std::runtime_error(path.string() + ": empty manifest");
  if (static_cast<int64_t>(m.records.size()) != m.header.count) {
    throw std::runtime_error(path.string() + ": header declares " +
                             std::to_string(m.header.count) + " records, found " +
                             std::to_string(m.records.size()));
  }
  return m;
}

Sample load_sample(const Manifest& manifest, std::size_t index) {
  const auto& rec = manifest.records.at(index);
  Sample s;
  s.image_size = manifest.header.image_size;
  s.depth_size = manifest.header.depth_size;
  s.domain = rec.domain;
  s.intrinsics = manifest.header.intrinsics;
  s.kp2d = rec.kp2d;
  s.kp3d = rec.kp3d;
  s.depth_spec = rec.depth_spec;

  const auto img = png::read_rgb8(manifest.root() / rec.image_path);
  if (img.width != s.image_size || img.height != s.image_size) {
    throw std::runtime_error("record " + std::to_string(index) + ": image " + rec.image_path +
                             " has unexpected size");
  }
  s.image.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) s.image[i] = img.pixels[i] / 255.0f;

  const auto depth = png::read_gray16(manifest.root() / rec.depth_path);
  if (depth.width != s.depth_size || depth.height != s.depth_size) {
    throw std::runtime_error("record " + std::to_string(index) + ": depth " + rec.depth_path +
                             " has unexpected size");
  }
  s.depth.resize(depth.pixels.size());
  for (std::size_t i = 0; i < depth.pixels.size(); ++i) s.depth[i] = dequantize_depth(depth.pixels[i]);
  return s;
}

}  // namespace awh
