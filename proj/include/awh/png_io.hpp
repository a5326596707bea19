#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace awh::png {

struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, interleaved RGB
};

struct Gray16 {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> pixels;  // row-major
};

void write_rgb8(const std::filesystem::path& path, int width, int height,
                std::span<const uint8_t> rgb);
Rgb8 read_rgb8(const std::filesystem::path& path);

void write_gray16(const std::filesystem::path& path, int width, int height,
                  std::span<const uint16_t> values);
Gray16 read_gray16(const std::filesystem::path& path);

}  // namespace awh::png
