#include "awh/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

namespace awh::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

void write_png(const std::filesystem::path& path, int width, int height, int bit_depth,
               int color_type, int bytes_per_row, const uint8_t* rows_base) {
  auto file = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng: cannot allocate writer for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng: failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian -> PNG big-endian
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows_base + static_cast<std::size_t>(y) * bytes_per_row));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads an image, checking bit depth and colour type; fills `out` with raw rows.
void read_png(const std::filesystem::path& path, int want_depth, int want_color, int channels,
              int& width, int& height, std::vector<uint8_t>& out) {
  auto file = open(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: cannot allocate reader for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: corrupt image " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != want_depth || color != want_color) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unexpected PNG format in " + path.string());
  }
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  out.assign(row_bytes * static_cast<std::size_t>(height), 0);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, out.data() + static_cast<std::size_t>(y) * row_bytes, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_rgb8(const std::filesystem::path& path, int width, int height,
                std::span<const uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw std::invalid_argument("write_rgb8: buffer size does not match dimensions");
  }
  write_png(path, width, height, 8, PNG_COLOR_TYPE_RGB, width * 3, rgb.data());
}

Rgb8 read_rgb8(const std::filesystem::path& path) {
  Rgb8 img;
  read_png(path, 8, PNG_COLOR_TYPE_RGB, 3, img.width, img.height, img.pixels);
  return img;
}

void write_gray16(const std::filesystem::path& path, int width, int height,
                  std::span<const uint16_t> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("write_gray16: buffer size does not match dimensions");
  }
  write_png(path, width, height, 16, PNG_COLOR_TYPE_GRAY, width * 2,
            reinterpret_cast<const uint8_t*>(values.data()));
}

Gray16 read_gray16(const std::filesystem::path& path) {
  Gray16 img;
  std::vector<uint8_t> raw;
  read_png(path, 16, PNG_COLOR_TYPE_GRAY, 1, img.width, img.height, raw);
  img.pixels.resize(raw.size() / 2);
  std::memcpy(img.pixels.data(), raw.data(), raw.size());
  return img;
}

}  // namespace awh::png
