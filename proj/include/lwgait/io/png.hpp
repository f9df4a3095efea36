#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "lwgait/core/error.hpp"
#include "lwgait/core/tensor.hpp"

namespace lwgait {

// 8-bit PNG in, [0,1] float maps out, and back. Fixed zlib level so the
// same pixels always produce the same bytes.
namespace png_detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace png_detail

// img: [3 x H x W] in [0,1] for RGB, or [H x W] for grayscale.
inline void write_png(const std::string& path, const Tensor& img) {
  const bool rgb = img.rank() == 3;
  require(rgb || img.rank() == 2, ErrorCode::dimension, "write_png wants [3xHxW] or [HxW]");
  const int64_t h = rgb ? img.dim(1) : img.dim(0);
  const int64_t w = rgb ? img.dim(2) : img.dim(1);
  if (rgb) require(img.dim(0) == 3, ErrorCode::dimension, "write_png wants 3 channels");

  std::unique_ptr<std::FILE, png_detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorCode::io, "cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io, "png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int64_t stride = rgb ? 3 * w : w;
  std::vector<unsigned char> row(static_cast<size_t>(stride));
  auto to_byte = [](float v) {
    float x = v * 255.0f + 0.5f;
    if (x < 0.0f) x = 0.0f;
    if (x > 255.0f) x = 255.0f;
    return static_cast<unsigned char>(x);
  };
  for (int64_t y = 0; y < h; ++y) {
    if (rgb) {
      for (int64_t x = 0; x < w; ++x)
        for (int64_t c = 0; c < 3; ++c) row[static_cast<size_t>(x * 3 + c)] = to_byte(img.at(c, y, x));
    } else {
      for (int64_t x = 0; x < w; ++x) row[static_cast<size_t>(x)] = to_byte(img.at(y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns [3 x H x W] in [0,1]; grayscale and palette inputs are expanded.
inline Tensor read_png(const std::string& path) {
  std::unique_ptr<std::FILE, png_detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorCode::io, "cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::io, "png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int64_t w = png_get_image_width(png, info);
  const int64_t h = png_get_image_height(png, info);
  require(png_get_channels(png, info) == 3, ErrorCode::format, "unexpected png channel count");

  Tensor img({3, h, w});
  std::vector<unsigned char> row(static_cast<size_t>(3 * w));
  for (int64_t y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(row[static_cast<size_t>(x * 3 + c)]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace lwgait
