#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fcndepth/tensor.hpp"

namespace fcndepth {

/// Row-major depth map in metres.
/// File layout: "DPTH" u8 version=1 u32 width u32 height f32 values[width*height],
/// all little-endian.
struct DepthRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> values;

  float& at(std::uint32_t x, std::uint32_t y) { return values[std::size_t{y} * width + x]; }
  float at(std::uint32_t x, std::uint32_t y) const { return values[std::size_t{y} * width + x]; }

  friend bool operator==(const DepthRaster&, const DepthRaster&) = default;
};

inline constexpr char kDepthMagic[4] = {'D', 'P', 'T', 'H'};
inline constexpr std::uint8_t kDepthVersion = 1;

void write_depth(const DepthRaster& raster, std::ostream& out);
void write_depth(const DepthRaster& raster, const std::filesystem::path& path);
DepthRaster read_depth(std::istream& in);
DepthRaster read_depth(const std::filesystem::path& path);

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary P6 portable pixmap with maxval 255.
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);
RgbImage read_ppm(std::istream& in);

/// (1, H, W, 3) tensor with channels scaled to [0, 1].
Tensor4f image_to_tensor(const RgbImage& image);

/// First batch item, channel 0 of an (N, H, W, C) tensor.
DepthRaster tensor_to_depth(const Tensor4f& depth);
Tensor4f depth_to_tensor(const DepthRaster& raster);

}  // namespace fcndepth
