#include "fcndepth/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fcndepth/error.hpp"

namespace fcndepth {

static_assert(std::endian::native == std::endian::little,
              "depth raster I/O assumes a little-endian host");

void write_depth(const DepthRaster& raster, std::ostream& out) {
  if (raster.values.size() != std::size_t{raster.width} * raster.height)
    throw FormatError("depth raster value count does not match its dimensions");
  for (float v : raster.values)
    if (!std::isfinite(v)) throw FormatError("depth raster contains a non-finite value");
  out.write(kDepthMagic, 4);
  out.put(static_cast<char>(kDepthVersion));
  out.write(reinterpret_cast<const char*>(&raster.width), 4);
  out.write(reinterpret_cast<const char*>(&raster.height), 4);
  out.write(reinterpret_cast<const char*>(raster.values.data()),
            static_cast<std::streamsize>(raster.values.size() * sizeof(float)));
  if (!out) throw Error("failed writing depth raster");
}

void write_depth(const DepthRaster& raster, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_depth(raster, out);
}

DepthRaster read_depth(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kDepthMagic, 4) != 0)
    throw FormatError("not a depth raster (bad magic)");
  const int version = in.get();
  if (version != kDepthVersion) throw FormatError("unsupported depth raster version");
  DepthRaster r;
  if (!in.read(reinterpret_cast<char*>(&r.width), 4) ||
      !in.read(reinterpret_cast<char*>(&r.height), 4))
    throw FormatError("truncated depth raster header");
  if (r.width == 0 || r.height == 0) throw FormatError("depth raster has zero size");
  r.values.resize(std::size_t{r.width} * r.height);
  if (!in.read(reinterpret_cast<char*>(r.values.data()),
               static_cast<std::streamsize>(r.values.size() * sizeof(float))))
    throw FormatError("truncated depth raster data");
  for (float v : r.values)
    if (!std::isfinite(v)) throw FormatError("depth raster contains non-finite values");
  return r;
}

DepthRaster read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open depth raster '" + path.string() + "'");
  return read_depth(in);
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw FormatError("image pixel count does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

namespace {

int read_header_int(std::istream& in) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw FormatError("malformed P6 header");
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 1'000'000) throw FormatError("P6 header value too large");
    ch = in.get();
  }
  return static_cast<int>(value);
}

}  // namespace

RgbImage read_ppm(std::istream& in) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6')
    throw FormatError("not a binary P6 image");
  RgbImage image;
  image.width = read_header_int(in);
  image.height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (image.width < 1 || image.height < 1) throw FormatError("P6 image has zero size");
  if (maxval != 255) throw FormatError("only 8-bit P6 images (maxval 255) are supported");
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  if (!in.read(reinterpret_cast<char*>(image.pixels.data()),
               static_cast<std::streamsize>(image.pixels.size())))
    throw FormatError("truncated P6 pixel data");
  return image;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image '" + path.string() + "'");
  return read_ppm(in);
}

Tensor4f image_to_tensor(const RgbImage& image) {
  Tensor4f t(Shape4{1, image.height, image.width, 3});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] / 255.0f;
  return t;
}

DepthRaster tensor_to_depth(const Tensor4f& depth) {
  DepthRaster r;
  r.width = static_cast<std::uint32_t>(depth.w());
  r.height = static_cast<std::uint32_t>(depth.h());
  r.values.resize(std::size_t{r.width} * r.height);
  for (int y = 0; y < depth.h(); ++y)
    for (int x = 0; x < depth.w(); ++x) r.at(x, y) = depth(0, y, x, 0);
  return r;
}

Tensor4f depth_to_tensor(const DepthRaster& raster) {
  Tensor4f t(Shape4{1, static_cast<int>(raster.height), static_cast<int>(raster.width), 1});
  for (std::size_t i = 0; i < raster.values.size(); ++i) t[i] = raster.values[i];
  return t;
}

}  // namespace fcndepth
