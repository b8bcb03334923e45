#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "fcndepth/io.hpp"
#include "fcndepth/synthetic.hpp"

using namespace fcndepth;

namespace {

std::string depth_bytes(const DepthRaster& r) {
  std::ostringstream out(std::ios::binary);
  write_depth(r, out);
  return out.str();
}

DepthRaster depth_from(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_depth(in);
}

}  // namespace

TEST_CASE("depth raster layout and round trip") {
  DepthRaster r{3, 2, {1, 2, 3, 4, 5, 6.5f}};
  const auto bytes = depth_bytes(r);
  REQUIRE(bytes.size() == 4 + 1 + 4 + 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "DPTH");
  CHECK(bytes[4] == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 3);
  CHECK(static_cast<unsigned char>(bytes[9]) == 2);
  float last;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  CHECK(last == 6.5f);
  CHECK(r.at(2, 1) == 6.5f);
  CHECK(depth_from(bytes) == r);

  CHECK_THROWS_AS(depth_from("DPTX" + bytes.substr(4)), FormatError);
  CHECK_THROWS_AS(depth_from(bytes.substr(0, bytes.size() - 2)), FormatError);
  DepthRaster nan{1, 1, {std::nanf("")}};
  CHECK_THROWS_AS(depth_bytes(nan), FormatError);
  auto inf_bytes = bytes;
  const float inf = INFINITY;
  std::memcpy(inf_bytes.data() + 13, &inf, 4);
  CHECK_THROWS_AS(depth_from(inf_bytes), FormatError);
}

TEST_CASE("ppm round trip, header comments and errors") {
  RgbImage img{2, 1, {255, 0, 10, 1, 2, 3}};
  const auto path = std::filesystem::temp_directory_path() / "fcndepth_test.ppm";
  write_ppm(img, path);
  CHECK(read_ppm(path) == img);
  std::filesystem::remove(path);

  std::string commented = "P6\n# made by hand\n2 1\n# another\n255\n";
  commented.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  std::istringstream in(commented, std::ios::binary);
  CHECK(read_ppm(in) == img);

  std::istringstream p3("P3\n1 1\n255\n0 0 0\n");
  CHECK_THROWS_AS(read_ppm(p3), FormatError);
  std::istringstream deep("P6\n1 1\n65535\n\0\0\0\0\0\0");
  CHECK_THROWS_AS(read_ppm(deep), FormatError);
  std::istringstream short_data("P6\n2 2\n255\nabc");
  CHECK_THROWS_AS(read_ppm(short_data), FormatError);
}

TEST_CASE("tensor conversions") {
  RgbImage img{2, 2, {0, 51, 255, 0, 0, 0, 0, 0, 0, 255, 255, 255}};
  const auto t = image_to_tensor(img);
  REQUIRE(t.shape() == Shape4{1, 2, 2, 3});
  CHECK(t(0, 0, 0, 1) == doctest::Approx(0.2));
  CHECK(t(0, 0, 0, 2) == 1.0f);
  CHECK(t(0, 1, 1, 0) == 1.0f);

  DepthRaster d{3, 2, {1, 2, 3, 4, 5, 6}};
  const auto dt = depth_to_tensor(d);
  CHECK(dt.shape() == Shape4{1, 2, 3, 1});
  CHECK(dt(0, 1, 0, 0) == 4.0f);
  CHECK(tensor_to_depth(dt) == d);
}

TEST_CASE("fronto-parallel plane at 2 m renders depth 2.0 everywhere") {
  Scene s;
  s.kind = SceneKind::fronto_plane;
  s.background = {0, 0, 1, 2.0};
  const auto out = render_scene(s, 40, 30);
  CHECK(out.depth.width == 40);
  CHECK(out.depth.height == 30);
  for (float v : out.depth.values) CHECK(v == 2.0f);
  CHECK(out.image.pixels.size() == 40 * 30 * 3);
}

TEST_CASE("slanted plane depth follows the plane equation") {
  const auto cam = PinholeCamera::for_resolution(64, 48);
  CHECK(cam.focal == 64.0);
  CHECK(cam.cx == 32.0);
  CHECK(cam.cy == 24.0);
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Scene s;
    s.kind = SceneKind::slanted_plane;
    s.background = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0, rng.uniform(2, 6)};
    const auto out = render_scene(s, 64, 48);
    double worst = 0;
    for (int v = 0; v < 48; ++v)
      for (int u = 0; u < 64; ++u) {
        // Back-project the rendered depth and check n . X = offset.
        const double z = out.depth.at(u, v);
        const double x = (u + 0.5 - 32.0) / 64.0 * z;
        const double y = (v + 0.5 - 24.0) / 64.0 * z;
        const auto& p = s.background;
        worst = std::max(worst, std::abs(p.nx * x + p.ny * y + p.nz * z - p.offset));
      }
    CHECK(worst <= 1e-5 * 6);
    const double centre = s.background.depth_at(cam, 31.5, 23.5);
    CHECK(centre == doctest::Approx(s.background.offset));
  }
}

TEST_CASE("box scene: constant-depth face in front of the background") {
  Scene s;
  s.kind = SceneKind::box;
  s.background = {0, 0, 1, 5.0};
  s.box_x0 = 2;
  s.box_y0 = 3;
  s.box_x1 = 6;
  s.box_y1 = 5;
  s.box_depth = 1.5;
  const auto out = render_scene(s, 8, 8);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      const bool inside = u >= 2 && u < 6 && v >= 3 && v < 5;
      CHECK(out.depth.at(u, v) == (inside ? 1.5f : 5.0f));
    }
}

TEST_CASE("random scenes are deterministic and valid") {
  Rng a(42), b(42);
  int kinds[3] = {0, 0, 0};
  for (int i = 0; i < 60; ++i) {
    const auto sa = random_scene(a, 32, 24);
    const auto sb = random_scene(b, 32, 24);
    ++kinds[static_cast<int>(sa.kind)];
    const auto ra = render_scene(sa, 32, 24);
    const auto rb = render_scene(sb, 32, 24);
    CHECK(ra.depth == rb.depth);
    CHECK(ra.image == rb.image);
    for (float v : ra.depth.values) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0f);
    }
    if (sa.kind == SceneKind::box) {
      CHECK(sa.box_x1 <= 32);
      CHECK(sa.box_y1 <= 24);
      CHECK(sa.box_depth < sa.background.offset);
    }
  }
  CHECK(kinds[0] > 0);
  CHECK(kinds[1] > 0);
  CHECK(kinds[2] > 0);
}
