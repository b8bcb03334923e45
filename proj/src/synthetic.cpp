#include "fcndepth/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace fcndepth {

std::string_view to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::fronto_plane: return "fronto_plane";
    case SceneKind::slanted_plane: return "slanted_plane";
    case SceneKind::box: return "box";
  }
  return "?";
}

Scene random_scene(Rng& rng, int width, int height) {
  Scene scene;
  scene.kind = static_cast<SceneKind>(rng.integer(0, 2));
  for (double& t : scene.tint) t = rng.uniform(0.4, 1.0);
  switch (scene.kind) {
    case SceneKind::fronto_plane:
      scene.background = {0.0, 0.0, 1.0, rng.uniform(1.0, 8.0)};
      break;
    case SceneKind::slanted_plane:
      // Tilts up to ~27 degrees keep n . ray > 0 over the whole field of view.
      scene.background = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0,
                          rng.uniform(2.0, 6.0)};
      break;
    case SceneKind::box: {
      scene.background = {0.0, 0.0, 1.0, rng.uniform(4.0, 8.0)};
      const int bw = rng.integer(std::max(1, width / 5), std::max(1, width / 2));
      const int bh = rng.integer(std::max(1, height / 5), std::max(1, height / 2));
      scene.box_x0 = rng.integer(0, width - bw);
      scene.box_y0 = rng.integer(0, height - bh);
      scene.box_x1 = scene.box_x0 + bw;
      scene.box_y1 = scene.box_y0 + bh;
      scene.box_depth = rng.uniform(1.0, 3.0);
      break;
    }
  }
  return scene;
}

SceneSample render_scene(const Scene& scene, int width, int height) {
  const auto cam = PinholeCamera::for_resolution(width, height);
  SceneSample out;
  out.depth.width = static_cast<std::uint32_t>(width);
  out.depth.height = static_cast<std::uint32_t>(height);
  out.depth.values.resize(static_cast<std::size_t>(width) * height);
  out.image.width = width;
  out.image.height = height;
  out.image.pixels.resize(static_cast<std::size_t>(width) * height * 3);

  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const bool on_box = scene.kind == SceneKind::box && u >= scene.box_x0 &&
                          u < scene.box_x1 && v >= scene.box_y0 && v < scene.box_y1;
      const double z = on_box ? scene.box_depth : scene.background.depth_at(cam, u, v);
      out.depth.at(u, v) = static_cast<float>(z);

      // Checker texture whose cell size shrinks with distance, darkened with depth.
      const double cell = 64.0 / z;
      const bool light = (static_cast<long>(std::floor(u / cell)) +
                          static_cast<long>(std::floor(v / cell))) % 2 == 0;
      const double shade = std::clamp(1.0 - z / 12.0, 0.1, 1.0) * (light ? 1.0 : 0.6);
      auto* px = &out.image.pixels[(static_cast<std::size_t>(v) * width + u) * 3];
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<std::uint8_t>(std::lround(255.0 * shade * scene.tint[c]));
    }
  }
  return out;
}

}  // namespace fcndepth
