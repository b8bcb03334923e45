#pragma once

#include <string_view>

#include "fcndepth/io.hpp"
#include "fcndepth/random.hpp"

namespace fcndepth {

/// Pinhole camera; pixel (u, v) looks along ((u + 0.5 - cx) / f, (v + 0.5 - cy) / f, 1).
struct PinholeCamera {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Focal length equal to the image width, principal point at the centre.
  static PinholeCamera for_resolution(int width, int height) {
    return {static_cast<double>(width), width / 2.0, height / 2.0};
  }
};

/// Plane n . X = offset in camera coordinates (n need not be unit length).
struct Plane {
  double nx = 0.0;
  double ny = 0.0;
  double nz = 1.0;
  double offset = 1.0;

  /// Depth (Z) where the ray through pixel (u, v) meets the plane.
  double depth_at(const PinholeCamera& cam, double u, double v) const {
    const double rx = (u + 0.5 - cam.cx) / cam.focal;
    const double ry = (v + 0.5 - cam.cy) / cam.focal;
    return offset / (nx * rx + ny * ry + nz);
  }
};

enum class SceneKind { fronto_plane, slanted_plane, box };

std::string_view to_string(SceneKind kind);

/// A background plane, optionally with a fronto-parallel box face in front of it.
struct Scene {
  SceneKind kind = SceneKind::fronto_plane;
  Plane background;
  /// Box face: pixel rectangle [x0, x1) x [y0, y1) at a constant depth.
  int box_x0 = 0, box_y0 = 0, box_x1 = 0, box_y1 = 0;
  double box_depth = 0.0;
  /// Texture tint, 0..1 per channel.
  double tint[3] = {1.0, 1.0, 1.0};
};

struct SceneSample {
  RgbImage image;
  DepthRaster depth;
};

Scene random_scene(Rng& rng, int width, int height);
SceneSample render_scene(const Scene& scene, int width, int height);

}  // namespace fcndepth
