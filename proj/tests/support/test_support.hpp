#pragma once

// Shared fixtures and independent reference implementations ("oracles")
// used by the unit and acceptance suites. Everything here is test-only and
// deliberately written in the most literal way possible, so it stays an
// independent check on the library path.

#include <cmath>

#include <Eigen/Dense>
#include <vector>

#include "photoloss/geometry.hpp"
#include "photoloss/image.hpp"
#include "photoloss/losses.hpp"
#include "photoloss/random.hpp"
#include "photoloss/synth.hpp"

namespace testsupport {

using namespace photoloss;

inline Grid random_grid(int h, int w, std::uint64_t seed, double lo = 0.0,
                        double hi = 1.0) {
  Rng rng(seed);
  Grid g(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) g(v, u) = rng.uniform(lo, hi);
  return g;
}

inline Image random_image(int h, int w, int channels, std::uint64_t seed) {
  std::vector<Grid> planes;
  for (int c = 0; c < channels; ++c)
    planes.push_back(random_grid(h, w, seed + std::uint64_t(c) * 1315423911ULL));
  return Image(std::move(planes));
}

inline Pose random_pose(std::uint64_t seed, double rot_scale = 0.3,
                        double trans_scale = 0.5) {
  Rng rng(seed);
  Pose p;
  p.rotation = rot_scale * rng.normal3();
  p.translation = trans_scale * rng.normal3();
  return p;
}

/// Literal double-loop bilinear interpolation with clamped coordinates.
inline double bilinear_oracle(const Grid& src, double x, double y) {
  const int w = int(src.cols());
  const int h = int(src.rows());
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = int(std::floor(x));
  const int y0 = int(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double wx = x - x0;
  const double wy = y - y0;
  return (1.0 - wy) * ((1.0 - wx) * src(y0, x0) + wx * src(y0, x1)) +
         wy * ((1.0 - wx) * src(y1, x0) + wx * src(y1, x1));
}

/// Literal windowed SSIM at one pixel: box means over a clamped window,
/// variances/covariance from the same window, the standard ratio.
inline double ssim_oracle_at(const Grid& a, const Grid& b, int v, int u,
                             const SsimParams& p) {
  const int h = int(a.rows());
  const int w = int(a.cols());
  const int k = p.window / 2;
  const double n = double(p.window * p.window);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int dv = -k; dv <= k; ++dv)
    for (int du = -k; du <= k; ++du) {
      const int sv = std::clamp(v + dv, 0, h - 1);
      const int su = std::clamp(u + du, 0, w - 1);
      sa += a(sv, su);
      sb += b(sv, su);
      saa += a(sv, su) * a(sv, su);
      sbb += b(sv, su) * b(sv, su);
      sab += a(sv, su) * b(sv, su);
    }
  const double ma = sa / n, mb = sb / n;
  const double va = saa / n - ma * ma;
  const double vb = sbb / n - mb * mb;
  const double vab = sab / n - ma * mb;
  return ((2.0 * ma * mb + p.c1) * (2.0 * vab + p.c2)) /
         ((ma * ma + mb * mb + p.c1) * (va + vb + p.c2));
}

/// Channel-averaged SSIM map via the per-pixel oracle.
inline Grid ssim_oracle(const Image& a, const Image& b, const SsimParams& p) {
  Grid out = Grid::Zero(a.height(), a.width());
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      double s = 0.0;
      for (int c = 0; c < a.channels(); ++c)
        s += ssim_oracle_at(a.plane(c), b.plane(c), v, u, p);
      out(v, u) = s / a.channels();
    }
  return out;
}

/// Per-pixel photometric error from the SSIM oracle plus channel-mean L1.
inline Grid pe_oracle(const Image& a, const Image& b, const LossWeights& w,
                      const SsimParams& p) {
  const Grid s = ssim_oracle(a, b, p);
  Grid l1 = Grid::Zero(a.height(), a.width());
  for (int c = 0; c < a.channels(); ++c)
    l1 += (a.plane(c) - b.plane(c)).abs();
  l1 /= double(a.channels());
  return (w.alpha / 2.0) * (1.0 - s) + (1.0 - w.alpha) * l1;
}

/// Axis-angle to rotation matrix through the quaternion parameterization;
/// an independent route to cross-check the Rodrigues path.
inline Eigen::Matrix3d quaternion_rotation_oracle(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  double qw = std::cos(theta / 2.0);
  Eigen::Vector3d qv = Eigen::Vector3d::Zero();
  if (theta > 0.0) qv = std::sin(theta / 2.0) * (r / theta);
  const double x = qv.x(), y = qv.y(), z = qv.z(), w = qw;
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return m;
}

/// Scalar pinhole projection of one pixel through depth and pose.
inline Eigen::Vector2d project_pixel_oracle(int u, int v, double depth,
                                            const Pose& pose, const Intrinsics& K) {
  const Eigen::Vector3d ray((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  const Eigen::Vector3d p = pose.rotation_matrix() * (depth * ray) + pose.translation;
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

/// Small translating fronto-parallel plane scene used across suites.
inline SceneSpec default_plane_scene(int size = 64, int frames = 3,
                                     double step = 0.08, int channels = 1) {
  SceneSpec spec;
  spec.surface.kind = SurfaceKind::kPlane;
  spec.surface.distance = 2.0;
  spec.texture.seed = 7;
  spec.intrinsics = {double(size), double(size), (size - 1) / 2.0,
                     (size - 1) / 2.0, size, size};
  spec.channels = channels;
  const double mid = 0.5 * (frames - 1);
  for (int k = 0; k < frames; ++k) {
    Pose pose;
    pose.translation = Eigen::Vector3d((k - mid) * step, 0.02 * (k - mid) * (k - mid), 0.0);
    spec.trajectory.push_back(pose);
  }
  return spec;
}

inline SceneSpec default_slanted_scene(int size = 64, int frames = 3,
                                       double step = 0.08) {
  SceneSpec spec = default_plane_scene(size, frames, step);
  spec.surface.kind = SurfaceKind::kSlantedPlane;
  spec.surface.slope_x = 0.25;
  spec.surface.slope_y = -0.15;
  return spec;
}

}  // namespace testsupport
