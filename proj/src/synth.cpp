#include "photoloss/synth.hpp"

#include <atomic>
#include <cmath>

#include "photoloss/parallel.hpp"
#include "photoloss/random.hpp"

namespace photoloss {

namespace {

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// Trilinear value noise on the integer lattice with quintic fade.
double value_noise3(std::uint64_t seed, const Eigen::Vector3d& p,
                    std::uint32_t salt) {
  const double fx = std::floor(p.x());
  const double fy = std::floor(p.y());
  const double fz = std::floor(p.z());
  const auto ix = std::int64_t(fx);
  const auto iy = std::int64_t(fy);
  const auto iz = std::int64_t(fz);
  const double tx = quintic(p.x() - fx);
  const double ty = quintic(p.y() - fy);
  const double tz = quintic(p.z() - fz);

  double corners[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx)
        corners[dz][dy][dx] = lattice_unit(seed, ix + dx, iy + dy, iz + dz, salt);

  const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(corners[0][0][0], corners[0][0][1], tx);
  const double c01 = lerp(corners[0][1][0], corners[0][1][1], tx);
  const double c10 = lerp(corners[1][0][0], corners[1][0][1], tx);
  const double c11 = lerp(corners[1][1][0], corners[1][1][1], tx);
  return lerp(lerp(c00, c01, ty), lerp(c10, c11, ty), tz);
}

/// Signed ray parameter of the first surface hit along origin + s * dir,
/// or a negative value when the ray misses.
double intersect(const Surface& surf, const Eigen::Vector3d& origin,
                 const Eigen::Vector3d& dir) {
  switch (surf.kind) {
    case SurfaceKind::kPlane:
    case SurfaceKind::kSlantedPlane: {
      // n . X = c with n = (-sx, -sy, 1), c = distance
      const Eigen::Vector3d n(-surf.slope_x, -surf.slope_y, 1.0);
      const double denom = n.dot(dir);
      if (std::abs(denom) < 1e-12) return -1.0;
      return (surf.distance - n.dot(origin)) / denom;
    }
    case SurfaceKind::kSpherePatch: {
      const Eigen::Vector3d oc = origin - surf.center;
      const double a = dir.squaredNorm();
      const double b = 2.0 * dir.dot(oc);
      const double c = oc.squaredNorm() - surf.radius * surf.radius;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) return -1.0;
      return (-b - std::sqrt(disc)) / (2.0 * a);  // near intersection
    }
  }
  return -1.0;
}

struct CameraFrame {
  Eigen::Matrix3d rotation;  // camera-to-world
  Eigen::Vector3d center;
};

CameraFrame camera_frame(const SceneSpec& spec, int frame_index) {
  const Pose& pose = spec.trajectory[size_t(frame_index)];
  return {pose.rotation_matrix(), pose.translation};
}

}  // namespace

void SceneSpec::validate() const {
  intrinsics.validate();
  if (trajectory.size() < 3)
    throw std::invalid_argument("SceneSpec: trajectory needs at least 3 poses");
  for (const Pose& p : trajectory) p.validate();
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("SceneSpec: channels must be 1 or 3");
  if (texture.octaves < 1 || texture.base_frequency <= 0.0)
    throw std::invalid_argument("SceneSpec: invalid texture spec");
  if (surface.kind == SurfaceKind::kSpherePatch && surface.radius <= 0.0)
    throw std::invalid_argument("SceneSpec: sphere radius must be positive");
}

double texture_value(const TextureSpec& tex, const Eigen::Vector3d& point,
                     int channel) {
  double amp = 1.0;
  double total_amp = 0.0;
  double freq = tex.base_frequency;
  double acc = 0.0;
  for (int o = 0; o < tex.octaves; ++o) {
    acc += amp * value_noise3(tex.seed, point * freq,
                              std::uint32_t(channel * 97 + o));
    total_amp += amp;
    amp *= tex.gain;
    freq *= 2.0;
  }
  const double noise = acc / total_amp;  // in [0, 1)
  const double intensity = tex.bias + tex.contrast * (noise - 0.5);
  return std::clamp(intensity, 0.0, 1.0);
}

namespace {

/// Depth and world point per pixel for one frame; throws GenerationError
/// when any ray misses the surface or hits it behind the camera.
void trace_frame(const SceneSpec& spec, int frame_index, Grid* depth,
                 std::vector<Grid>* planes) {
  const Intrinsics& K = spec.intrinsics;
  const CameraFrame cam = camera_frame(spec, frame_index);
  const int h = K.height;
  const int w = K.width;
  if (depth) depth->resize(h, w);
  if (planes)
    planes->assign(size_t(spec.channels), Grid(h, w));

  std::atomic<bool> failed{false};
  parallel_for(h, [&](int v0, int v1) {
    for (int v = v0; v < v1; ++v)
      for (int u = 0; u < w; ++u) {
        const Eigen::Vector3d ray_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        const Eigen::Vector3d dir = cam.rotation * ray_cam;
        const double s = intersect(spec.surface, cam.center, dir);
        if (!(s > 0.0)) {
          failed.store(true);
          return;
        }
        if (depth) (*depth)(v, u) = s;  // ray_cam.z == 1, so s is camera depth
        if (planes) {
          const Eigen::Vector3d point = cam.center + s * dir;
          for (int c = 0; c < spec.channels; ++c)
            (*planes)[size_t(c)](v, u) = texture_value(spec.texture, point, c);
        }
      }
  });
  if (failed.load())
    throw GenerationError(
        "surface not visible from pose index " + std::to_string(frame_index),
        frame_index);
}

}  // namespace

Image render_frame(const SceneSpec& spec, int frame_index) {
  spec.validate();
  std::vector<Grid> planes;
  trace_frame(spec, frame_index, nullptr, &planes);
  return Image(std::move(planes));
}

DepthMap render_depth(const SceneSpec& spec, int frame_index) {
  spec.validate();
  Grid depth;
  trace_frame(spec, frame_index, &depth, nullptr);
  return DepthMap(std::move(depth));
}

std::vector<FrameTriplet> render_scene(const SceneSpec& spec) {
  spec.validate();
  const int n = int(spec.trajectory.size());

  std::vector<Image> frames;
  std::vector<Grid> depths(static_cast<size_t>(n));
  frames.reserve(size_t(n));
  for (int k = 0; k < n; ++k) {
    std::vector<Grid> planes;
    trace_frame(spec, k, &depths[size_t(k)], &planes);
    frames.push_back(Image(std::move(planes)));
  }

  std::vector<FrameTriplet> triplets;
  triplets.reserve(size_t(n - 2));
  for (int t = 1; t + 1 < n; ++t) {
    FrameTriplet trip;
    trip.target = frames[size_t(t)];
    trip.sources = {frames[size_t(t - 1)], frames[size_t(t + 1)]};
    trip.target_depth = DepthMap(depths[size_t(t)]);
    trip.rel_poses = {
        relative_pose(spec.trajectory[size_t(t)], spec.trajectory[size_t(t - 1)]),
        relative_pose(spec.trajectory[size_t(t)], spec.trajectory[size_t(t + 1)])};
    triplets.push_back(std::move(trip));
  }
  return triplets;
}

FrameTriplet perturb(const FrameTriplet& triplet, double depth_noise,
                     double rot_noise, double trans_noise, std::uint64_t seed) {
  Rng rng(seed);
  FrameTriplet out = triplet;

  Grid noisy = triplet.target_depth.values;
  for (int v = 0; v < int(noisy.rows()); ++v)
    for (int u = 0; u < int(noisy.cols()); ++u)
      noisy(v, u) *= std::exp(depth_noise * rng.normal());
  out.target_depth = DepthMap(std::move(noisy));

  for (Pose& pose : out.rel_poses) {
    pose.rotation += rot_noise * rng.normal3();
    pose.translation += trans_noise * pose.translation.norm() * rng.normal3();
    pose.validate();
  }
  return out;
}

Pose relative_pose(const Pose& abs_from, const Pose& abs_to) {
  return compose(inverse(abs_to), abs_from);
}

}  // namespace photoloss
