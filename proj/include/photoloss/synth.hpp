#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "photoloss/geometry.hpp"
#include "photoloss/image.hpp"

namespace photoloss {

enum class SurfaceKind { kPlane, kSlantedPlane, kSpherePatch };

/// World-space surface. Planes are z = distance + slope_x * x + slope_y * y
/// (slopes zero for the fronto-parallel kind); the sphere is given by
/// center and radius and is seen from outside.
struct Surface {
  SurfaceKind kind = SurfaceKind::kPlane;
  double distance = 2.0;
  double slope_x = 0.0;
  double slope_y = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d(0.0, 0.0, 5.0);
  double radius = 2.5;
};

/// Multi-octave 3D value noise evaluated at world-space surface points, so
/// the albedo is view independent and photometric constancy holds exactly.
struct TextureSpec {
  std::uint64_t seed = 7;
  int octaves = 3;
  double base_frequency = 3.0;
  double gain = 0.5;      // amplitude falloff per octave
  double contrast = 0.55; // peak-to-peak intensity range
  double bias = 0.5;      // mid intensity
};

/// Scene description: surface + texture rendered from a trajectory of
/// absolute camera-to-world poses.
struct SceneSpec {
  Surface surface;
  TextureSpec texture;
  std::vector<Pose> trajectory;
  Intrinsics intrinsics;
  int channels = 1;

  void validate() const;
};

/// Target frame with its two neighbours, exact depth and the relative
/// poses T_{t -> t-1} and T_{t -> t+1} composed from the trajectory.
struct FrameTriplet {
  Image target;
  std::vector<Image> sources;   // {frame t-1, frame t+1}
  DepthMap target_depth;
  std::vector<Pose> rel_poses;  // {T_{t -> t-1}, T_{t -> t+1}}
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& msg, int pose_index)
      : std::runtime_error(msg), pose_index(pose_index) {}
  int pose_index;
};

double texture_value(const TextureSpec& tex, const Eigen::Vector3d& point,
                     int channel);

Image render_frame(const SceneSpec& spec, int frame_index);
DepthMap render_depth(const SceneSpec& spec, int frame_index);

/// One triplet per interior trajectory index.
std::vector<FrameTriplet> render_scene(const SceneSpec& spec);

/// Noisy copy used as optimizer initialization: multiplicative log-normal
/// noise on depth (sigma = depth_noise), additive Gaussian noise on the
/// axis-angle components (sigma = rot_noise, radians) and on translation
/// (sigma = trans_noise * ||x||). Images are untouched.
FrameTriplet perturb(const FrameTriplet& triplet, double depth_noise,
                     double rot_noise, double trans_noise, std::uint64_t seed);

/// Relative pose of frame `from` with respect to frame `to`:
/// T_{from -> to} = inverse(P_to) * P_from for camera-to-world poses P.
Pose relative_pose(const Pose& abs_from, const Pose& abs_to);

}  // namespace photoloss
