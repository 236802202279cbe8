#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "photoloss/geometry.hpp"
#include "photoloss/image.hpp"

namespace photoloss {

struct DepthMetrics {
  double rel_mean = 0.0;
  double rel_max = 0.0;
  double rel_median = 0.0;
  std::array<double, 3> acc = {0.0, 0.0, 0.0};  // delta < 1.25^k, k = 1..3
  double scale = 1.0;                           // applied alignment scale
  bool degenerate = false;  // set when median <= mean <= max fails to hold
};

enum class ScaleAlignment { kGlobal, kPerFrame, kNone };

/// Closed-form RMSE-minimizing scale: sum(ref * pred) / sum(pred^2) over
/// all pixels of all frames.
double align_depth_scale(const std::vector<DepthMap>& pred,
                         const std::vector<DepthMap>& ref);

/// Relative-error statistics and delta accuracies over all pixels of all
/// frames, after scale alignment (global scalar by default).
DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& ref,
                           ScaleAlignment mode = ScaleAlignment::kGlobal);

struct TrajectoryEntry {
  std::int64_t index = 0;
  Pose pose;  // absolute camera-to-world
};

using Trajectory = std::vector<TrajectoryEntry>;

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

/// Least-squares similarity aligning predicted positions onto reference
/// positions (Umeyama's closed form with the determinant-sign correction).
/// Throws std::invalid_argument for fewer than 3 poses, mismatched indices
/// or a degenerate (collinear) configuration.
SimilarityTransform umeyama_align(const Trajectory& pred, const Trajectory& ref,
                                  bool with_scale = true);

struct ApeMetrics {
  double rot_mean = 0.0;
  double rot_max = 0.0;
  double rot_median = 0.0;
  double trans_mean = 0.0;
  double trans_max = 0.0;
  double trans_median = 0.0;
};

struct ApeOptions {
  int segment_len = 150;
  bool with_scale = true;
  bool align = true;  // test hook: false skips the Umeyama alignment
};

/// Splits the trajectories into consecutive segments of segment_len (a
/// final remainder shorter than 3 frames is dropped), aligns each segment
/// independently, and aggregates per-frame APE_rot = ||rot(E) - I||_F and
/// APE_trans = ||trans(E)||_2 with E = P^-1 * P_hat over all frames.
ApeMetrics ape(const Trajectory& pred, const Trajectory& ref,
               const ApeOptions& opts = {});

}  // namespace photoloss
