#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "photoloss/losses.hpp"

namespace photoloss {

enum class Regime { kSelfSupervised, kDirect, kGeneralized };

const char* regime_name(Regime r);
std::optional<Regime> regime_from_name(const std::string& name);

/// Pose parameter order: (rx, ry, rz, tx, ty, tz).
using PoseGrad = Eigen::Matrix<double, 6, 1>;

struct LossGradients {
  double value = 0.0;
  Grid wrt_inv_depth;               // empty when depth gradients not requested
  std::vector<PoseGrad> wrt_poses;  // empty when pose gradients not requested
};

/// Evaluates the selected total loss. Produces the same value as composing
/// the public loss functions. ref_* are ignored by the self-supervised
/// regime. When state is non-null it receives a hash of every discrete
/// choice of the evaluation (source argmins, reliability masks, validity,
/// normalization extrema); finite-difference probes compare it to detect
/// boundary crossings.
double regime_loss(Regime regime, const Image& target,
                   const std::vector<Image>& sources,
                   const InverseDepthMap& pred_inv_depth,
                   const std::vector<Pose>& pred_poses,
                   const InverseDepthMap& ref_inv_depth,
                   const std::vector<Pose>& ref_poses, const Intrinsics& K,
                   const LossWeights& w, const SsimParams& p,
                   std::uint64_t* state = nullptr);

/// Loss value plus analytic gradients with respect to the predicted inverse
/// depth and/or the predicted pose parameters. Reliability masks, source
/// argmins and validity are treated as constants of the evaluation point.
LossGradients regime_loss_gradient(Regime regime, const Image& target,
                                   const std::vector<Image>& sources,
                                   const InverseDepthMap& pred_inv_depth,
                                   const std::vector<Pose>& pred_poses,
                                   const InverseDepthMap& ref_inv_depth,
                                   const std::vector<Pose>& ref_poses,
                                   const Intrinsics& K, const LossWeights& w,
                                   const SsimParams& p, bool wrt_depth,
                                   bool wrt_poses);

}  // namespace photoloss
