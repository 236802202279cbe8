#pragma once

#include <optional>
#include <vector>

#include "photoloss/geometry.hpp"
#include "photoloss/image.hpp"

namespace photoloss {

/// Balancing weights of the loss terms. Defaults are the shipped values:
/// alpha = 0.85, lambda = 0.001 for the photometric/smoothness pair and
/// gamma = 30, zeta = psi = 15, theta = 160 for direct supervision.
struct LossWeights {
  double alpha = 0.85;   // SSIM vs L1 balance inside pe
  double lambda = 0.001; // smoothness weight
  double psi = 15.0;     // photometric weight in the direct loss
  double gamma = 30.0;   // depth-supervision weight
  double zeta = 15.0;    // translation weight
  double theta = 160.0;  // rotation weight

  void validate() const;
};

/// Box-window SSIM parameters on the [0, 1] intensity scale.
struct SsimParams {
  int window = 3;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  void validate() const;
};

/// Per-pixel loss values plus the mask of pixels included in the mean.
struct PixelLossMap {
  Grid values;
  BoolGrid weight_mask;

  /// Sum of masked values divided by the total pixel count (masked-out
  /// pixels contribute zero; the denominator stays H*W).
  double mean_over_all_pixels() const;
};

/// Per-pixel SSIM in [-1, 1], window means/variances with clamp-to-edge
/// padding, averaged over channels.
Grid ssim_map(const Image& a, const Image& b, const SsimParams& p);

/// Photometric error alpha/2 * (1 - SSIM) + (1 - alpha) * |a - b|,
/// the L1 part averaged over channels. Mask is all-true.
PixelLossMap pe(const Image& a, const Image& b, const LossWeights& w,
                const SsimParams& p);

/// Per-pixel minimum over sources of pe(target, warp(source_j)); a pixel's
/// minimum only considers sources whose warp is valid there, and pixels
/// valid in no warp are masked out.
PixelLossMap reprojection_loss(const Image& target,
                               const std::vector<Image>& sources,
                               const DepthMap& depth,
                               const std::vector<Pose>& poses,
                               const Intrinsics& K, const LossWeights& w,
                               const SsimParams& p);

/// Reliability mask: min_j pe(target, warped_j) < min_j pe(target, source_j),
/// strict. When valid masks are given, the warped-side minimum only
/// considers valid sources (no valid source means false).
BoolGrid automask(const Image& target, const std::vector<Image>& sources,
                  const std::vector<Image>& warped, const LossWeights& w,
                  const SsimParams& p,
                  const std::vector<BoolGrid>* valid = nullptr);

/// Edge-aware smoothness on mean-normalized inverse depth: forward
/// differences, last row/column padded with zero gradient, image gradients
/// averaged over channels. Mask is all-true.
PixelLossMap smoothness_loss(const InverseDepthMap& inv_depth,
                             const Image& target);

double self_supervised_total(const Image& target,
                             const std::vector<Image>& sources,
                             const InverseDepthMap& inv_depth,
                             const std::vector<Pose>& poses,
                             const Intrinsics& K, const LossWeights& w,
                             const SsimParams& p);

/// Inverse-depth supervision: mean of 0.1|d^ - d| + grad-difference term +
/// (1 - SSIM)/2 on jointly min-max normalized maps.
double depth_supervision_loss(const InverseDepthMap& pred,
                              const InverseDepthMap& ref, const SsimParams& p);

/// zeta * ||x^ - x||_2 + theta * ||r^ - r||_2.
double pose_supervision_loss(const Pose& pred, const Pose& ref,
                             const LossWeights& w);

double direct_supervised_total(const Image& target,
                               const std::vector<Image>& sources,
                               const InverseDepthMap& pred_inv_depth,
                               const std::vector<Pose>& pred_poses,
                               const InverseDepthMap& ref_inv_depth,
                               const std::vector<Pose>& ref_poses,
                               const Intrinsics& K, const LossWeights& w,
                               const SsimParams& p);

/// Depth term of the generalized loss: photometric error of warping with
/// the predicted depth and the reference poses, masked by its own
/// reliability mask.
PixelLossMap gen_depth_loss(const Image& target,
                            const std::vector<Image>& sources,
                            const DepthMap& pred_depth,
                            const std::vector<Pose>& ref_poses,
                            const Intrinsics& K, const LossWeights& w,
                            const SsimParams& p);

/// Pose term of the generalized loss: reference depth, predicted poses.
PixelLossMap gen_pose_loss(const Image& target,
                           const std::vector<Image>& sources,
                           const DepthMap& ref_depth,
                           const std::vector<Pose>& pred_poses,
                           const Intrinsics& K, const LossWeights& w,
                           const SsimParams& p);

/// Generalized total: masked mean of the two generalized photometric terms
/// plus the self-supervised photometric term plus lambda * smoothness. No
/// cross-term weights.
double generalized_total(const Image& target, const std::vector<Image>& sources,
                         const InverseDepthMap& pred_inv_depth,
                         const std::vector<Pose>& pred_poses,
                         const InverseDepthMap& ref_inv_depth,
                         const std::vector<Pose>& ref_poses,
                         const Intrinsics& K, const LossWeights& w,
                         const SsimParams& p);

}  // namespace photoloss
