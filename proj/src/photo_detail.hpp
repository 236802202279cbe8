#pragma once

// Internal forward/backward machinery shared by the loss functions and the
// analytic gradients. Not part of the public headers.

#include <cstdint>
#include <limits>
#include <vector>

#include "photoloss/geometry.hpp"
#include "photoloss/image.hpp"
#include "photoloss/losses.hpp"

namespace photoloss::detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Box mean with clamp-to-edge padding.
Grid box_filter(const Grid& g, int window);

/// Adjoint of box_filter (scatter with the same edge clamping).
Grid box_scatter(const Grid& g, int window);

struct BoxFields {
  Grid m;   // box(x)
  Grid mm;  // box(x*x)
};

BoxFields box_fields(const Grid& g, int window);

/// Cross terms of one (a, b) channel pair needed by SSIM and its backward.
struct PairFields {
  Grid mb;   // box(b)
  Grid mbb;  // box(b*b)
  Grid mab;  // box(a*b)
};

Grid ssim_channel(const Grid& a, const BoxFields& af, const Grid& b,
                  const SsimParams& p, PairFields* tape);

/// Accumulates d(loss)/da and/or d(loss)/db given upstream d(loss)/dS.
/// Either output may be null.
void ssim_channel_backward(const Grid& a, const BoxFields& af, const Grid& b,
                           const PairFields& tape, const SsimParams& p,
                           const Grid& g_ssim, Grid* g_a, Grid* g_b);

/// Box fields of every target channel, computed once per target image.
struct TargetCache {
  std::vector<BoxFields> fields;
};

TargetCache make_target_cache(const Image& target, const SsimParams& p);

/// Photometric error map between the target and an arbitrary image b.
Grid pe_against_target(const Image& target, const TargetCache& tc,
                       const Image& b, const LossWeights& w,
                       const SsimParams& p, std::vector<PairFields>* tapes);

/// One warped-source photometric branch with its tape.
struct WarpBranch {
  FlowField flow;
  Image warped;
  std::vector<PairFields> pair_fields;  // per channel
  Grid pe;
};

WarpBranch warp_pe_branch(const Image& target, const TargetCache& tc,
                          const Image& source, const Grid& depth,
                          const Pose& pose, const Intrinsics& K,
                          const LossWeights& w, const SsimParams& p);

/// Per-pixel minimum of branch pe over branches valid at that pixel.
struct MinPe {
  Grid values;        // +inf where no branch is valid
  IndexGrid argmin;   // -1 where no branch is valid
};

MinPe min_over_branches(const std::vector<WarpBranch>& branches);

/// min_j pe(target, source_j), no validity involved.
Grid identity_pe_min(const Image& target, const TargetCache& tc,
                     const std::vector<Image>& sources, const LossWeights& w,
                     const SsimParams& p);

/// Backward through pe -> bilinear -> project for one branch. upstream is
/// d(loss)/d(pe) per pixel (zero where this branch was not selected).
/// g_depth is d(loss)/d(depth values); either output may be null.
void warp_pe_branch_backward(const Image& target, const TargetCache& tc,
                             const Image& source, const Grid& depth,
                             const Pose& pose, const Intrinsics& K,
                             const LossWeights& w, const SsimParams& p,
                             const WarpBranch& branch, const Grid& upstream,
                             Grid* g_depth, Eigen::Matrix<double, 6, 1>* g_pose);

/// Smoothness forward map plus the data reused by the backward pass.
struct SmoothnessTape {
  Grid values;     // per-pixel loss
  Grid ax, ay;     // edge weights exp(-|grad I|)
  double mean_inv_depth = 0.0;
};

SmoothnessTape smoothness_forward(const Grid& inv_depth, const Image& target);

/// upstream is d(loss)/d(values) per pixel; accumulates into g_inv_depth.
void smoothness_backward(const Grid& inv_depth, const SmoothnessTape& tape,
                         const Grid& upstream, Grid& g_inv_depth);

/// Joint min-max normalization state of the depth-supervision SSIM term.
struct MinMaxState {
  double lo = 0.0, hi = 0.0;
  bool lo_in_pred = false, hi_in_pred = false;
  Eigen::Index lo_index = 0, hi_index = 0;  // linear index within its map
};

MinMaxState joint_min_max(const Grid& pred, const Grid& ref);

/// Forward depth-supervision loss with tape for the backward pass.
struct DepthSupTape {
  double value = 0.0;
  MinMaxState mm;
  Grid na, nb;  // normalized pred / ref
  BoxFields af;
  PairFields pf;
  Grid ssim;
};

DepthSupTape depth_supervision_forward(const Grid& pred, const Grid& ref,
                                       const SsimParams& p);

/// Accumulates scale * d(loss)/d(pred) into g_pred.
void depth_supervision_backward(const Grid& pred, const Grid& ref,
                                const DepthSupTape& tape, const SsimParams& p,
                                double scale, Grid& g_pred);

/// FNV-1a accumulation helpers for discrete-state hashing.
struct StateHasher {
  std::uint64_t h = 1469598103934665603ULL;
  void add(const void* data, std::size_t n);
  void add_u64(std::uint64_t v);
};

}  // namespace photoloss::detail
