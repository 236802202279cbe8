#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "photoloss/eval.hpp"
#include "photoloss/loss_grad.hpp"
#include "photoloss/synth.hpp"

namespace photoloss {

enum class GradientMode { kAnalytic, kFiniteDifference };

struct FreeVariables {
  bool depth = true;
  bool poses = true;
};

/// One recovery problem: minimize the chosen regime total over the free
/// variables of a triplet, starting from the given initialization. The
/// triplet's ground-truth depth and relative poses serve as the references
/// of the direct and generalized regimes.
struct OptimProblem {
  FrameTriplet triplet;
  Intrinsics intrinsics;
  Regime regime = Regime::kGeneralized;
  FreeVariables free_vars;
  InverseDepthMap init_inv_depth;
  std::vector<Pose> init_poses;
  LossWeights weights;
  SsimParams ssim;

  void validate() const;
};

struct OptimConfig {
  int max_iters = 2000;
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double step_decay = 0.999;       // multiplicative step size decay per iteration
  double tolerance = 1e-6;         // relative loss change, stable 10-iteration window
  double grad_tolerance = 0.0;     // inf-norm gradient stop, 0 disables
  GradientMode gradient_mode = GradientMode::kAnalytic;

  void validate() const;
};

struct OptimReport {
  std::vector<double> loss_trace;  // loss at the start of each iteration
  InverseDepthMap final_inv_depth;
  std::vector<Pose> final_poses;
  int iterations = 0;
  double duration_seconds = 0.0;
  bool converged = false;
};

class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& msg, int iteration)
      : std::runtime_error(msg), iteration(iteration) {}
  int iteration;
};

/// Adam descent over the free variables; inverse depth is kept positive by
/// optimizing its logarithm. Throws DivergedError on a non-finite loss or
/// gradient.
OptimReport optimize(const OptimProblem& problem, const OptimConfig& cfg);

/// Gradient of the problem's loss at an arbitrary point, in the chosen mode.
/// Values are with respect to raw inverse depth and pose parameters.
LossGradients gradient(const OptimProblem& problem,
                       const InverseDepthMap& at_inv_depth,
                       const std::vector<Pose>& at_poses, GradientMode mode);

/// Central finite differences (step on raw inverse depth / pose entries)
/// plus flags marking variables whose discrete evaluation state differed
/// between the two probes (mask or argmin flips, validity changes).
struct FdGradients {
  LossGradients grads;
  BoolGrid depth_state_changed;
  std::vector<std::array<bool, 6>> pose_state_changed;
};

FdGradients finite_difference_gradient(const OptimProblem& problem,
                                       const InverseDepthMap& at_inv_depth,
                                       const std::vector<Pose>& at_poses,
                                       double step = 1e-4);

/// Three-frame absolute trajectory {t-1, t, t+1} implied by a triplet's
/// relative poses, anchored at the target frame.
Trajectory triplet_trajectory(const std::vector<Pose>& rel_poses);

struct RegimeResult {
  Regime regime = Regime::kGeneralized;
  OptimReport report;
  DepthMetrics depth_metrics;
  ApeMetrics ape_metrics;
};

/// Runs all three regimes from the same initialization and evaluates each
/// result against the triplet's ground truth.
std::array<RegimeResult, 3> compare_regimes(const FrameTriplet& triplet,
                                            const Intrinsics& K,
                                            const InverseDepthMap& init_inv_depth,
                                            const std::vector<Pose>& init_poses,
                                            const LossWeights& weights,
                                            const SsimParams& ssim,
                                            const OptimConfig& cfg);

}  // namespace photoloss
