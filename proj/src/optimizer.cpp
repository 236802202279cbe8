#include "photoloss/optimizer.hpp"

#include <chrono>
#include <cmath>

namespace photoloss {

void OptimProblem::validate() const {
  intrinsics.validate();
  if (!free_vars.depth && !free_vars.poses)
    throw std::invalid_argument("OptimProblem: no free variables");
  if (triplet.sources.empty() || triplet.sources.size() != triplet.rel_poses.size())
    throw std::invalid_argument("OptimProblem: malformed triplet");
  if (init_poses.size() != triplet.rel_poses.size())
    throw std::invalid_argument("OptimProblem: one initial pose per source");
  if (init_inv_depth.height() != intrinsics.height ||
      init_inv_depth.width() != intrinsics.width)
    throw std::invalid_argument("OptimProblem: initial depth shape");
  weights.validate();
  ssim.validate();
}

void OptimConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("OptimConfig: max_iters < 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("OptimConfig: step size <= 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("OptimConfig: tolerance <= 0");
  if (!(step_decay > 0.0 && step_decay <= 1.0))
    throw std::invalid_argument("OptimConfig: step_decay outside (0, 1]");
  if (!(grad_tolerance >= 0.0))
    throw std::invalid_argument("OptimConfig: grad_tolerance < 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0))
    throw std::invalid_argument("OptimConfig: bad Adam moments");
}

namespace {

LossGradients eval_gradient(const OptimProblem& pr, const InverseDepthMap& inv_depth,
                            const std::vector<Pose>& poses, GradientMode mode) {
  if (mode == GradientMode::kAnalytic) {
    return regime_loss_gradient(pr.regime, pr.triplet.target, pr.triplet.sources,
                                inv_depth, poses, invert(pr.triplet.target_depth),
                                pr.triplet.rel_poses, pr.intrinsics, pr.weights,
                                pr.ssim, pr.free_vars.depth, pr.free_vars.poses);
  }
  FdGradients fd = finite_difference_gradient(pr, inv_depth, poses);
  return std::move(fd.grads);
}

bool all_finite(const LossGradients& g) {
  if (!std::isfinite(g.value)) return false;
  if (g.wrt_inv_depth.size() > 0 && !g.wrt_inv_depth.isFinite().all()) return false;
  for (const auto& pg : g.wrt_poses)
    if (!pg.allFinite()) return false;
  return true;
}

double grad_inf_norm(const LossGradients& g) {
  double m = 0.0;
  if (g.wrt_inv_depth.size() > 0) m = g.wrt_inv_depth.abs().maxCoeff();
  for (const auto& pg : g.wrt_poses)
    m = std::max(m, pg.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

OptimReport optimize(const OptimProblem& problem, const OptimConfig& cfg) {
  problem.validate();
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const int h = problem.intrinsics.height;
  const int w = problem.intrinsics.width;
  const size_t n_poses = problem.init_poses.size();

  const auto loss_at = [&](const Grid& log_inv, const std::vector<Pose>& ps) {
    return regime_loss(problem.regime, problem.triplet.target,
                       problem.triplet.sources, InverseDepthMap(log_inv.exp()), ps,
                       invert(problem.triplet.target_depth),
                       problem.triplet.rel_poses, problem.intrinsics,
                       problem.weights, problem.ssim);
  };

  // Parameters: log inverse depth (positivity by construction) + poses.
  Grid log_inv = problem.init_inv_depth.values.log();
  std::vector<Pose> poses = problem.init_poses;

  Grid m_depth = Grid::Zero(h, w), v_depth = Grid::Zero(h, w);
  std::vector<PoseGrad> m_pose(n_poses, PoseGrad::Zero());
  std::vector<PoseGrad> v_pose(n_poses, PoseGrad::Zero());

  OptimReport report;
  report.loss_trace.reserve(size_t(cfg.max_iters));

  double prev_loss = 0.0;
  int small_change_streak = 0;
  double lr = cfg.step_size;
  bool momentum_reset = false;  // set right after a full step rejection
  int adam_age = 0;             // moment age, restarts with the momentum

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const InverseDepthMap inv_depth(log_inv.exp());
    LossGradients g =
        eval_gradient(problem, inv_depth, poses, cfg.gradient_mode);
    if (!all_finite(g))
      throw DivergedError("non-finite loss or gradient at iteration " +
                              std::to_string(iter),
                          iter);
    report.loss_trace.push_back(g.value);

    // stable loss across a window of 10 consecutive iterations
    if (iter > 0) {
      const double rel = std::abs(g.value - prev_loss) /
                         std::max(std::abs(prev_loss), 1e-300);
      small_change_streak = rel < cfg.tolerance ? small_change_streak + 1 : 0;
      if (small_change_streak >= 9) {
        report.converged = true;
        break;
      }
    }
    prev_loss = g.value;

    if (cfg.grad_tolerance > 0.0 && grad_inf_norm(g) < cfg.grad_tolerance) {
      report.converged = true;
      break;
    }

    ++adam_age;
    const double bc1 = 1.0 - std::pow(cfg.beta1, adam_age);
    const double bc2 = 1.0 - std::pow(cfg.beta2, adam_age);

    Grid depth_step;
    std::vector<PoseGrad> pose_step(n_poses, PoseGrad::Zero());
    if (problem.free_vars.depth) {
      // chain through the log parameterization: dL/d(log d) = dL/dd * d
      const Grid g_log = g.wrt_inv_depth * inv_depth.values;
      m_depth = cfg.beta1 * m_depth + (1.0 - cfg.beta1) * g_log;
      v_depth = cfg.beta2 * v_depth + (1.0 - cfg.beta2) * g_log * g_log;
      depth_step = lr * (m_depth / bc1) / ((v_depth / bc2).sqrt() + cfg.epsilon);
    }
    if (problem.free_vars.poses) {
      for (size_t j = 0; j < n_poses; ++j) {
        const PoseGrad& pg = g.wrt_poses[j];
        m_pose[j] = cfg.beta1 * m_pose[j] + (1.0 - cfg.beta1) * pg;
        v_pose[j] = cfg.beta2 * v_pose[j] + (1.0 - cfg.beta2) * pg.cwiseProduct(pg);
        pose_step[j] =
            lr * (m_pose[j] / bc1).cwiseQuotient(
                     (v_pose[j] / bc2).cwiseSqrt() + PoseGrad::Constant(cfg.epsilon));
      }
    }

    // Backtracking acceptance keeps the trace non-increasing: halve the
    // proposed step until the loss does not grow, or keep the iterate.
    bool accepted = false;
    double scale = 1.0;
    for (int attempt = 0; attempt < 24 && !accepted; ++attempt, scale *= 0.5) {
      Grid trial_log = log_inv;
      std::vector<Pose> trial_poses = poses;
      if (problem.free_vars.depth) trial_log -= scale * depth_step;
      if (problem.free_vars.poses)
        for (size_t j = 0; j < n_poses; ++j) {
          trial_poses[j].rotation -= scale * pose_step[j].segment<3>(0);
          trial_poses[j].translation -= scale * pose_step[j].segment<3>(3);
        }
      const double trial_loss = loss_at(trial_log, trial_poses);
      if (std::isfinite(trial_loss) && trial_loss <= g.value) {
        log_inv = std::move(trial_log);
        poses = std::move(trial_poses);
        accepted = true;
      }
    }
    if (!accepted) {
      if (momentum_reset) {
        // even the plain gradient direction cannot descend: a minimum
        report.converged = true;
        break;
      }
      // momentum may be stale; retry from the raw gradient next iteration
      m_depth.setZero();
      v_depth.setZero();
      for (size_t j = 0; j < n_poses; ++j) {
        m_pose[j].setZero();
        v_pose[j].setZero();
      }
      adam_age = 0;
      momentum_reset = true;
    } else {
      momentum_reset = false;
    }
    lr *= cfg.step_decay;
  }

  report.final_inv_depth = InverseDepthMap(log_inv.exp());
  report.final_poses = std::move(poses);
  report.iterations = int(report.loss_trace.size());
  report.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

LossGradients gradient(const OptimProblem& problem,
                       const InverseDepthMap& at_inv_depth,
                       const std::vector<Pose>& at_poses, GradientMode mode) {
  problem.validate();
  return eval_gradient(problem, at_inv_depth, at_poses, mode);
}

FdGradients finite_difference_gradient(const OptimProblem& problem,
                                       const InverseDepthMap& at_inv_depth,
                                       const std::vector<Pose>& at_poses,
                                       double step) {
  const auto eval = [&](const InverseDepthMap& d, const std::vector<Pose>& ps,
                        std::uint64_t* state) {
    return regime_loss(problem.regime, problem.triplet.target,
                       problem.triplet.sources, d, ps,
                       invert(problem.triplet.target_depth),
                       problem.triplet.rel_poses, problem.intrinsics,
                       problem.weights, problem.ssim, state);
  };

  const int h = at_inv_depth.height();
  const int w = at_inv_depth.width();
  FdGradients out;
  out.grads.value = eval(at_inv_depth, at_poses, nullptr);
  out.depth_state_changed = BoolGrid::Constant(h, w, false);
  out.pose_state_changed.assign(at_poses.size(), {false, false, false, false, false, false});

  if (problem.free_vars.depth) {
    out.grads.wrt_inv_depth = Grid::Zero(h, w);
    Grid values = at_inv_depth.values;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const double orig = values(v, u);
        std::uint64_t s_plus = 0, s_minus = 0;
        values(v, u) = orig + step;
        const double f_plus = eval(InverseDepthMap(values), at_poses, &s_plus);
        values(v, u) = orig - step;
        const double f_minus = eval(InverseDepthMap(values), at_poses, &s_minus);
        values(v, u) = orig;
        out.grads.wrt_inv_depth(v, u) = (f_plus - f_minus) / (2.0 * step);
        out.depth_state_changed(v, u) = s_plus != s_minus;
      }
  }
  if (problem.free_vars.poses) {
    out.grads.wrt_poses.assign(at_poses.size(), PoseGrad::Zero());
    std::vector<Pose> poses = at_poses;
    for (size_t j = 0; j < poses.size(); ++j)
      for (int k = 0; k < 6; ++k) {
        double* entry = k < 3 ? &poses[j].rotation[k] : &poses[j].translation[k - 3];
        const double orig = *entry;
        std::uint64_t s_plus = 0, s_minus = 0;
        *entry = orig + step;
        const double f_plus = eval(at_inv_depth, poses, &s_plus);
        *entry = orig - step;
        const double f_minus = eval(at_inv_depth, poses, &s_minus);
        *entry = orig;
        out.grads.wrt_poses[j][k] = (f_plus - f_minus) / (2.0 * step);
        out.pose_state_changed[j][size_t(k)] = s_plus != s_minus;
      }
  }
  return out;
}

Trajectory triplet_trajectory(const std::vector<Pose>& rel_poses) {
  if (rel_poses.size() != 2)
    throw std::invalid_argument("triplet_trajectory: expected 2 relative poses");
  // P_src = P_tgt * T_{t -> src}^-1, anchored at P_tgt = identity.
  Trajectory traj(3);
  traj[0] = {0, inverse(rel_poses[0])};
  traj[1] = {1, Pose::identity()};
  traj[2] = {2, inverse(rel_poses[1])};
  return traj;
}

std::array<RegimeResult, 3> compare_regimes(const FrameTriplet& triplet,
                                            const Intrinsics& K,
                                            const InverseDepthMap& init_inv_depth,
                                            const std::vector<Pose>& init_poses,
                                            const LossWeights& weights,
                                            const SsimParams& ssim,
                                            const OptimConfig& cfg) {
  const std::array<Regime, 3> regimes = {
      Regime::kSelfSupervised, Regime::kDirect, Regime::kGeneralized};
  std::array<RegimeResult, 3> results;
  const Trajectory ref_traj = triplet_trajectory(triplet.rel_poses);

  for (size_t i = 0; i < regimes.size(); ++i) {
    OptimProblem problem;
    problem.triplet = triplet;
    problem.intrinsics = K;
    problem.regime = regimes[i];
    problem.init_inv_depth = init_inv_depth;
    problem.init_poses = init_poses;
    problem.weights = weights;
    problem.ssim = ssim;

    RegimeResult& res = results[i];
    res.regime = regimes[i];
    res.report = optimize(problem, cfg);
    res.depth_metrics =
        depth_metrics({invert(res.report.final_inv_depth)}, {triplet.target_depth});
    res.ape_metrics =
        ape(triplet_trajectory(res.report.final_poses), ref_traj,
            ApeOptions{.segment_len = 150, .with_scale = true, .align = true});
  }
  return results;
}

}  // namespace photoloss
