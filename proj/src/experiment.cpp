#include "photoloss/experiment.hpp"

#include <chrono>
#include <nlohmann/json.hpp>

#include "photoloss/io.hpp"
#include "photoloss/random.hpp"
#include "photoloss/version.hpp"

namespace photoloss {

namespace {

using Json = OrderedJson;

std::string frame_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, index, ext);
  return buf;
}

Json depth_metrics_json(const DepthMetrics& m) {
  return Json{{"rel_mean", round_sig9(m.rel_mean)},
              {"rel_max", round_sig9(m.rel_max)},
              {"rel_median", round_sig9(m.rel_median)},
              {"acc_1", round_sig9(m.acc[0])},
              {"acc_2", round_sig9(m.acc[1])},
              {"acc_3", round_sig9(m.acc[2])},
              {"scale", round_sig9(m.scale)},
              {"degenerate", m.degenerate}};
}

Json ape_metrics_json(const ApeMetrics& m) {
  return Json{{"rot_mean", round_sig9(m.rot_mean)},
              {"rot_max", round_sig9(m.rot_max)},
              {"rot_median", round_sig9(m.rot_median)},
              {"trans_mean", round_sig9(m.trans_mean)},
              {"trans_max", round_sig9(m.trans_max)},
              {"trans_median", round_sig9(m.trans_median)}};
}

std::vector<Regime> requested_regimes(const ExperimentConfig& config) {
  if (config.regime == "all")
    return {Regime::kSelfSupervised, Regime::kDirect, Regime::kGeneralized};
  return {*regime_from_name(config.regime)};
}

}  // namespace

Trajectory chain_trajectory(const std::vector<Pose>& backward,
                            const std::vector<Pose>& forward) {
  if (backward.empty() || backward.size() != forward.size())
    throw std::invalid_argument("chain_trajectory: malformed relative poses");
  // P_t = P_{t-1} * T_{t -> t-1} for interior frames, and the last frame
  // from the final triplet's forward pose: P_{t+1} = P_t * T_{t -> t+1}^-1.
  Trajectory traj;
  Pose current = Pose::identity();
  traj.push_back({0, current});
  for (size_t i = 0; i < backward.size(); ++i) {
    current = compose(current, backward[i]);
    traj.push_back({std::int64_t(i) + 1, current});
  }
  traj.push_back({std::int64_t(backward.size()) + 1,
                  compose(current, inverse(forward.back()))});
  return traj;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const std::vector<FrameTriplet> triplets = render_scene(config.scene);

  // Shared initialization per triplet; fixed variables stay at the truth.
  std::vector<InverseDepthMap> init_depths;
  std::vector<std::vector<Pose>> init_poses;
  for (size_t i = 0; i < triplets.size(); ++i) {
    const std::uint64_t tseed = mix_u64(config.seed ^ (0x51ed0 + i));
    const FrameTriplet noisy =
        perturb(triplets[i], config.perturbation.depth_noise,
                config.perturbation.rot_noise, config.perturbation.trans_noise, tseed);
    init_depths.push_back(config.free_vars.depth ? invert(noisy.target_depth)
                                                 : invert(triplets[i].target_depth));
    init_poses.push_back(config.free_vars.poses ? noisy.rel_poses
                                                : triplets[i].rel_poses);
  }

  ExperimentReport report;
  report.config_echo = config_to_json(config);

  Trajectory ref_traj;
  for (size_t k = 0; k < config.scene.trajectory.size(); ++k)
    ref_traj.push_back({std::int64_t(k), config.scene.trajectory[k]});

  for (Regime regime : requested_regimes(config)) {
    RegimeOutcome outcome;
    outcome.regime = regime;
    outcome.all_converged = true;

    std::vector<DepthMap> pred_depths, ref_depths;
    std::vector<Pose> pred_backward, pred_forward;
    for (size_t i = 0; i < triplets.size(); ++i) {
      OptimProblem problem;
      problem.triplet = triplets[i];
      problem.intrinsics = config.scene.intrinsics;
      problem.regime = regime;
      problem.free_vars = config.free_vars;
      problem.init_inv_depth = init_depths[i];
      problem.init_poses = init_poses[i];
      problem.weights = config.weights;
      problem.ssim = config.ssim;

      OptimReport run = optimize(problem, config.optim);
      outcome.all_converged = outcome.all_converged && run.converged;
      pred_depths.push_back(invert(run.final_inv_depth));
      ref_depths.push_back(triplets[i].target_depth);
      pred_backward.push_back(run.final_poses[0]);
      pred_forward.push_back(run.final_poses[1]);
      outcome.reports.push_back(std::move(run));
    }

    outcome.depth = depth_metrics(pred_depths, ref_depths);
    outcome.ape = ape(chain_trajectory(pred_backward, pred_forward), ref_traj,
                      ApeOptions{.segment_len = config.segment_len,
                                 .with_scale = true,
                                 .align = true});
    report.outcomes.push_back(std::move(outcome));
  }

  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

void write_experiment_outputs(const ExperimentReport& report,
                              const std::filesystem::path& out_dir) {
  Json j;
  j["version"] = kVersion;
  j["config"] = report.config_echo;
  Json regimes = Json::array();
  for (const RegimeOutcome& o : report.outcomes) {
    Json r;
    r["name"] = regime_name(o.regime);
    r["all_converged"] = o.all_converged;
    Json runs = Json::array();
    for (const OptimReport& run : o.reports) {
      Json rj;
      rj["iterations"] = run.iterations;
      rj["converged"] = run.converged;
      rj["final_loss"] = round_sig9(run.loss_trace.back());
      runs.push_back(rj);
    }
    r["runs"] = runs;
    r["depth_metrics"] = depth_metrics_json(o.depth);
    r["ape_metrics"] = ape_metrics_json(o.ape);
    regimes.push_back(r);
  }
  j["regimes"] = regimes;
  j["timings_file"] = "timings.json";
  atomic_write_file(out_dir / "report.json", j.dump(2) + "\n");

  // full traces as CSV, one file per regime/triplet run
  for (const RegimeOutcome& o : report.outcomes)
    for (size_t i = 0; i < o.reports.size(); ++i) {
      std::string csv = "iteration,loss\n";
      const auto& trace = o.reports[i].loss_trace;
      for (size_t k = 0; k < trace.size(); ++k)
        csv += std::to_string(k) + "," + format_double(trace[k]) + "\n";
      atomic_write_file(out_dir / ("trace_" + std::string(regime_name(o.regime)) +
                                   "_t" + std::to_string(i + 1) + ".csv"),
                        csv);
    }

  // wall-clock lives apart so the seed-derived outputs stay byte-identical
  Json t;
  t["total_seconds"] = report.total_seconds;
  Json per_run = Json::array();
  for (const RegimeOutcome& o : report.outcomes) {
    Json r;
    r["name"] = regime_name(o.regime);
    Json secs = Json::array();
    for (const OptimReport& run : o.reports) secs.push_back(run.duration_seconds);
    r["seconds"] = secs;
    per_run.push_back(r);
  }
  t["regimes"] = per_run;
  atomic_write_file(out_dir / "timings.json", t.dump(2) + "\n");
}

void run_generate(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir) {
  config.validate();
  const int n = int(config.scene.trajectory.size());
  for (int k = 0; k < n; ++k) {
    const Image frame = render_frame(config.scene, k);
    const DepthMap depth = render_depth(config.scene, k);
    write_png(out_dir / frame_name("frame", k, "png"), frame, config.png_bit_depth);
    write_pfm(out_dir / frame_name("depth", k, "pfm"), depth.values);
    if (config.depth_png16) {
      const double scale = 1.0 / depth.values.maxCoeff();
      write_png16_scaled(out_dir / frame_name("depth16", k, "png"), depth.values,
                         scale);
    }
  }
  Trajectory traj;
  for (int k = 0; k < n; ++k)
    traj.push_back({std::int64_t(k), config.scene.trajectory[size_t(k)]});
  write_trajectory_tum(out_dir / "trajectory.tum", traj);
  atomic_write_file(out_dir / "scene.json",
                    config_to_json(config).dump(2) + "\n");
}

}  // namespace photoloss
