#pragma once

#include <filesystem>
#include <vector>

#include "photoloss/config.hpp"
#include "photoloss/eval.hpp"
#include "photoloss/optimizer.hpp"

namespace photoloss {

/// Aggregated result of one regime over all triplets of the scene.
struct RegimeOutcome {
  Regime regime = Regime::kGeneralized;
  std::vector<OptimReport> reports;  // one per triplet
  DepthMetrics depth;                // over the full depth sequence
  ApeMetrics ape;                    // chained trajectory vs. reference
  bool all_converged = false;
};

struct ExperimentReport {
  OrderedJson config_echo;
  std::vector<RegimeOutcome> outcomes;
  double total_seconds = 0.0;
};

/// Renders the scene, perturbs the initialization of the free variables
/// (per-triplet seeds derived from the config seed) and optimizes every
/// requested regime from that shared initialization.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// report.json + per-run loss-trace CSVs, all derived deterministically
/// from the seed; wall-clock timings go to a separate timings.json.
void write_experiment_outputs(const ExperimentReport& report,
                              const std::filesystem::path& out_dir);

/// Scene files: frame PNGs, depth PFMs, trajectory in TUM form and the
/// canonical config echo.
void run_generate(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

/// Absolute trajectory implied by chaining per-triplet relative poses over
/// trajectory_len frames, anchored at frame 0. backward[i]/forward[i] are
/// triplet i+1's T_{t -> t-1} and T_{t -> t+1}.
Trajectory chain_trajectory(const std::vector<Pose>& backward,
                            const std::vector<Pose>& forward);

}  // namespace photoloss
