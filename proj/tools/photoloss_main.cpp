#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "photoloss/config.hpp"
#include "photoloss/experiment.hpp"
#include "photoloss/io.hpp"
#include "photoloss/version.hpp"

namespace fs = std::filesystem;
using namespace photoloss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::string regime;
  std::string gradient_mode;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) {
    config = load_config(opts.config_path);
  } else {
    config = default_config();
  }
  if (opts.seed >= 0) config.seed = std::uint64_t(opts.seed);
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (!opts.regime.empty()) config.regime = opts.regime;
  if (!opts.gradient_mode.empty()) {
    if (opts.gradient_mode == "analytic")
      config.optim.gradient_mode = GradientMode::kAnalytic;
    else if (opts.gradient_mode == "fd")
      config.optim.gradient_mode = GradientMode::kFiniteDifference;
    else
      throw ParseError("--gradient-mode: expected 'analytic' or 'fd'");
  }
  config.validate();
  return config;
}

std::vector<fs::path> sorted_pfm_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pfm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

void print_depth_table(const DepthMetrics& m) {
  std::printf("%-12s %-12s %-12s %-12s %-12s %-12s %-10s\n", "acc_1", "acc_2",
              "acc_3", "rel_mean", "rel_max", "rel_median", "scale");
  std::printf("%-12s %-12s %-12s %-12s %-12s %-12s %-10s\n",
              format_double(m.acc[0]).c_str(), format_double(m.acc[1]).c_str(),
              format_double(m.acc[2]).c_str(), format_double(m.rel_mean).c_str(),
              format_double(m.rel_max).c_str(), format_double(m.rel_median).c_str(),
              format_double(m.scale).c_str());
}

void print_ape_table(const ApeMetrics& m) {
  std::printf("%-14s %-12s %-12s %-12s\n", "", "mean", "max", "median");
  std::printf("%-14s %-12s %-12s %-12s\n", "rotation",
              format_double(m.rot_mean).c_str(), format_double(m.rot_max).c_str(),
              format_double(m.rot_median).c_str());
  std::printf("%-14s %-12s %-12s %-12s\n", "translation",
              format_double(m.trans_mean).c_str(),
              format_double(m.trans_max).c_str(),
              format_double(m.trans_median).c_str());
}

OrderedJson depth_json(const DepthMetrics& m) {
  return OrderedJson{{"rel_mean", round_sig9(m.rel_mean)},
                     {"rel_max", round_sig9(m.rel_max)},
                     {"rel_median", round_sig9(m.rel_median)},
                     {"acc_1", round_sig9(m.acc[0])},
                     {"acc_2", round_sig9(m.acc[1])},
                     {"acc_3", round_sig9(m.acc[2])},
                     {"scale", round_sig9(m.scale)},
                     {"degenerate", m.degenerate}};
}

OrderedJson ape_json(const ApeMetrics& m) {
  return OrderedJson{{"rot_mean", round_sig9(m.rot_mean)},
                     {"rot_max", round_sig9(m.rot_max)},
                     {"rot_median", round_sig9(m.rot_median)},
                     {"trans_mean", round_sig9(m.trans_mean)},
                     {"trans_max", round_sig9(m.trans_max)},
                     {"trans_median", round_sig9(m.trans_median)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth/pose loss experiments on synthetic scenes"};
  app.set_version_flag("--version", std::string("photoloss ") + kVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  std::string pred_path, ref_path;
  int segment_len = 150;
  bool json_output = false;

  auto add_common = [&](CLI::App* cmd, bool with_regime) {
    cmd->add_option("--config", opts.config_path, "config JSON path");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out_dir, "output directory");
    if (with_regime) {
      cmd->add_option("--regime", opts.regime,
                      "all | self_supervised | direct | generalized");
      cmd->add_option("--gradient-mode", opts.gradient_mode, "analytic | fd");
    }
  };

  CLI::App* generate = app.add_subcommand("generate", "render scene files");
  add_common(generate, false);

  CLI::App* optimize_cmd =
      app.add_subcommand("optimize", "run recovery for the configured regime(s)");
  add_common(optimize_cmd, true);

  CLI::App* compare = app.add_subcommand(
      "compare-losses", "run all three regimes from one initialization");
  add_common(compare, true);

  CLI::App* eval_depth =
      app.add_subcommand("eval-depth", "depth metrics between two PFM directories");
  eval_depth->add_option("pred", pred_path, "predicted depth directory")->required();
  eval_depth->add_option("ref", ref_path, "reference depth directory")->required();
  eval_depth->add_flag("--json", json_output, "print JSON instead of a table");

  CLI::App* eval_pose =
      app.add_subcommand("eval-pose", "APE between two TUM trajectory files");
  eval_pose->add_option("pred", pred_path, "predicted trajectory file")->required();
  eval_pose->add_option("ref", ref_path, "reference trajectory file")->required();
  eval_pose->add_option("--segment-len", segment_len, "frames per segment")
      ->default_val(150);
  eval_pose->add_flag("--json", json_output, "print JSON instead of a table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const ExperimentConfig config = resolve_config(opts);
      run_generate(config, config.out_dir);
      std::printf("wrote %zu frames to %s\n", config.scene.trajectory.size(),
                  config.out_dir.c_str());
      return kExitOk;
    }

    if (optimize_cmd->parsed() || compare->parsed()) {
      ExperimentConfig config = resolve_config(opts);
      if (compare->parsed()) config.regime = "all";
      const ExperimentReport report = run_experiment(config);
      write_experiment_outputs(report, config.out_dir);
      for (const RegimeOutcome& o : report.outcomes)
        std::printf("%-16s converged=%s rel_mean=%s ape_rot_mean=%s\n",
                    regime_name(o.regime), o.all_converged ? "yes" : "no",
                    format_double(o.depth.rel_mean).c_str(),
                    format_double(o.ape.rot_mean).c_str());
      return kExitOk;
    }

    if (eval_depth->parsed()) {
      const auto pred_files = sorted_pfm_files(pred_path);
      const auto ref_files = sorted_pfm_files(ref_path);
      if (pred_files.empty() || pred_files.size() != ref_files.size())
        throw ParseError("eval-depth: directories hold " +
                         std::to_string(pred_files.size()) + " vs " +
                         std::to_string(ref_files.size()) + " PFM files");
      std::vector<DepthMap> pred, ref;
      for (size_t i = 0; i < pred_files.size(); ++i) {
        pred.push_back(DepthMap(read_pfm(pred_files[i])));
        ref.push_back(DepthMap(read_pfm(ref_files[i])));
      }
      const DepthMetrics m = depth_metrics(pred, ref);
      if (json_output)
        std::printf("%s\n", depth_json(m).dump(2).c_str());
      else
        print_depth_table(m);
      return kExitOk;
    }

    if (eval_pose->parsed()) {
      const Trajectory pred = read_trajectory_tum(pred_path);
      const Trajectory ref = read_trajectory_tum(ref_path);
      if (pred.size() != ref.size())
        throw ParseError("eval-pose: trajectories hold " +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(ref.size()) + " poses");
      const ApeMetrics m = ape(pred, ref, ApeOptions{.segment_len = segment_len,
                                                     .with_scale = true,
                                                     .align = true});
      if (json_output)
        std::printf("%s\n", ape_json(m).dump(2).c_str());
      else
        print_ape_table(m);
      return kExitOk;
    }
  } catch (const DivergedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
