#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "photoloss/losses.hpp"
#include "photoloss/optimizer.hpp"
#include "photoloss/synth.hpp"

namespace photoloss {

using OrderedJson = nlohmann::ordered_json;

struct PerturbSpec {
  double depth_noise = 0.1;
  double rot_noise = 0.02;
  double trans_noise = 0.02;
};

/// A full experiment: scene, regime selection, loss/optimizer settings and
/// the perturbation drawn for the initialization. The seed is mandatory.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  SceneSpec scene;
  std::string regime = "all";  // all | self_supervised | direct | generalized
  FreeVariables free_vars;
  LossWeights weights;
  SsimParams ssim;
  OptimConfig optim;
  PerturbSpec perturbation;
  int segment_len = 150;
  int png_bit_depth = 8;
  bool depth_png16 = false;

  void validate() const;
};

/// Built-in defaults: 64x64 slightly arced translating camera over a
/// fronto-parallel textured plane.
ExperimentConfig default_config();

/// Parses a config JSON; messages carry the offending field path. Fields
/// omitted in the file keep their defaults, except seed, which is required.
ExperimentConfig parse_config(const OrderedJson& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical echo (trajectory expanded, numbers at 9 significant digits).
/// Parsing the echo reproduces an equal configuration.
OrderedJson config_to_json(const ExperimentConfig& config);

/// Round a double to 9 significant digits (text-stable report values).
double round_sig9(double v);

}  // namespace photoloss
