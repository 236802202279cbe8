#include "photoloss/config.hpp"

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "photoloss/io.hpp"

namespace photoloss {

using Json = OrderedJson;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ParseError("config: " + path + ": " + why);
}

const Json* find(const Json& j, const std::string& path, const char* key) {
  if (!j.is_object()) fail(path, "expected an object");
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const Json& j, const std::string& path, const char* key,
                  double fallback) {
  const Json* v = find(j, path, key);
  if (!v) return fallback;
  if (!v->is_number()) fail(path + "." + key, "expected a number");
  return v->get<double>();
}

int get_int(const Json& j, const std::string& path, const char* key, int fallback) {
  const Json* v = find(j, path, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
  return v->get<int>();
}

bool get_bool(const Json& j, const std::string& path, const char* key, bool fallback) {
  const Json* v = find(j, path, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

std::string get_string(const Json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  const Json* v = find(j, path, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(path + "." + key, "expected a string");
  return v->get<std::string>();
}

Eigen::Vector3d get_vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[size_t(i)].is_number()) fail(path, "expected an array of 3 numbers");
    v[i] = j[size_t(i)].get<double>();
  }
  return v;
}

Pose parse_pose(const Json& j, const std::string& path) {
  Pose p;
  if (const Json* r = find(j, path, "r")) p.rotation = get_vec3(*r, path + ".r");
  if (const Json* x = find(j, path, "x")) p.translation = get_vec3(*x, path + ".x");
  return p;
}

std::vector<Pose> parse_trajectory(const Json& j, const std::string& path) {
  if (j.is_array()) {
    std::vector<Pose> traj;
    for (size_t i = 0; i < j.size(); ++i)
      traj.push_back(parse_pose(j[i], path + "[" + std::to_string(i) + "]"));
    return traj;
  }
  if (!j.is_object()) fail(path, "expected a pose list or a generator object");
  const std::string type = get_string(j, path, "type", "");
  if (type != "arc") fail(path + ".type", "unknown trajectory generator '" + type + "'");
  const int frames = get_int(j, path, "frames", 5);
  if (frames < 3) fail(path + ".frames", "need at least 3 frames");
  const double step = get_number(j, path, "step", 0.04);
  const double curve = get_number(j, path, "curve", 0.5);
  const double roll_step = get_number(j, path, "roll_step", 0.0);

  // gently curved sideways track; the curvature keeps positions
  // non-collinear for trajectory alignment
  std::vector<Pose> traj(static_cast<size_t>(frames));
  const double mid = 0.5 * (frames - 1);
  for (int k = 0; k < frames; ++k) {
    const double s = (k - mid) * step;
    traj[size_t(k)].translation = Eigen::Vector3d(s, curve * s * s, 0.0);
    traj[size_t(k)].rotation = Eigen::Vector3d(0.0, 0.0, roll_step * (k - mid));
  }
  return traj;
}

Surface parse_surface(const Json& j, const std::string& path) {
  Surface s;
  const std::string type = get_string(j, path, "type", "plane");
  if (type == "plane") {
    s.kind = SurfaceKind::kPlane;
  } else if (type == "slanted_plane") {
    s.kind = SurfaceKind::kSlantedPlane;
    s.slope_x = get_number(j, path, "slope_x", 0.25);
    s.slope_y = get_number(j, path, "slope_y", 0.0);
  } else if (type == "sphere_patch") {
    s.kind = SurfaceKind::kSpherePatch;
    if (const Json* c = find(j, path, "center"))
      s.center = get_vec3(*c, path + ".center");
    s.radius = get_number(j, path, "radius", 2.5);
  } else {
    fail(path + ".type", "unknown surface '" + type + "'");
  }
  s.distance = get_number(j, path, "distance", 2.0);
  return s;
}

Json vec3_json(const Eigen::Vector3d& v) {
  return Json::array({round_sig9(v.x()), round_sig9(v.y()), round_sig9(v.z())});
}

}  // namespace

double round_sig9(double v) {
  return std::strtod(format_double(v).c_str(), nullptr);
}

void ExperimentConfig::validate() const {
  scene.validate();
  weights.validate();
  ssim.validate();
  optim.validate();
  if (regime != "all" && !regime_from_name(regime))
    throw ParseError("config: regime: unknown regime '" + regime + "'");
  if (!free_vars.depth && !free_vars.poses)
    throw ParseError("config: free_vars: must name depth and/or poses");
  if (segment_len < 3) throw ParseError("config: segment_len: must be >= 3");
  if (png_bit_depth != 8 && png_bit_depth != 16)
    throw ParseError("config: png_bit_depth: must be 8 or 16");
  if (!(perturbation.depth_noise >= 0.0 && perturbation.rot_noise >= 0.0 &&
        perturbation.trans_noise >= 0.0))
    throw ParseError("config: perturbation: noise levels must be >= 0");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.scene.intrinsics = {64.0, 64.0, 31.5, 31.5, 64, 64};
  c.scene.channels = 1;
  Json arc = {{"type", "arc"}, {"frames", 5}, {"step", 0.04}, {"curve", 0.5},
              {"roll_step", 0.0}};
  c.scene.trajectory = parse_trajectory(arc, "default");
  return c;
}

ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig c = default_config();
  if (!j.is_object()) fail("$", "expected a JSON object");
  const Json* seed = find(j, "$", "seed");
  if (!seed) fail("seed", "required field missing (reproducibility)");
  if (!seed->is_number_integer() || seed->get<std::int64_t>() < 0)
    fail("seed", "expected a non-negative integer");
  c.seed = seed->get<std::uint64_t>();

  c.out_dir = get_string(j, "$", "out_dir", c.out_dir);
  c.regime = get_string(j, "$", "regime", c.regime);
  c.segment_len = get_int(j, "$", "segment_len", c.segment_len);
  c.png_bit_depth = get_int(j, "$", "png_bit_depth", c.png_bit_depth);
  c.depth_png16 = get_bool(j, "$", "depth_png16", c.depth_png16);

  if (const Json* scene = find(j, "$", "scene")) {
    const std::string sp = "scene";
    if (const Json* s = find(*scene, sp, "surface"))
      c.scene.surface = parse_surface(*s, sp + ".surface");
    if (const Json* t = find(*scene, sp, "texture")) {
      const std::string tp = sp + ".texture";
      c.scene.texture.seed = std::uint64_t(get_number(*t, tp, "seed", double(c.scene.texture.seed)));
      c.scene.texture.octaves = get_int(*t, tp, "octaves", c.scene.texture.octaves);
      c.scene.texture.base_frequency = get_number(*t, tp, "base_frequency", c.scene.texture.base_frequency);
      c.scene.texture.gain = get_number(*t, tp, "gain", c.scene.texture.gain);
      c.scene.texture.contrast = get_number(*t, tp, "contrast", c.scene.texture.contrast);
      c.scene.texture.bias = get_number(*t, tp, "bias", c.scene.texture.bias);
    }
    if (const Json* t = find(*scene, sp, "trajectory"))
      c.scene.trajectory = parse_trajectory(*t, sp + ".trajectory");
    if (const Json* k = find(*scene, sp, "intrinsics")) {
      const std::string kp = sp + ".intrinsics";
      c.scene.intrinsics.fx = get_number(*k, kp, "fx", c.scene.intrinsics.fx);
      c.scene.intrinsics.fy = get_number(*k, kp, "fy", c.scene.intrinsics.fy);
      c.scene.intrinsics.cx = get_number(*k, kp, "cx", c.scene.intrinsics.cx);
      c.scene.intrinsics.cy = get_number(*k, kp, "cy", c.scene.intrinsics.cy);
      c.scene.intrinsics.width = get_int(*k, kp, "width", c.scene.intrinsics.width);
      c.scene.intrinsics.height = get_int(*k, kp, "height", c.scene.intrinsics.height);
    }
    c.scene.channels = get_int(*scene, sp, "channels", c.scene.channels);
  }

  if (const Json* fv = find(j, "$", "free_vars")) {
    if (!fv->is_array()) fail("free_vars", "expected an array");
    c.free_vars = {false, false};
    for (const auto& v : *fv) {
      const std::string name = v.is_string() ? v.get<std::string>() : "";
      if (name == "depth") c.free_vars.depth = true;
      else if (name == "poses") c.free_vars.poses = true;
      else fail("free_vars", "expected \"depth\" or \"poses\"");
    }
  }

  if (const Json* w = find(j, "$", "weights")) {
    const std::string wp = "weights";
    c.weights.alpha = get_number(*w, wp, "alpha", c.weights.alpha);
    c.weights.lambda = get_number(*w, wp, "lambda", c.weights.lambda);
    c.weights.psi = get_number(*w, wp, "psi", c.weights.psi);
    c.weights.gamma = get_number(*w, wp, "gamma", c.weights.gamma);
    c.weights.zeta = get_number(*w, wp, "zeta", c.weights.zeta);
    c.weights.theta = get_number(*w, wp, "theta", c.weights.theta);
  }
  if (const Json* s = find(j, "$", "ssim")) {
    const std::string sp = "ssim";
    c.ssim.window = get_int(*s, sp, "window", c.ssim.window);
    c.ssim.c1 = get_number(*s, sp, "c1", c.ssim.c1);
    c.ssim.c2 = get_number(*s, sp, "c2", c.ssim.c2);
  }
  if (const Json* o = find(j, "$", "optim")) {
    const std::string op = "optim";
    c.optim.max_iters = get_int(*o, op, "max_iters", c.optim.max_iters);
    c.optim.step_size = get_number(*o, op, "step_size", c.optim.step_size);
    c.optim.beta1 = get_number(*o, op, "beta1", c.optim.beta1);
    c.optim.beta2 = get_number(*o, op, "beta2", c.optim.beta2);
    c.optim.epsilon = get_number(*o, op, "epsilon", c.optim.epsilon);
    c.optim.step_decay = get_number(*o, op, "step_decay", c.optim.step_decay);
    c.optim.tolerance = get_number(*o, op, "tolerance", c.optim.tolerance);
    c.optim.grad_tolerance = get_number(*o, op, "grad_tolerance", c.optim.grad_tolerance);
    const std::string mode = get_string(*o, op, "gradient_mode", "analytic");
    if (mode == "analytic") c.optim.gradient_mode = GradientMode::kAnalytic;
    else if (mode == "fd") c.optim.gradient_mode = GradientMode::kFiniteDifference;
    else fail(op + ".gradient_mode", "expected \"analytic\" or \"fd\"");
  }
  if (const Json* p = find(j, "$", "perturbation")) {
    const std::string pp = "perturbation";
    c.perturbation.depth_noise = get_number(*p, pp, "depth_noise", c.perturbation.depth_noise);
    c.perturbation.rot_noise = get_number(*p, pp, "rot_noise", c.perturbation.rot_noise);
    c.perturbation.trans_noise = get_number(*p, pp, "trans_noise", c.perturbation.trans_noise);
  }

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

OrderedJson config_to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;

  Json surface;
  switch (c.scene.surface.kind) {
    case SurfaceKind::kPlane:
      surface["type"] = "plane";
      surface["distance"] = round_sig9(c.scene.surface.distance);
      break;
    case SurfaceKind::kSlantedPlane:
      surface["type"] = "slanted_plane";
      surface["distance"] = round_sig9(c.scene.surface.distance);
      surface["slope_x"] = round_sig9(c.scene.surface.slope_x);
      surface["slope_y"] = round_sig9(c.scene.surface.slope_y);
      break;
    case SurfaceKind::kSpherePatch:
      surface["type"] = "sphere_patch";
      surface["center"] = vec3_json(c.scene.surface.center);
      surface["radius"] = round_sig9(c.scene.surface.radius);
      break;
  }
  Json trajectory = Json::array();
  for (const Pose& p : c.scene.trajectory)
    trajectory.push_back(Json{{"r", vec3_json(p.rotation)}, {"x", vec3_json(p.translation)}});

  j["scene"] = Json{
      {"surface", surface},
      {"texture",
       Json{{"seed", c.scene.texture.seed},
            {"octaves", c.scene.texture.octaves},
            {"base_frequency", round_sig9(c.scene.texture.base_frequency)},
            {"gain", round_sig9(c.scene.texture.gain)},
            {"contrast", round_sig9(c.scene.texture.contrast)},
            {"bias", round_sig9(c.scene.texture.bias)}}},
      {"trajectory", trajectory},
      {"intrinsics",
       Json{{"fx", round_sig9(c.scene.intrinsics.fx)},
            {"fy", round_sig9(c.scene.intrinsics.fy)},
            {"cx", round_sig9(c.scene.intrinsics.cx)},
            {"cy", round_sig9(c.scene.intrinsics.cy)},
            {"width", c.scene.intrinsics.width},
            {"height", c.scene.intrinsics.height}}},
      {"channels", c.scene.channels}};

  j["regime"] = c.regime;
  Json fv = Json::array();
  if (c.free_vars.depth) fv.push_back("depth");
  if (c.free_vars.poses) fv.push_back("poses");
  j["free_vars"] = fv;

  j["weights"] = Json{{"alpha", round_sig9(c.weights.alpha)},
                      {"lambda", round_sig9(c.weights.lambda)},
                      {"psi", round_sig9(c.weights.psi)},
                      {"gamma", round_sig9(c.weights.gamma)},
                      {"zeta", round_sig9(c.weights.zeta)},
                      {"theta", round_sig9(c.weights.theta)}};
  j["ssim"] = Json{{"window", c.ssim.window},
                   {"c1", round_sig9(c.ssim.c1)},
                   {"c2", round_sig9(c.ssim.c2)}};
  j["optim"] = Json{{"max_iters", c.optim.max_iters},
                    {"step_size", round_sig9(c.optim.step_size)},
                    {"beta1", round_sig9(c.optim.beta1)},
                    {"beta2", round_sig9(c.optim.beta2)},
                    {"epsilon", round_sig9(c.optim.epsilon)},
                    {"step_decay", round_sig9(c.optim.step_decay)},
                    {"tolerance", round_sig9(c.optim.tolerance)},
                    {"grad_tolerance", round_sig9(c.optim.grad_tolerance)},
                    {"gradient_mode",
                     c.optim.gradient_mode == GradientMode::kAnalytic ? "analytic" : "fd"}};
  j["perturbation"] = Json{{"depth_noise", round_sig9(c.perturbation.depth_noise)},
                           {"rot_noise", round_sig9(c.perturbation.rot_noise)},
                           {"trans_noise", round_sig9(c.perturbation.trans_noise)}};
  j["segment_len"] = c.segment_len;
  j["png_bit_depth"] = c.png_bit_depth;
  j["depth_png16"] = c.depth_png16;
  return j;
}

}  // namespace photoloss
