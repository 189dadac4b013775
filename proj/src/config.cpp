#include "oostraj/config.hpp"

#include <fstream>

#include "oostraj/error.hpp"
#include "oostraj/hash.hpp"

namespace oostraj::config {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(Errc::InvalidConfig, field + ": " + why);
}

json noise_to_json(const sim::NoiseModel& n) {
  return {{"kind", sim::noise_kind_name(n.kind)}, {"gps_sigma", n.gps_sigma}, {"drift_step_sigma", n.drift_step_sigma}};
}

/// Every key of `user` must exist in `ref`, recursively through objects.
void check_keys(const json& user, const json& ref, const std::string& path) {
  if (!user.is_object()) return;
  if (!ref.is_object()) bad(path, "expected a value, not an object");
  for (const auto& [k, v] : user.items()) {
    const std::string p = path.empty() ? k : path + "." + k;
    if (v.is_null()) bad(p, "null is not allowed");
    if (!ref.contains(k)) bad(p, "unknown key");
    if (v.is_object()) check_keys(v, ref[k], p);
  }
}

template <class T>
T get(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) bad(path, "missing");
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!cur->is_boolean()) bad(path, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!cur->is_number_integer()) bad(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (cur->is_number_integer() && !cur->is_number_unsigned() && cur->get<long long>() < 0) bad(path, "must be >= 0");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!cur->is_number()) bad(path, "expected a number");
    }
    return cur->get<T>();
  } catch (const json::exception& e) {
    bad(path, std::string("wrong type (") + e.what() + ")");
  }
}

}  // namespace

json RunConfig::to_json() const {
  const auto& s = sim;
  json j;
  j["seed"] = seed;
  j["sim"] = {
      {"n_agents", s.n_agents},
      {"t_obs", s.t_obs},
      {"t_pred", s.t_pred},
      {"image_width", s.image_width},
      {"image_height", s.image_height},
      {"focal", s.focal},
      {"camera_motion", sim::camera_motion_name(s.camera_motion)},
      {"rig",
       {{"height", s.rig.height},
        {"standoff", s.rig.standoff},
        {"target_height", s.rig.target_height},
        {"speed", s.rig.speed},
        {"jitter_position", s.rig.jitter_position},
        {"jitter_yaw_deg", s.rig.jitter_yaw_deg}}},
      {"arena", {{"x_min", s.arena.x_min}, {"x_max", s.arena.x_max}, {"y_min", s.arena.y_min}, {"y_max", s.arena.y_max}}},
      {"track",
       {{"dt", s.track.dt},
        {"speed_min", s.track.speed_min},
        {"speed_max", s.track.speed_max},
        {"min_waypoint_distance", s.track.min_waypoint_distance},
        {"smoothing", s.track.smoothing},
        {"height", s.track.height}}},
      {"sensor_height_jitter", s.sensor_height_jitter},
      {"noise", noise_to_json(s.noise)},
      {"max_retries", s.max_retries}};
  j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  j["model"] = train::to_json(model);
  j["train"] = train::to_json(train);
  j["smoother"] = {{"accel_sigma", smoother.accel_sigma}, {"measurement_sigma", smoother.measurement_sigma}};
  j["eval"] = {{"distance", metrics::distance_name(distance)}, {"methods", methods}};
  j["benchmark"] = {{"seeds", benchmark.seeds}, {"epochs", benchmark.epochs}};
  j["output_dir"] = output_dir;
  return j;
}

std::string RunConfig::data_hash() const {
  const json j = to_json();
  return hash_hex(json{{"seed", j["seed"]}, {"sim", j["sim"]}, {"splits", j["splits"]}}.dump());
}

std::string RunConfig::hash() const { return hash_hex(to_json().dump()); }

void RunConfig::validate() const {
  sim.validate();
  if (splits.train < 1) bad("splits.train", "must be >= 1");
  if (splits.val < 1) bad("splits.val", "must be >= 1");
  if (splits.test < 1) bad("splits.test", "must be >= 1");
  if (model.trunk.width < 2 || model.trunk.width % 2 != 0) bad("model.width", "must be an even number >= 2");
  if (model.trunk.heads < 1 || model.trunk.width % model.trunk.heads != 0) bad("model.heads", "must divide model.width");
  if (model.trunk.layers < 1) bad("model.layers", "must be >= 1");
  if (model.trunk.ffn_mult < 1) bad("model.ffn_mult", "must be >= 1");
  if (model.slots < 1) bad("model.slots", "must be >= 1");
  if (!(model.world_scale > 0.0)) bad("model.world_scale", "must be positive");
  train.validate();
  if (!(smoother.accel_sigma >= 0.0)) bad("smoother.accel_sigma", "must be >= 0");
  if (!(smoother.measurement_sigma >= 0.0)) bad("smoother.measurement_sigma", "must be >= 0");
  for (const auto& m : methods) pipeline::parse_method(m);
  if (benchmark.seeds.empty()) bad("benchmark.seeds", "must not be empty");
  if (benchmark.epochs < 1) bad("benchmark.epochs", "must be >= 1");
}

RunConfig defaults() {
  RunConfig c;
  // A moving camera, so the per-timestamp camera estimate has something to
  // track; the static rig stays available through sim.camera_motion.
  c.sim.camera_motion = sim::CameraMotion::Linear;
  c.methods = {"ours",      "const_velocity",        "smoother",      "transformer_direct", "lstm_direct",
               "gru_direct", "rnn_direct",            "transformer_two_stage", "lstm_two_stage", "gru_two_stage",
               "rnn_two_stage", "lstm_plus_vpd", "gru_plus_vpd", "rnn_plus_vpd"};
  return c;
}

RunConfig profile(const std::string& name) {
  if (name == "desk") return defaults();
  if (name == "long") {
    RunConfig c = defaults();
    c.sim.t_obs = c.sim.t_pred = 100;
    c.output_dir = "runs/long";
    return c;
  }
  bad("profile", "unknown profile '" + name + "' (desk, long)");
}

RunConfig from_json(const json& user_in, const RunConfig& base) {
  if (!user_in.is_object()) bad("<config>", "expected a JSON object");
  json user = user_in;
  json merged = base.to_json();

  // Noise preset shorthand.
  if (user.contains("sim") && user["sim"].is_object() && user["sim"].contains("noise") && user["sim"]["noise"].is_object() &&
      user["sim"]["noise"].contains("preset")) {
    json& noise = user["sim"]["noise"];
    if (!noise["preset"].is_string()) bad("sim.noise.preset", "expected a string");
    json resolved = noise_to_json(sim::noise_preset(noise["preset"].get<std::string>()));
    noise.erase("preset");
    resolved.merge_patch(noise);
    noise = resolved;
  }
  if (user.contains("profile")) bad("profile", "profiles are selected on the command line, not inside the file");

  check_keys(user, merged, "");
  merged.merge_patch(user);
  const json& m = merged;

  RunConfig c;
  c.seed = get<std::uint64_t>(m, "seed");
  auto& s = c.sim;
  s.n_agents = get<int>(m, "sim.n_agents");
  s.t_obs = get<int>(m, "sim.t_obs");
  s.t_pred = get<int>(m, "sim.t_pred");
  s.image_width = get<int>(m, "sim.image_width");
  s.image_height = get<int>(m, "sim.image_height");
  s.focal = get<double>(m, "sim.focal");
  s.camera_motion = sim::parse_camera_motion(get<std::string>(m, "sim.camera_motion"));
  s.rig.height = get<double>(m, "sim.rig.height");
  s.rig.standoff = get<double>(m, "sim.rig.standoff");
  s.rig.target_height = get<double>(m, "sim.rig.target_height");
  s.rig.speed = get<double>(m, "sim.rig.speed");
  s.rig.jitter_position = get<double>(m, "sim.rig.jitter_position");
  s.rig.jitter_yaw_deg = get<double>(m, "sim.rig.jitter_yaw_deg");
  s.arena.x_min = get<double>(m, "sim.arena.x_min");
  s.arena.x_max = get<double>(m, "sim.arena.x_max");
  s.arena.y_min = get<double>(m, "sim.arena.y_min");
  s.arena.y_max = get<double>(m, "sim.arena.y_max");
  s.track.dt = get<double>(m, "sim.track.dt");
  s.track.speed_min = get<double>(m, "sim.track.speed_min");
  s.track.speed_max = get<double>(m, "sim.track.speed_max");
  s.track.min_waypoint_distance = get<double>(m, "sim.track.min_waypoint_distance");
  s.track.smoothing = get<double>(m, "sim.track.smoothing");
  s.track.height = get<double>(m, "sim.track.height");
  s.sensor_height_jitter = get<double>(m, "sim.sensor_height_jitter");
  s.noise.kind = sim::parse_noise_kind(get<std::string>(m, "sim.noise.kind"));
  s.noise.gps_sigma = get<double>(m, "sim.noise.gps_sigma");
  s.noise.drift_step_sigma = get<double>(m, "sim.noise.drift_step_sigma");
  s.max_retries = get<int>(m, "sim.max_retries");
  c.splits.train = get<int>(m, "splits.train");
  c.splits.val = get<int>(m, "splits.val");
  c.splits.test = get<int>(m, "splits.test");
  c.model.trunk.width = get<std::size_t>(m, "model.width");
  c.model.trunk.layers = get<std::size_t>(m, "model.layers");
  c.model.trunk.heads = get<std::size_t>(m, "model.heads");
  c.model.trunk.ffn_mult = get<std::size_t>(m, "model.ffn_mult");
  c.model.slots = get<std::size_t>(m, "model.slots");
  c.model.world_center = get<std::array<double, 3>>(m, "model.world_center");
  c.model.world_scale = get<double>(m, "model.world_scale");
  c.train.epochs = get<int>(m, "train.epochs");
  c.train.batch_size = get<int>(m, "train.batch_size");
  c.train.lambda = get<double>(m, "train.lambda");
  c.train.adam.lr = get<double>(m, "train.lr");
  c.train.adam.beta1 = get<double>(m, "train.beta1");
  c.train.adam.beta2 = get<double>(m, "train.beta2");
  c.train.adam.eps = get<double>(m, "train.eps");
  c.train.adam.grad_clip = get<double>(m, "train.grad_clip");
  c.train.seed = get<std::uint64_t>(m, "train.seed");
  c.train.resample_out_of_sight = get<bool>(m, "train.resample_out_of_sight");
  c.smoother.accel_sigma = get<double>(m, "smoother.accel_sigma");
  c.smoother.measurement_sigma = get<double>(m, "smoother.measurement_sigma");
  c.smoother.dt = s.track.dt;
  c.distance = metrics::parse_distance(get<std::string>(m, "eval.distance"));
  c.methods = get<std::vector<std::string>>(m, "eval.methods");
  c.benchmark.seeds = get<std::vector<std::uint64_t>>(m, "benchmark.seeds");
  c.benchmark.epochs = get<int>(m, "benchmark.epochs");
  c.output_dir = get<std::string>(m, "output_dir");
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    bad(path.string(), std::string("malformed JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace oostraj::config
