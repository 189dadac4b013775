#include "oostraj/scene_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "oostraj/error.hpp"
#include "oostraj/hash.hpp"

namespace oostraj::io {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& why) {
  throw Error(Errc::Schema, "field '" + field + "': " + why);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(path, "not finite");
  return v;
}

template <class T>
T integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<T>();
}

json points3(const std::vector<geometry::WorldPoint>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y, p.z});
  return a;
}

std::vector<geometry::WorldPoint> parse_points3(const json& j, const std::string& path, std::size_t T) {
  if (!j.is_array()) schema_error(path, "expected an array");
  if (j.size() != T) schema_error(path, "length " + std::to_string(j.size()) + " != t_obs + t_pred = " + std::to_string(T));
  std::vector<geometry::WorldPoint> out;
  for (std::size_t t = 0; t < j.size(); ++t) {
    const std::string p = path + "[" + std::to_string(t) + "]";
    if (!j[t].is_array() || j[t].size() != 3) schema_error(p, "expected [x, y, z]");
    out.push_back({number(j[t][0], p), number(j[t][1], p), number(j[t][2], p)});
  }
  return out;
}

}  // namespace

json scene_to_json(const sim::Scene& s) {
  json j;
  j["schema"] = kSceneSchema;
  j["seed"] = s.seed;
  j["t_obs"] = s.t_obs;
  j["t_pred"] = s.t_pred;
  j["dt"] = s.dt;
  j["image"] = {{"width", s.image_width}, {"height", s.image_height}};
  j["intrinsics"] = {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy}, {"cx", s.intrinsics.cx},
                     {"cy", s.intrinsics.cy}, {"skew", s.intrinsics.skew}};
  j["camera_motion"] = s.camera_motion;
  if (!s.cameras.empty()) {
    json cams = json::array();
    for (const auto& c : s.cameras) cams.push_back(c.row_major());
    j["cameras"] = std::move(cams);
  }
  json agents = json::array();
  for (const auto& a : s.agents) {
    json ja;
    ja["id"] = a.id;
    ja["out_of_sight"] = a.out_of_sight;
    if (!a.world.empty()) ja["world"] = points3(a.world);
    ja["sensor"] = points3(a.sensor);
    json px = json::array();
    for (const auto& p : a.pixel) px.push_back({p.u, p.v});
    ja["pixel"] = std::move(px);
    json vis = json::array();
    for (bool v : a.visible) vis.push_back(v ? 1 : 0);
    ja["visible"] = std::move(vis);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j;
}

sim::Scene scene_from_json(const json& j) {
  if (!j.is_object()) schema_error("<scene>", "expected an object");
  sim::Scene s;
  if (auto it = j.find("schema"); it != j.end() && *it != kSceneSchema)
    schema_error("schema", "unsupported version " + it->dump());
  s.seed = integer<std::uint64_t>(field(j, "seed", ""), "seed");
  s.t_obs = integer<int>(field(j, "t_obs", ""), "t_obs");
  s.t_pred = integer<int>(field(j, "t_pred", ""), "t_pred");
  if (s.t_obs < 2) schema_error("t_obs", "must be >= 2");
  if (s.t_pred < 1) schema_error("t_pred", "must be >= 1");
  s.dt = j.contains("dt") ? number(j["dt"], "dt") : 0.1;
  const json& img = field(j, "image", "");
  s.image_width = integer<int>(field(img, "width", "image"), "image.width");
  s.image_height = integer<int>(field(img, "height", "image"), "image.height");
  const json& k = field(j, "intrinsics", "");
  s.intrinsics.fx = number(field(k, "fx", "intrinsics"), "intrinsics.fx");
  s.intrinsics.fy = number(field(k, "fy", "intrinsics"), "intrinsics.fy");
  s.intrinsics.cx = number(field(k, "cx", "intrinsics"), "intrinsics.cx");
  s.intrinsics.cy = number(field(k, "cy", "intrinsics"), "intrinsics.cy");
  s.intrinsics.skew = k.contains("skew") ? number(k["skew"], "intrinsics.skew") : 0.0;
  if (j.contains("camera_motion")) {
    if (!j["camera_motion"].is_string()) schema_error("camera_motion", "expected a string");
    s.camera_motion = j["camera_motion"].get<std::string>();
  }

  const auto T = static_cast<std::size_t>(s.total_steps());
  if (j.contains("cameras")) {
    const json& cams = j["cameras"];
    if (!cams.is_array() || cams.size() != T) schema_error("cameras", "expected " + std::to_string(T) + " matrices");
    for (std::size_t t = 0; t < T; ++t) {
      const std::string p = "cameras[" + std::to_string(t) + "]";
      if (!cams[t].is_array() || cams[t].size() != 12) schema_error(p, "expected 12 values");
      std::vector<double> v;
      for (const auto& x : cams[t]) v.push_back(number(x, p));
      s.cameras.push_back(geometry::CameraMatrix::from_row_major(v));
    }
  }

  const json& agents = field(j, "agents", "");
  if (!agents.is_array() || agents.size() < 2) schema_error("agents", "expected at least two agents");
  int hidden = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const json& ja = agents[i];
    const std::string p = "agents[" + std::to_string(i) + "]";
    sim::AgentRecord a;
    a.id = integer<int>(field(ja, "id", p), p + ".id");
    const json& oos = field(ja, "out_of_sight", p);
    if (!oos.is_boolean()) schema_error(p + ".out_of_sight", "expected a boolean");
    a.out_of_sight = oos.get<bool>();
    hidden += a.out_of_sight ? 1 : 0;
    if (ja.contains("world")) a.world = parse_points3(ja["world"], p + ".world", T);
    a.sensor = parse_points3(field(ja, "sensor", p), p + ".sensor", T);
    const json& px = field(ja, "pixel", p);
    if (!px.is_array() || px.size() != T)
      schema_error(p + ".pixel", "length " + std::to_string(px.is_array() ? px.size() : 0) + " != " + std::to_string(T));
    for (std::size_t t = 0; t < T; ++t) {
      const std::string pp = p + ".pixel[" + std::to_string(t) + "]";
      if (!px[t].is_array() || px[t].size() != 2) schema_error(pp, "expected [u, v]");
      a.pixel.push_back({number(px[t][0], pp), number(px[t][1], pp)});
    }
    const json& vis = field(ja, "visible", p);
    if (!vis.is_array() || vis.size() != T)
      schema_error(p + ".visible", "length " + std::to_string(vis.is_array() ? vis.size() : 0) + " != " + std::to_string(T));
    for (std::size_t t = 0; t < T; ++t) {
      if (vis[t].is_boolean()) a.visible.push_back(vis[t].get<bool>());
      else if (vis[t].is_number_integer() && (vis[t] == 0 || vis[t] == 1)) a.visible.push_back(vis[t] == 1);
      else schema_error(p + ".visible[" + std::to_string(t) + "]", "expected 0/1");
    }
    s.agents.push_back(std::move(a));
  }
  if (hidden != 1) schema_error("agents", std::to_string(hidden) + " agents flagged out_of_sight, expected exactly 1");
  for (const auto* a : s.in_sight())
    for (int t = 0; t < s.t_obs; ++t)
      if (!a->visible[static_cast<std::size_t>(t)])
        schema_error("agents[id=" + std::to_string(a->id) + "].visible", "in-sight agent hidden during observation");
  const auto& o = s.out_of_sight();
  for (std::size_t t = 0; t < T; ++t)
    if (!o.visible[t]) schema_error("agents[id=" + std::to_string(o.id) + "].visible", "out-of-sight label incomplete");
  return s;
}

std::string serialize_scene(const sim::Scene& scene) { return scene_to_json(scene).dump(); }

void write_jsonl(const fs::path& path, const std::vector<sim::Scene>& scenes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& s : scenes) out << serialize_scene(s) << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::vector<sim::Scene> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<sim::Scene> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        schema_error("<line>", std::string("malformed JSON: ") + e.what());
      }
      out.push_back(scene_from_json(j));
    } catch (const Error& e) {
      if (e.code() != Errc::Schema) throw;
      throw Error(Errc::Schema, path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_hex(ss.str());
}

// ---------------------------------------------------------------- manifest

json Manifest::to_json() const {
  json j;
  j["schema"] = kManifestSchema;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["source"] = source;
  json splits_j = json::object();
  for (const auto& s : splits)
    splits_j[s.name] = {{"file", s.file}, {"count", s.count}, {"seed_begin", s.seed_begin}, {"content_hash", s.content_hash}};
  j["splits"] = std::move(splits_j);
  return j;
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  if (!j.is_object() || j.value("schema", "") != kManifestSchema) throw Error(Errc::HashMismatch, "manifest schema missing or unsupported");
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.source = j.value("source", "simulate");
    for (const auto& [name, s] : j.at("splits").items())
      m.splits.push_back({name, s.at("file").get<std::string>(), s.at("count").get<int>(),
                          s.at("seed_begin").get<std::uint64_t>(), s.at("content_hash").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error(Errc::HashMismatch, std::string("manifest malformed: ") + e.what());
  }
  return m;
}

const SplitEntry& Manifest::split(const std::string& name) const {
  for (const auto& s : splits)
    if (s.name == name) return s;
  throw Error(Errc::HashMismatch, "manifest has no split '" + name + "'");
}

std::string Manifest::hash() const { return hash_hex(to_json().dump()); }

void write_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

Manifest read_manifest(const fs::path& path, bool verify_files) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "no dataset manifest at " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::HashMismatch, std::string("manifest unreadable: ") + e.what());
  }
  Manifest m = Manifest::from_json(j);
  if (verify_files) {
    for (const auto& s : m.splits) {
      const fs::path f = path.parent_path() / s.file;
      std::string h;
      try {
        h = file_hash(f);
      } catch (const Error&) {
        throw Error(Errc::HashMismatch, "split file missing: " + f.string());
      }
      if (h != s.content_hash) throw Error(Errc::HashMismatch, "content hash of " + f.string() + " does not match manifest");
    }
  }
  return m;
}

std::vector<sim::Scene> load_split(const fs::path& dataset_dir, const std::string& split) {
  const Manifest m = read_manifest(dataset_dir / "manifest.json");
  return read_jsonl(dataset_dir / m.split(split).file);
}

}  // namespace oostraj::io
