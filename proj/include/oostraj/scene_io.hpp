#pragma once

// JSON-lines scene files and dataset manifests.
//
// One scene per line:
//   {"schema": "oostraj.scene/1", "seed": u64, "t_obs": int, "t_pred": int, "dt": s,
//    "image": {"width": px, "height": px},
//    "intrinsics": {"fx", "fy", "cx", "cy", "skew"},
//    "camera_motion": "static" | "linear" | "arc",
//    "cameras": [[12 row-major values], ...]           // optional; one per timestamp
//    "agents": [{"id": int, "out_of_sight": bool,
//                "world": [[x, y, z], ...],             // optional noise-free track
//                "sensor": [[x, y, z], ...],
//                "pixel": [[u, v], ...],
//                "visible": [0 | 1, ...]}, ...]}
// Every per-timestamp array has t_obs + t_pred entries and exactly one agent
// is out of sight. The same layout is the generic import schema.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oostraj/simulator.hpp"

namespace oostraj::io {

using nlohmann::json;

inline constexpr const char* kSceneSchema = "oostraj.scene/1";
inline constexpr const char* kManifestSchema = "oostraj.manifest/1";

json scene_to_json(const sim::Scene& scene);

/// Validates the layout; throws Error(Schema) naming the offending field.
sim::Scene scene_from_json(const json& j);

/// Single-line canonical form (sorted keys, shortest round-trip doubles).
std::string serialize_scene(const sim::Scene& scene);

void write_jsonl(const std::filesystem::path& path, const std::vector<sim::Scene>& scenes);

/// Schema errors are rethrown as Error(Schema) prefixed with "line N".
std::vector<sim::Scene> read_jsonl(const std::filesystem::path& path);

std::string file_hash(const std::filesystem::path& path);

struct SplitEntry {
  std::string name;  // train | val | test
  std::string file;  // relative to the manifest
  int count = 0;
  std::uint64_t seed_begin = 0;
  std::string content_hash;
};

struct Manifest {
  std::string config_hash;  // data-contract hash of the run config
  std::uint64_t seed = 0;
  std::string source = "simulate";  // simulate | import
  std::vector<SplitEntry> splits;

  json to_json() const;
  static Manifest from_json(const json& j);
  const SplitEntry& split(const std::string& name) const;
  /// Hash over the canonical manifest text.
  std::string hash() const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);

/// Throws Error(HashMismatch) if the file is unreadable, malformed, or any
/// split file's content hash differs from the recorded one.
Manifest read_manifest(const std::filesystem::path& path, bool verify_files = true);

/// Loads one split of a dataset directory after verifying the manifest.
std::vector<sim::Scene> load_split(const std::filesystem::path& dataset_dir, const std::string& split);

}  // namespace oostraj::io
