#pragma once

// Versioned binary checkpoint container:
//   "OOSTCKPT" | u32 version | u64 header length | JSON header | float64 payload
// The header carries free-form metadata plus a table of named tensors
// (shape, offset into the payload in elements). All integers little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oostraj/tensor.hpp"

namespace oostraj::ckpt {

inline constexpr std::uint32_t kVersion = 1;

struct Blob {
  std::string name;
  ad::Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<Blob> blobs;

  /// Throws Schema if absent.
  const Blob& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string encode(const Checkpoint& c);
Checkpoint decode(const std::string& bytes);  // throws Schema on a malformed container

void write(const std::filesystem::path& path, const Checkpoint& c);  // Io on failure
Checkpoint read(const std::filesystem::path& path);                 // Io / Schema

}  // namespace oostraj::ckpt
