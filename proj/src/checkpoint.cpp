#include "oostraj/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "oostraj/error.hpp"

namespace oostraj::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'O', 'S', 'T', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(Errc::Schema, "checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

const Blob& Checkpoint::get(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return b;
  throw Error(Errc::Schema, "checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return true;
  return false;
}

std::string encode(const Checkpoint& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& b : c.blobs) {
    if (ad::numel(b.shape) != b.data.size())
      throw Error(Errc::ShapeMismatch, "blob '" + b.name + "' has " + std::to_string(b.data.size()) + " values for shape " + ad::shape_str(b.shape));
    table.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}});
    offset += b.data.size();
  }
  header["tensors"] = std::move(table);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& b : c.blobs)
    for (double v : b.data) put<double>(out, v);
  return out;
}

Checkpoint decode(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw Error(Errc::Schema, "not a checkpoint (bad magic)");
  std::size_t pos = sizeof kMagic;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw Error(Errc::Schema, "unsupported checkpoint version " + std::to_string(version));
  const auto len = take<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw Error(Errc::Schema, "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Schema, std::string("checkpoint header unreadable: ") + e.what());
  }
  pos += len;
  const std::size_t payload = pos;
  const std::size_t count = (bytes.size() - payload) / sizeof(double);

  Checkpoint c;
  try {
    c.meta = header.at("meta");
    for (const auto& t : header.at("tensors")) {
      Blob b;
      b.name = t.at("name").get<std::string>();
      b.shape = t.at("shape").get<ad::Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t n = ad::numel(b.shape);
      if (offset + n > count) throw Error(Errc::Schema, "checkpoint payload truncated at tensor '" + b.name + "'");
      b.data.resize(n);
      std::memcpy(b.data.data(), bytes.data() + payload + offset * sizeof(double), n * sizeof(double));
      c.blobs.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Schema, std::string("checkpoint tensor table malformed: ") + e.what());
  }
  return c;
}

void write(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string bytes = encode(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

Checkpoint read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

}  // namespace oostraj::ckpt
