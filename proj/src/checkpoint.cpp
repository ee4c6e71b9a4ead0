#include "difflab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

constexpr char kMagic[8] = {'D', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw IoError("checkpoint: truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

}  // namespace

const Tensor& Checkpoint::blob(const std::string& name) const {
  for (const auto& b : blobs) {
    if (b.name == name) return b.value;
  }
  throw IoError("checkpoint: missing blob '" + name + "'");
}

bool Checkpoint::has_blob(const std::string& name) const {
  for (const auto& b : blobs) {
    if (b.name == name) return true;
  }
  return false;
}

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header = ckpt.header;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& b : ckpt.blobs) manifest.push_back({b.name, b.value.shape()});
  header["blobs"] = manifest;
  const std::string text = header.dump();

  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& b : ckpt.blobs) {
    for (double v : b.value.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw IoError("checkpoint: truncated header");
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                        bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: header parse failed: ") + e.what());
  }
  pos += len;
  for (const auto& entry : ckpt.header.at("blobs")) {
    auto shape = entry.at(1).get<std::vector<std::size_t>>();
    Tensor t(shape);
    for (double& v : t.data()) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
    ckpt.blobs.push_back({entry.at(0).get<std::string>(), std::move(t)});
  }
  if (pos != bytes.size()) throw IoError("checkpoint: trailing bytes");
  ckpt.header.erase("blobs");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write on checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace difflab
