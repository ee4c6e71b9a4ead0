#pragma once

// Checkpoint container.
//
// Layout (all integers little-endian):
//   8 bytes   magic "DLABCKPT"
//   u32       format version
//   u64       header length in bytes
//   ...       UTF-8 JSON header; "blobs" lists [name, shape] in file order
//   ...       each blob as raw little-endian float64, in header order
//
// The header carries everything that is not a float array: model config,
// schedule manifest, rng stream states, step counter, config hash, sampler
// state. Blobs hold parameters and optimizer moments.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/model.hpp"

namespace difflab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> blobs;

  const Tensor& blob(const std::string& name) const;
  bool has_blob(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<char>& bytes);

}  // namespace difflab
