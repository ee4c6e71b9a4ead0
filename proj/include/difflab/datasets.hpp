#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "difflab/tensor.hpp"

namespace difflab {

enum class DatasetKind { EightGaussians, SwissRoll, Checkerboard, TwoMoons };

std::string_view name(DatasetKind k) noexcept;
DatasetKind parse_dataset_kind(std::string_view s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::EightGaussians;
  std::size_t n = 100000;
  double noise_std = 0.2;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
  // Stable identifier used in profiles and manifests.
  std::string id() const;
};

// n×2 points, centered on the distribution's center and scaled so that the
// largest point norm is 1. Bit-identical for equal specs.
Tensor generate(const DatasetSpec& spec);

}  // namespace difflab
