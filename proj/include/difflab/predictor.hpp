#pragma once

// The three x₀ parameterizations and mixed-head selection.
//
//   D  the network predicts x₀ itself
//   V  the network predicts v = √ᾱ·ε − √(1−ᾱ)·x₀
//   A  the network predicts ε (the usual DDPM objective)

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "difflab/schedule.hpp"
#include "difflab/tensor.hpp"

namespace difflab {

enum class PredictionType : int { D = 0, V = 1, A = 2 };

inline constexpr std::array<PredictionType, 3> kAllPredictionTypes{PredictionType::D, PredictionType::V,
                                                                   PredictionType::A};
// Tie-break order for mixed selection: first entry wins.
inline constexpr std::array<PredictionType, 3> kSelectionPriority{PredictionType::A, PredictionType::V,
                                                                  PredictionType::D};

constexpr int code(PredictionType p) noexcept { return static_cast<int>(p); }
std::string_view name(PredictionType p) noexcept;  // "d" | "v" | "a"
PredictionType parse_prediction_type(std::string_view s);

// Row-wise: row i uses timestep ts[i]. Shapes (batch, d).
Tensor make_target(PredictionType pt, const Schedule& s, std::span<const int> ts, const Tensor& x0,
                   const Tensor& eps);
Tensor make_target(PredictionType pt, const Schedule& s, int t, const Tensor& x0, const Tensor& eps);

// Rows whose A-type recovery divides by √ᾱ_t with ᾱ_t < 1e-12 are counted
// in `amplified` when provided; the result is still returned.
Tensor recover_x0(PredictionType pt, const Schedule& s, std::span<const int> ts, const Tensor& xt,
                  const Tensor& y, std::size_t* amplified = nullptr);
Tensor recover_x0(PredictionType pt, const Schedule& s, int t, const Tensor& xt, const Tensor& y);

// Head with the smallest loss, losses indexed by code (D, V, A); ties are
// resolved by kSelectionPriority. Throws NumericError naming the head on NaN
// and ContractError on negative input.
PredictionType mixed_select(std::span<const double, 3> losses_dva);

}  // namespace difflab
