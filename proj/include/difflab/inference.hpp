#pragma once

// Ancestral reverse sampling with optional x̂0 replacement, the
// reconstruction ablation harness, and the energy-distance metric.

#include <optional>
#include <variant>
#include <vector>

#include "difflab/model.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

// Which head produces x̂0: a fixed type, or a per-timestep table (index t − 1)
// for mixed models.
using HeadChoice = std::variant<PredictionType, std::vector<PredictionType>>;

PredictionType head_at(const HeadChoice& choice, int t);

struct AblationSpec {
  std::optional<std::pair<int, int>> range;  // inclusive; nullopt = no replacement
  std::optional<Tensor> oracle_x0;           // rows matching the batch

  bool replaces(int t) const noexcept { return range && range->first <= t && t <= range->second; }
  void validate(int T) const;
};

struct ReverseOptions {
  // x̂0 is clamped elementwise to [−clamp_bound, clamp_bound]; ≤ 0 disables.
  double clamp_bound = 1.5;
};

struct StepStats {
  std::size_t rows = 0;
  std::size_t clamped_rows = 0;
};

struct TrajectoryStep {
  int t = 0;
  Tensor xt;
  Tensor x0_hat;
  bool replaced = false;
};

struct Trajectory {
  Tensor x_T;
  std::vector<TrajectoryStep> steps;  // t = T..1
  Tensor x0;                          // final estimate

  nlohmann::json to_json() const;
};

// One ancestral step for a batch. noise[i] is the per-trajectory stream of row i.
// Returns x_{t−1}; writes x̂0 (after clamping/replacement) into x0_hat if given.
Tensor reverse_step(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, const Tensor& xt, int t,
                    std::span<RngStream> noise, const AblationSpec& ab, const ReverseOptions& opts = {},
                    StepStats* stats = nullptr, Tensor* x0_hat = nullptr);

// Runs t = T..1 from x_T. Records per-step states when `record` is given.
Tensor run_chain(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, Tensor x_T,
                 std::span<RngStream> noise, const AblationSpec& ab, const ReverseOptions& opts = {},
                 StepStats* stats = nullptr, Trajectory* record = nullptr);

// n independent samples from x_T ~ N(0, I); trajectory i draws from
// Rng(seed).stream("trajectory", i), so results do not depend on batching.
Tensor generate(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, std::size_t n,
                std::uint64_t seed, const ReverseOptions& opts = {}, StepStats* stats = nullptr,
                std::size_t batch = 512);

struct AblationRow {
  std::optional<std::pair<int, int>> range;
  double mean_mse = 0.0;
  double std_err = 0.0;
  std::size_t trials = 0;
  std::vector<double> per_trial;
};

// For each range and trial k: x0* = oracle row k mod rows, x_T = forward_sample(x0*, T, ε_k),
// reverse chain with replacement inside the range, MSE (mean over dims) of the
// final estimate to x0*. ε_k and the chain noise depend only on (seed, k), so
// every range sees the same randomness.
std::vector<AblationRow> ablate_reconstruction(const DenoiserModel& model, const Schedule& s, const HeadChoice& head,
                                               const Tensor& oracle, const std::vector<std::optional<std::pair<int, int>>>& ranges,
                                               std::size_t trials, std::uint64_t seed, const ReverseOptions& opts = {});

// 2E‖A−B‖ − E‖A−A′‖ − E‖B−B′‖ over all pairs (V-statistic, ≥ 0).
double energy_distance(const Tensor& a, const Tensor& b);

}  // namespace difflab
