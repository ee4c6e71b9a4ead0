#pragma once

// Timestep samplers.
//
//   Uniform         iid uniform over [1, T]
//   Weighted        iid categorical over a user weight table
//   LossAdaptive    categorical with weights ∝ (profile mean)^γ, refreshed
//                   by the trainer every adapt_period steps
//   SlotStratified  every slot of a partition is represented in each batch;
//                   leftover draws cycle through slots via a persistent cursor
//
// Samplers only ever consume the RngStream they are handed; the trainer
// passes its dedicated timestep stream.

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/loss_profile.hpp"
#include "difflab/rng.hpp"

namespace difflab {

enum class SamplerKind { Uniform, Weighted, LossAdaptive, SlotStratified };
std::string_view name(SamplerKind k) noexcept;
SamplerKind parse_sampler_kind(std::string_view s);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::Uniform;
  int T = 1000;
  std::vector<double> weights;            // index t − 1; Weighted / LossAdaptive
  std::optional<SlotPartition> partition;  // SlotStratified
  int adapt_period = 0;                    // LossAdaptive
  double gamma = 1.0;                      // LossAdaptive exponent

  // Checks invariants and normalizes weights to sum to 1.
  void validate_and_normalize();
};

// Weights ∝ (mean_t)^γ, renormalized. An all-zero profile falls back to
// uniform weights with a warning on stderr.
SamplerSpec refresh_adaptive(const SamplerSpec& spec, const LossProfile& profile);

// Linear ramp toward t = T (w_t ∝ t).
std::vector<double> late_heavy_weights(int T);
// CSV with columns t,weight covering t = 1..T (any order, no duplicates).
std::vector<double> read_weight_csv(const std::filesystem::path& p, int T);

class TimestepSampler {
 public:
  explicit TimestepSampler(SamplerSpec spec);

  const SamplerSpec& spec() const noexcept { return spec_; }
  std::vector<int> sample(std::size_t batch, RngStream& rng);

  // Conditional distribution on [lo, hi]: what rejection-resampling of the
  // unrestricted sampler would produce, without the rejection loop.
  TimestepSampler restricted(int lo, int hi) const;
  std::optional<std::pair<int, int>> range() const noexcept { return range_; }

  // Probability of each t (index t − 1) for one draw; for SlotStratified the
  // per-batch average when batch is a multiple of the slot count.
  std::vector<double> target_distribution() const;

  void refresh(const LossProfile& profile);

  std::size_t cursor() const noexcept { return cursor_; }
  nlohmann::json state() const;
  void set_state(const nlohmann::json& j);

 private:
  void rebuild();
  int draw_categorical(RngStream& rng) const;

  SamplerSpec spec_;
  std::optional<std::pair<int, int>> range_;
  std::vector<double> cdf_;  // Weighted / LossAdaptive
  std::vector<int> support_; // t values matching cdf_ entries
  std::size_t cursor_ = 0;   // SlotStratified remainder cursor
};

}  // namespace difflab
