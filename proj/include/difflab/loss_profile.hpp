#pragma once

// Per-timestep loss tables and the equal-cumulative-loss slot partition.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/predictor.hpp"

namespace difflab {

enum class ErrorSpace { Target, X0 };
std::string_view name(ErrorSpace s) noexcept;  // "target" | "x0"
ErrorSpace parse_error_space(std::string_view s);

struct LossProfile {
  PredictionType pred_type = PredictionType::A;
  ErrorSpace space = ErrorSpace::Target;
  // Indexed by t − 1.
  std::vector<double> mean;
  std::vector<double> std_err;
  std::vector<std::size_t> count;
  std::string model_id;
  std::string dataset_id;

  int T() const noexcept { return static_cast<int>(mean.size()); }
  double at(int t) const { return mean.at(static_cast<std::size_t>(t - 1)); }
  std::size_t min_count() const;

  // CSV columns: t,mean,stderr,count
  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& p) const;
  static LossProfile read_csv(std::istream& is);
  static LossProfile read_csv(const std::filesystem::path& p);
};

struct Slot {
  int lo = 1;
  int hi = 1;
  int width() const noexcept { return hi - lo + 1; }
  bool contains(int t) const noexcept { return lo <= t && t <= hi; }
  friend bool operator==(const Slot&, const Slot&) = default;
};

struct SlotPartition {
  std::vector<Slot> bounds;

  std::size_t n_slots() const noexcept { return bounds.size(); }
  int T() const noexcept { return bounds.empty() ? 0 : bounds.back().hi; }
  // Slot index containing t; throws IndexError if none.
  std::size_t slot_of(int t) const;
  // Contiguous, non-overlapping, nonempty, starting at 1.
  void validate() const;

  nlohmann::json to_json() const;  // {"n_slots": n, "bounds": [[lo, hi], ...]}
  static SlotPartition from_json(const nlohmann::json& j);
  static SlotPartition read_json(const std::filesystem::path& p);
  void write_json(const std::filesystem::path& p) const;

  friend bool operator==(const SlotPartition&, const SlotPartition&) = default;
};

// Greedy scan from t = 1: slot k closes at the first t whose running sum
// reaches k·total/n_slots, never leaving a slot empty and always leaving room
// for the remaining slots. The last slot takes the remainder.
// min_samples: every count must reach it (0 disables the check).
SlotPartition compute_slots(const LossProfile& p, std::size_t n_slots, std::size_t min_samples = 0);
// Same rule on a raw table of means (index t − 1).
SlotPartition compute_slots(const std::vector<double>& means, std::size_t n_slots);

struct ProfileDiff {
  std::vector<double> delta;       // b − a, indexed by t − 1
  std::vector<double> slot_delta;  // mean delta within each slot, if a partition was given
};

ProfileDiff diff_profiles(const LossProfile& a, const LossProfile& b,
                          const std::optional<SlotPartition>& partition = std::nullopt);

}  // namespace difflab
