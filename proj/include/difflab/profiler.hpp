#pragma once

// Per-timestep loss measurement of a trained model.

#include <array>
#include <vector>

#include "difflab/loss_profile.hpp"
#include "difflab/model.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

inline constexpr std::size_t kDefaultMinSamples = 256;

struct ProfileOptions {
  PredictionType pred_type = PredictionType::A;
  ErrorSpace space = ErrorSpace::Target;
  std::size_t n_per_t = kDefaultMinSamples;
  std::size_t chunk_rows = 4096;  // forward-pass batch size; does not affect results
};

// For every t: mean over n_per_t fresh (x0, ε) pairs of ‖error‖² (summed over
// data dims) in the requested space. x0 rows are drawn uniformly from `data`.
// Deterministic given the stream state.
LossProfile profile(const DenoiserModel& model, const Tensor& data, const Schedule& schedule,
                    const ProfileOptions& opts, RngStream rng);

// Fraction of samples at each t for which each head has the smallest x0-space
// error (ties by selection priority). Rows indexed by t − 1, columns by code.
std::vector<std::array<double, 3>> selection_profile(const DenoiserModel& model, const Tensor& data,
                                                     const Schedule& schedule, std::size_t n_per_t, RngStream rng);

}  // namespace difflab
