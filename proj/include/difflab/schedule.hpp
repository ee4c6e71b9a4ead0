#pragma once

// Noise schedules and the closed-form scalars of the forward process.
//
// Timesteps are 1..T. Index 0 is the clean-data sentinel with ᾱ_0 = 1; it is
// stored in every array so that `alpha_bar(t - 1)` is always valid.

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "difflab/tensor.hpp"

namespace difflab {

struct PosteriorCoeffs {
  double coef_x0 = 0.0;
  double coef_xt = 0.0;
};

class Schedule {
 public:
  // β linearly interpolated from beta_start (t=1) to beta_end (t=T).
  static Schedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02);
  // ᾱ_t = f(t)/f(0), f(t) = cos²(((t/T + s)/(1 + s))·π/2), β clipped to ≤ 0.999.
  static Schedule cosine(int T, double s = 0.008);
  // Rebuild from explicit betas (used when loading manifests).
  static Schedule from_betas(std::vector<double> betas, std::string kind = "custom");

  int T() const noexcept { return static_cast<int>(beta_.size()) - 1; }
  const std::string& kind() const noexcept { return kind_; }

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;  // valid for t = 0..T
  double sigma2(int t) const;
  double sigma(int t) const;
  PosteriorCoeffs posterior_coefficients(int t) const;

  // x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε. t = 0 returns x0.
  Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps) const;
  // Row-wise variant: row i uses timestep ts[i].
  Tensor forward_sample(const Tensor& x0, std::span<const int> ts, const Tensor& eps) const;

  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& j);

 private:
  Schedule() = default;
  void finalize();
  void check_t(int t, int lo = 1) const;

  std::string kind_;
  std::vector<double> params_;   // construction parameters, for the manifest
  std::vector<double> beta_;     // [0] unused
  std::vector<double> alpha_bar_;
  std::vector<double> sigma2_;
};

}  // namespace difflab
