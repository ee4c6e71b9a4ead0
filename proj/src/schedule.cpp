#include "difflab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "difflab/errors.hpp"

namespace difflab {

Schedule Schedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  Schedule s;
  s.kind_ = "linear";
  s.params_ = {beta_start, beta_end};
  s.beta_.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    s.beta_[t] = beta_start + frac * (beta_end - beta_start);
  }
  s.finalize();
  return s;
}

Schedule Schedule::cosine(int T, double offset) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1");
  if (!(offset >= 0.0)) throw ConfigError("schedule: cosine offset must be >= 0");
  auto f = [&](int t) {
    const double c = std::cos(((static_cast<double>(t) / T + offset) / (1.0 + offset)) * std::numbers::pi / 2.0);
    return c * c;
  };
  Schedule s;
  s.kind_ = "cosine";
  s.params_ = {offset};
  s.beta_.assign(T + 1, 0.0);
  const double f0 = f(0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double ab = f(t) / f0;
    s.beta_[t] = std::min(1.0 - ab / prev, 0.999);
    prev = ab;
  }
  s.finalize();
  return s;
}

Schedule Schedule::from_betas(std::vector<double> betas, std::string kind) {
  if (betas.empty()) throw ConfigError("schedule: empty beta table");
  Schedule s;
  s.kind_ = std::move(kind);
  s.beta_.assign(1, 0.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("schedule: beta outside (0,1)");
    s.beta_.push_back(b);
  }
  s.finalize();
  return s;
}

void Schedule::finalize() {
  const int T = static_cast<int>(beta_.size()) - 1;
  alpha_bar_.assign(T + 1, 1.0);
  sigma2_.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
  for (int t = 1; t <= T; ++t) {
    sigma2_[t] = beta_[t] * (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]);
  }
}

void Schedule::check_t(int t, int lo) const {
  if (t < lo || t > T()) {
    throw IndexError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(T()) + "]");
  }
}

double Schedule::beta(int t) const { check_t(t); return beta_[t]; }
double Schedule::alpha(int t) const { check_t(t); return 1.0 - beta_[t]; }
double Schedule::alpha_bar(int t) const { check_t(t, 0); return alpha_bar_[t]; }
double Schedule::sigma2(int t) const { check_t(t); return sigma2_[t]; }
double Schedule::sigma(int t) const { check_t(t); return std::sqrt(sigma2_[t]); }

PosteriorCoeffs Schedule::posterior_coefficients(int t) const {
  check_t(t);
  // ᾱ_0 = 1 makes t = 1 exactly (1, 0); the general formula rounds.
  if (t == 1) return PosteriorCoeffs{1.0, 0.0};
  const double ab = alpha_bar_[t];
  const double ab_prev = alpha_bar_[t - 1];
  const double b = beta_[t];
  return PosteriorCoeffs{std::sqrt(ab_prev) * b / (1.0 - ab),
                         std::sqrt(1.0 - b) * (1.0 - ab_prev) / (1.0 - ab)};
}

Tensor Schedule::forward_sample(const Tensor& x0, int t, const Tensor& eps) const {
  check_t(t, 0);
  if (!x0.same_shape(eps)) throw ContractError("forward_sample: x0/eps shape mismatch");
  const double a = std::sqrt(alpha_bar_[t]);
  const double b = std::sqrt(1.0 - alpha_bar_[t]);
  Tensor xt = x0;
  for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = a * x0[i] + b * eps[i];
  return xt;
}

Tensor Schedule::forward_sample(const Tensor& x0, std::span<const int> ts, const Tensor& eps) const {
  if (!x0.same_shape(eps)) throw ContractError("forward_sample: x0/eps shape mismatch");
  if (ts.size() != x0.rows()) throw ContractError("forward_sample: timestep count != rows");
  Tensor xt = x0;
  for (std::size_t i = 0; i < x0.rows(); ++i) {
    check_t(ts[i], 0);
    const double a = std::sqrt(alpha_bar_[ts[i]]);
    const double b = std::sqrt(1.0 - alpha_bar_[ts[i]]);
    for (std::size_t j = 0; j < x0.cols(); ++j) xt.at(i, j) = a * x0.at(i, j) + b * eps.at(i, j);
  }
  return xt;
}

nlohmann::json Schedule::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_;
  j["T"] = T();
  j["params"] = params_;
  j["beta"] = std::vector<double>(beta_.begin() + 1, beta_.end());
  j["alpha_bar"] = std::vector<double>(alpha_bar_.begin() + 1, alpha_bar_.end());
  return j;
}

Schedule Schedule::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const int T = j.at("T").get<int>();
    const auto params = j.value("params", std::vector<double>{});
    if (kind == "linear" && params.size() == 2) return linear(T, params[0], params[1]);
    if (kind == "cosine" && params.size() == 1) return cosine(T, params[0]);
    auto s = from_betas(j.at("beta").get<std::vector<double>>(), kind);
    if (s.T() != T) throw ConfigError("schedule: T does not match beta table length");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule manifest: ") + e.what());
  }
}

}  // namespace difflab
