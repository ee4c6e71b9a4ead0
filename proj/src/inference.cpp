#include "difflab/inference.hpp"

#include <algorithm>
#include <cmath>

#include "difflab/errors.hpp"
#include "difflab/predictor.hpp"

namespace difflab {

PredictionType head_at(const HeadChoice& choice, int t) {
  if (const auto* p = std::get_if<PredictionType>(&choice)) return *p;
  const auto& table = std::get<std::vector<PredictionType>>(choice);
  if (t < 1 || static_cast<std::size_t>(t) > table.size()) throw IndexError("head table does not cover t=" + std::to_string(t));
  return table[static_cast<std::size_t>(t - 1)];
}

void AblationSpec::validate(int T) const {
  if (!range) return;
  if (range->first > range->second) throw ConfigError("ablation range has lo > hi");
  if (range->first < 1 || range->second > T) throw ConfigError("ablation range outside [1, T]");
  if (!oracle_x0) throw ContractError("ablation range given without oracle x0");
}

nlohmann::json Trajectory::to_json() const {
  auto rows = [](const Tensor& t) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) a.push_back(std::vector<double>(t.row(i).begin(), t.row(i).end()));
    return a;
  };
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : this->steps) {
    steps.push_back({{"t", s.t}, {"x_t", rows(s.xt)}, {"x0_hat", rows(s.x0_hat)}, {"replaced", s.replaced}});
  }
  return {{"x_T", rows(x_T)}, {"steps", steps}, {"x0", rows(x0)}};
}

Tensor reverse_step(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, const Tensor& xt, int t,
                    std::span<RngStream> noise, const AblationSpec& ab, const ReverseOptions& opts, StepStats* stats,
                    Tensor* x0_hat_out) {
  if (t < 1 || t > s.T()) throw IndexError("reverse_step: t=" + std::to_string(t) + " outside [1, T]");
  ab.validate(s.T());
  const std::size_t B = xt.rows(), d = xt.cols();
  if (noise.size() != B) throw ContractError("reverse_step: need one noise stream per row");

  Tensor x0_hat;
  if (ab.replaces(t)) {
    if (!ab.oracle_x0->same_shape(xt)) throw ContractError("reverse_step: oracle shape does not match batch");
    x0_hat = *ab.oracle_x0;
  } else {
    const PredictionType p = head_at(head, t);
    const std::vector<int> ts(B, t);
    auto out = model.predict(xt, ts);
    if (!out[code(p)]) throw ConfigError("reverse_step: model has no head " + std::string(name(p)));
    x0_hat = recover_x0(p, s, ts, xt, *out[code(p)]);
    if (opts.clamp_bound > 0.0) {
      for (std::size_t i = 0; i < B; ++i) {
        bool clamped = false;
        for (double& v : x0_hat.row(i)) {
          const double c = std::clamp(v, -opts.clamp_bound, opts.clamp_bound);
          clamped |= c != v;
          v = c;
        }
        if (stats && clamped) ++stats->clamped_rows;
      }
    }
    if (stats) stats->rows += B;
  }

  const PosteriorCoeffs c = s.posterior_coefficients(t);
  const double sigma = s.sigma(t);
  Tensor prev = xt;
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = c.coef_x0 * x0_hat.at(i, j) + c.coef_xt * xt.at(i, j);
      if (t > 1) v += sigma * noise[i].normal();
      prev.at(i, j) = v;
    }
  }
  if (x0_hat_out) *x0_hat_out = std::move(x0_hat);
  return prev;
}

Tensor run_chain(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, Tensor x_T,
                 std::span<RngStream> noise, const AblationSpec& ab, const ReverseOptions& opts, StepStats* stats,
                 Trajectory* record) {
  if (record) record->x_T = x_T;
  Tensor x = std::move(x_T);
  for (int t = s.T(); t >= 1; --t) {
    if (record) {
      Tensor x0_hat;
      Tensor next = reverse_step(model, s, head, x, t, noise, ab, opts, stats, &x0_hat);
      record->steps.push_back({t, x, std::move(x0_hat), ab.replaces(t)});
      x = std::move(next);
    } else {
      x = reverse_step(model, s, head, x, t, noise, ab, opts, stats);
    }
  }
  if (record) record->x0 = x;
  return x;
}

Tensor generate(const DenoiserModel& model, const Schedule& s, const HeadChoice& head, std::size_t n,
                std::uint64_t seed, const ReverseOptions& opts, StepStats* stats, std::size_t batch) {
  const std::size_t d = model.config().data_dim;
  if (n == 0) return Tensor({0, d});
  Tensor out = Tensor::matrix(n, d);
  const Rng root(seed);
  batch = std::max<std::size_t>(1, batch);
  for (std::size_t b = 0; b < n; b += batch) {
    const std::size_t e = std::min(n, b + batch);
    std::vector<RngStream> streams;
    Tensor x_T = Tensor::matrix(e - b, d);
    for (std::size_t i = b; i < e; ++i) {
      streams.push_back(root.stream("trajectory", i));
      for (std::size_t j = 0; j < d; ++j) x_T.at(i - b, j) = streams.back().normal();
    }
    const Tensor x0 = run_chain(model, s, head, std::move(x_T), streams, AblationSpec{}, opts, stats);
    std::copy(x0.data().begin(), x0.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * d));
  }
  return out;
}

std::vector<AblationRow> ablate_reconstruction(const DenoiserModel& model, const Schedule& s, const HeadChoice& head,
                                               const Tensor& oracle,
                                               const std::vector<std::optional<std::pair<int, int>>>& ranges,
                                               std::size_t trials, std::uint64_t seed, const ReverseOptions& opts) {
  if (oracle.rank() != 2 || oracle.rows() == 0) throw ContractError("ablate: oracle must be a nonempty [n x d] tensor");
  if (trials < 1) throw ConfigError("ablate: trials must be >= 1");
  const std::size_t d = oracle.cols();
  const Rng root(seed);

  Tensor x0_star = Tensor::matrix(trials, d);
  Tensor eps = Tensor::matrix(trials, d);
  for (std::size_t k = 0; k < trials; ++k) {
    auto es = root.stream("ablate-eps", k);
    for (std::size_t j = 0; j < d; ++j) {
      x0_star.at(k, j) = oracle.at(k % oracle.rows(), j);
      eps.at(k, j) = es.normal();
    }
  }
  const Tensor x_T = s.forward_sample(x0_star, s.T(), eps);

  std::vector<AblationRow> rows;
  for (const auto& range : ranges) {
    AblationSpec ab{range, x0_star};
    ab.validate(s.T());
    std::vector<RngStream> streams;
    for (std::size_t k = 0; k < trials; ++k) streams.push_back(root.stream("ablate-chain", k));
    const Tensor out = run_chain(model, s, head, x_T, streams, ab, opts);

    AblationRow row;
    row.range = range;
    row.trials = trials;
    for (std::size_t k = 0; k < trials; ++k) {
      double e = 0.0;
      for (std::size_t j = 0; j < d; ++j) e += (out.at(k, j) - x0_star.at(k, j)) * (out.at(k, j) - x0_star.at(k, j));
      row.per_trial.push_back(e / static_cast<double>(d));
    }
    double m = 0.0;
    for (double v : row.per_trial) m += v;
    m /= static_cast<double>(trials);
    double var = 0.0;
    for (double v : row.per_trial) var += (v - m) * (v - m);
    row.mean_mse = m;
    row.std_err = trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1) / static_cast<double>(trials)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

double mean_pair_distance(const Tensor& a, const Tensor& b) {
  const std::size_t d = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    double row = 0.0;
    for (std::size_t k = 0; k < b.rows(); ++k) {
      const auto bk = b.row(k);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (ai[j] - bk[j]) * (ai[j] - bk[j]);
      row += std::sqrt(s);
    }
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const Tensor& a, const Tensor& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("energy_distance: empty sample set");
  if (a.cols() != b.cols()) throw ContractError("energy_distance: dimension mismatch");
  const double v = 2.0 * mean_pair_distance(a, b) - mean_pair_distance(a, a) - mean_pair_distance(b, b);
  return std::max(0.0, v);
}

}  // namespace difflab
