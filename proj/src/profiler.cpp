#include "difflab/profiler.hpp"

#include <cmath>
#include <functional>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

// Draws all (t, x0, ε) triples up front in t-major order, then evaluates in
// chunks so the chunk size never changes the random stream.
struct Draws {
  std::vector<int> ts;
  Tensor x0;
  Tensor eps;
};

Draws draw_all(const Tensor& data, int T, std::size_t n_per_t, std::size_t dim, RngStream& rng) {
  const std::size_t rows = static_cast<std::size_t>(T) * n_per_t;
  Draws d{std::vector<int>(rows), Tensor::matrix(rows, dim), Tensor::matrix(rows, dim)};
  std::size_t r = 0;
  for (int t = 1; t <= T; ++t) {
    for (std::size_t i = 0; i < n_per_t; ++i, ++r) {
      d.ts[r] = t;
      const auto idx = rng.below(data.rows());
      for (std::size_t j = 0; j < dim; ++j) d.x0.at(r, j) = data.at(idx, j);
      for (std::size_t j = 0; j < dim; ++j) d.eps.at(r, j) = rng.normal();
    }
  }
  return d;
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  Tensor out = Tensor::matrix(end - begin, t.cols());
  std::copy(t.data().begin() + static_cast<std::ptrdiff_t>(begin * t.cols()),
            t.data().begin() + static_cast<std::ptrdiff_t>(end * t.cols()), out.data().begin());
  return out;
}

// Calls fn(chunk_begin, ts, x0, eps, xt, heads) for consecutive chunks.
using ChunkFn = std::function<void(std::size_t, std::span<const int>, const Tensor&, const Tensor&, const Tensor&,
                                   const PerHead<Tensor>&)>;

void for_each_chunk(const DenoiserModel& model, const Schedule& schedule, const Draws& d, std::size_t chunk,
                    const ChunkFn& fn) {
  const std::size_t rows = d.ts.size();
  for (std::size_t b = 0; b < rows; b += chunk) {
    const std::size_t e = std::min(rows, b + chunk);
    std::span<const int> ts(d.ts.data() + b, e - b);
    Tensor x0 = slice_rows(d.x0, b, e);
    Tensor eps = slice_rows(d.eps, b, e);
    Tensor xt = schedule.forward_sample(x0, ts, eps);
    PerHead<Tensor> heads;
    try {
      heads = model.predict(xt, ts);
    } catch (const NumericError& err) {
      throw NumericError("profile: NaN in model output for t in [" + std::to_string(ts.front()) + ", " +
                         std::to_string(ts.back()) + "]: " + err.what());
    }
    fn(b, ts, x0, eps, xt, heads);
  }
}

}  // namespace

LossProfile profile(const DenoiserModel& model, const Tensor& data, const Schedule& schedule,
                    const ProfileOptions& opts, RngStream rng) {
  if (opts.n_per_t < 1) throw ConfigError("profile: n_per_t must be >= 1");
  if (!model.config().has_head(opts.pred_type)) {
    throw ConfigError("profile: model has no head " + std::string(name(opts.pred_type)));
  }
  const int T = schedule.T();
  const std::size_t dim = model.config().data_dim;
  const Draws d = draw_all(data, T, opts.n_per_t, dim, rng);

  std::vector<double> err(d.ts.size());
  for_each_chunk(model, schedule, d, std::max<std::size_t>(1, opts.chunk_rows),
                 [&](std::size_t b, std::span<const int> ts, const Tensor& x0, const Tensor& eps, const Tensor& xt,
                     const PerHead<Tensor>& heads) {
                   const Tensor& y = *heads[code(opts.pred_type)];
                   const Tensor ref = opts.space == ErrorSpace::Target ? make_target(opts.pred_type, schedule, ts, x0, eps) : x0;
                   const Tensor est = opts.space == ErrorSpace::Target ? y : recover_x0(opts.pred_type, schedule, ts, xt, y);
                   for (std::size_t i = 0; i < ts.size(); ++i) {
                     double s = 0.0;
                     for (std::size_t j = 0; j < dim; ++j) {
                       const double e = est.at(i, j) - ref.at(i, j);
                       s += e * e;
                     }
                     if (!std::isfinite(s)) throw NumericError("profile: non-finite error at t=" + std::to_string(ts[i]));
                     err[b + i] = s;
                   }
                 });

  LossProfile p;
  p.pred_type = opts.pred_type;
  p.space = opts.space;
  p.mean.resize(T);
  p.std_err.resize(T);
  p.count.assign(T, opts.n_per_t);
  const double n = static_cast<double>(opts.n_per_t);
  for (int t = 1; t <= T; ++t) {
    const std::size_t base = static_cast<std::size_t>(t - 1) * opts.n_per_t;
    double m = 0.0;
    for (std::size_t i = 0; i < opts.n_per_t; ++i) m += err[base + i];
    m /= n;
    double v = 0.0;
    for (std::size_t i = 0; i < opts.n_per_t; ++i) v += (err[base + i] - m) * (err[base + i] - m);
    p.mean[t - 1] = m;
    p.std_err[t - 1] = opts.n_per_t > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
  }
  return p;
}

std::vector<std::array<double, 3>> selection_profile(const DenoiserModel& model, const Tensor& data,
                                                     const Schedule& schedule, std::size_t n_per_t, RngStream rng) {
  for (PredictionType p : kAllPredictionTypes) {
    if (!model.config().has_head(p)) throw ConfigError("selection_profile: model needs all three heads");
  }
  if (n_per_t < 1) throw ConfigError("selection_profile: n_per_t must be >= 1");
  const int T = schedule.T();
  const std::size_t dim = model.config().data_dim;
  const Draws d = draw_all(data, T, n_per_t, dim, rng);
  std::vector<std::array<double, 3>> freq(T, {0.0, 0.0, 0.0});
  for_each_chunk(model, schedule, d, 4096,
                 [&](std::size_t, std::span<const int> ts, const Tensor& x0, const Tensor&, const Tensor& xt,
                     const PerHead<Tensor>& heads) {
                   std::array<Tensor, 3> est;
                   for (PredictionType p : kAllPredictionTypes) est[code(p)] = recover_x0(p, schedule, ts, xt, *heads[code(p)]);
                   for (std::size_t i = 0; i < ts.size(); ++i) {
                     std::array<double, 3> e{};
                     for (std::size_t h = 0; h < 3; ++h) {
                       for (std::size_t j = 0; j < dim; ++j) {
                         const double diff = est[h].at(i, j) - x0.at(i, j);
                         e[h] += diff * diff;
                       }
                     }
                     freq[ts[i] - 1][code(mixed_select(e))] += 1.0;
                   }
                 });
  for (auto& row : freq) {
    for (double& v : row) v /= static_cast<double>(n_per_t);
  }
  return freq;
}

}  // namespace difflab
