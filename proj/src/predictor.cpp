#include "difflab/predictor.hpp"

#include <cmath>
#include <vector>

#include "difflab/errors.hpp"

namespace difflab {

std::string_view name(PredictionType p) noexcept {
  switch (p) {
    case PredictionType::D: return "d";
    case PredictionType::V: return "v";
    case PredictionType::A: return "a";
  }
  return "?";
}

PredictionType parse_prediction_type(std::string_view s) {
  if (s == "d" || s == "D" || s == "x0") return PredictionType::D;
  if (s == "v" || s == "V") return PredictionType::V;
  if (s == "a" || s == "A" || s == "eps") return PredictionType::A;
  throw ConfigError("unknown prediction type '" + std::string(s) + "' (expected d|v|a)");
}

namespace {

void check_rows(std::span<const int> ts, const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw ContractError(std::string(op) + ": shape mismatch");
  if (ts.size() != a.rows()) throw ContractError(std::string(op) + ": timestep count != rows");
}

}  // namespace

Tensor make_target(PredictionType pt, const Schedule& s, std::span<const int> ts, const Tensor& x0,
                   const Tensor& eps) {
  check_rows(ts, x0, eps, "make_target");
  switch (pt) {
    case PredictionType::D: return x0;
    case PredictionType::A: return eps;
    case PredictionType::V: break;
  }
  Tensor v = x0;
  for (std::size_t i = 0; i < x0.rows(); ++i) {
    const double ab = s.alpha_bar(ts[i]);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    for (std::size_t j = 0; j < x0.cols(); ++j) v.at(i, j) = a * eps.at(i, j) - b * x0.at(i, j);
  }
  return v;
}

Tensor make_target(PredictionType pt, const Schedule& s, int t, const Tensor& x0, const Tensor& eps) {
  std::vector<int> ts(x0.rows(), t);
  return make_target(pt, s, ts, x0, eps);
}

Tensor recover_x0(PredictionType pt, const Schedule& s, std::span<const int> ts, const Tensor& xt,
                  const Tensor& y, std::size_t* amplified) {
  check_rows(ts, xt, y, "recover_x0");
  if (pt == PredictionType::D) return y;
  Tensor x0 = y;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    const double ab = s.alpha_bar(ts[i]);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    if (pt == PredictionType::V) {
      for (std::size_t j = 0; j < xt.cols(); ++j) x0.at(i, j) = a * xt.at(i, j) - b * y.at(i, j);
    } else {
      if (ab < 1e-12 && amplified) ++*amplified;
      for (std::size_t j = 0; j < xt.cols(); ++j) x0.at(i, j) = (xt.at(i, j) - b * y.at(i, j)) / a;
    }
  }
  return x0;
}

Tensor recover_x0(PredictionType pt, const Schedule& s, int t, const Tensor& xt, const Tensor& y) {
  std::vector<int> ts(xt.rows(), t);
  return recover_x0(pt, s, ts, xt, y);
}

PredictionType mixed_select(std::span<const double, 3> losses) {
  for (PredictionType p : kAllPredictionTypes) {
    const double l = losses[code(p)];
    if (std::isnan(l)) throw NumericError("mixed_select: NaN loss on head " + std::string(name(p)));
    if (l < 0.0) throw ContractError("mixed_select: negative loss on head " + std::string(name(p)));
  }
  PredictionType best = kSelectionPriority[0];
  for (PredictionType p : kSelectionPriority) {
    if (losses[code(p)] < losses[code(best)]) best = p;
  }
  return best;
}

}  // namespace difflab
