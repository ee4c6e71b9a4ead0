#include "difflab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {
  if (shape_.empty() || shape_.size() > 2) throw ContractError("tensor rank must be 1 or 2");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || shape_.size() > 2) throw ContractError("tensor rank must be 1 or 2");
  if (product(shape_) != data_.size()) {
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ContractError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::param(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output in op ") + op);
  bool rg = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs), rg ? std::move(fn) : nullptr, rg});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return grad_buffer(v.id); }

void Tape::backward(Var out) {
  if (nodes_[out.id].value.size() != 1) throw ContractError("backward target must be scalar");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(out.id)[0] = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ContractError("matmul: dimension mismatch " + a.shape_str() + " x " + b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      const double* bp = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Differentiable ops

Var matmul(Var a, Var b) {
  Tape& tp = *a.tape;
  Tensor c = matmul(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return tp.record(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& A = t.node_value(ia);
    const Tensor& B = t.node_value(ib);
    const Tensor& dC = t.node_grad(self);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (t.node_requires_grad(ia)) {
      // dA = dC·Bᵀ
      Tensor& dA = t.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        const double* dci = dC.data().data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* bp = B.data().data() + p * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += dci[j] * bp[j];
          dA.at(i, p) += s;
        }
      }
    }
    if (t.node_requires_grad(ib)) {
      // dB = Aᵀ·dC
      Tensor& dB = t.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        const double* dci = dC.data().data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A.at(i, p);
          double* dbp = dB.data().data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dbp[j] += aip * dci[j];
        }
      }
    }
  }, "matmul");
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor c = a.value();
  accumulate(c, b.value());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    for (std::size_t in : {ia, ib}) {
      if (t.node_requires_grad(in)) accumulate(t.grad_buffer(in), t.node_grad(self));
    }
  }, "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor c = a.value();
  auto cd = c.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.node_grad(self);
    if (t.node_requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.node_requires_grad(ib)) {
      auto d = t.grad_buffer(ib).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor c = a.value();
  auto cd = c.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& A = t.node_value(ia);
    const Tensor& B = t.node_value(ib);
    if (t.node_requires_grad(ia)) {
      auto d = t.grad_buffer(ia).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * B[i];
    }
    if (t.node_requires_grad(ib)) {
      auto d = t.grad_buffer(ib).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * A[i];
    }
  }, "mul");
}

Var scale(Var a, double s) {
  Tensor c = a.value();
  for (double& v : c.data()) v *= s;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(c), {ia}, [ia, s](Tape& t, std::size_t self) {
    const Tensor& g = t.node_grad(self);
    auto d = t.grad_buffer(ia).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  }, "scale");
}

Var add_row(Var x, Var bias) {
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (X.rank() != 2 || b.size() != X.cols()) {
    throw ContractError("add_row: bias " + b.shape_str() + " does not match " + X.shape_str());
  }
  Tensor c = X;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto r = c.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  const std::size_t ix = x.id, ib = bias.id;
  return x.tape->record(std::move(c), {ix, ib}, [ix, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.node_grad(self);
    if (t.node_requires_grad(ix)) accumulate(t.grad_buffer(ix), g);
    if (t.node_requires_grad(ib)) {
      Tensor& db = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = g.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) db[j] += r[j];
      }
    }
  }, "add_row");
}

Var silu(Var a) {
  Tensor c = a.value();
  for (double& v : c.data()) v = v * sigmoid(v);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(c), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& A = t.node_value(ia);
    auto d = t.grad_buffer(ia).data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double s = sigmoid(A[i]);
      d[i] += g[i] * s * (1.0 + A[i] * (1.0 - s));
    }
  }, "silu");
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor({1}, s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    for (double& d : t.grad_buffer(ia).data()) d += g;
  }, "sum");
}

Var mse(Var pred, Var target) {
  const Tensor& P = pred.value();
  const Tensor& Y = target.value();
  require_same_shape(P, Y, "mse");
  const double n = static_cast<double>(P.size());
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double e = P[i] - Y[i];
    s += e * e;
  }
  const std::size_t ip = pred.id, iy = target.id;
  return pred.tape->record(Tensor({1}, s / n), {ip, iy}, [ip, iy, n](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    const Tensor& P = t.node_value(ip);
    const Tensor& Y = t.node_value(iy);
    if (t.node_requires_grad(ip)) {
      auto d = t.grad_buffer(ip).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * 2.0 * (P[i] - Y[i]) / n;
    }
    if (t.node_requires_grad(iy)) {
      auto d = t.grad_buffer(iy).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g * 2.0 * (P[i] - Y[i]) / n;
    }
  }, "mse");
}

Var weighted_row_sse(Var pred, Var target, std::span<const double> row_weights, double denom) {
  const Tensor& P = pred.value();
  const Tensor& Y = target.value();
  require_same_shape(P, Y, "weighted_row_sse");
  if (row_weights.size() != P.rows()) throw ContractError("weighted_row_sse: weight count != rows");
  if (!(denom > 0.0)) throw ContractError("weighted_row_sse: denom must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < P.rows(); ++i) {
    if (row_weights[i] == 0.0) continue;
    double r = 0.0;
    for (std::size_t j = 0; j < P.cols(); ++j) {
      const double e = P.at(i, j) - Y.at(i, j);
      r += e * e;
    }
    s += row_weights[i] * r;
  }
  std::vector<double> w(row_weights.begin(), row_weights.end());
  const std::size_t ip = pred.id, iy = target.id;
  return pred.tape->record(Tensor({1}, s / denom), {ip, iy},
                           [ip, iy, w = std::move(w), denom](Tape& t, std::size_t self) {
    const double g = t.node_grad(self)[0];
    const Tensor& P = t.node_value(ip);
    const Tensor& Y = t.node_value(iy);
    for (std::size_t in : {ip, iy}) {
      if (!t.node_requires_grad(in)) continue;
      const double sign = in == ip ? 1.0 : -1.0;
      Tensor& d = t.grad_buffer(in);
      for (std::size_t i = 0; i < P.rows(); ++i) {
        if (w[i] == 0.0) continue;
        const double c = sign * g * 2.0 * w[i] / denom;
        for (std::size_t j = 0; j < P.cols(); ++j) d.at(i, j) += c * (P.at(i, j) - Y.at(i, j));
      }
    }
  }, "weighted_row_sse");
}

double grad_check(const ScalarGraphFn& f, std::span<const Tensor> params, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw ContractError("grad_check: step must lie in [1e-7, 1e-4]");

  auto evaluate = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const auto& p : ps) vars.push_back(tape.param(p));
    Var out = f(tape, vars);
    if (out.value().size() != 1) throw ContractError("grad_check: function output is not scalar");
    if (grads) {
      tape.backward(out);
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return out.value()[0];
  };

  std::vector<Tensor> base(params.begin(), params.end());
  std::vector<Tensor> analytic;
  evaluate(base, &analytic);

  double worst = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    for (std::size_t i = 0; i < base[k].size(); ++i) {
      const double orig = base[k][i];
      base[k][i] = orig + h;
      const double fp = evaluate(base, nullptr);
      base[k][i] = orig - h;
      const double fm = evaluate(base, nullptr);
      base[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace difflab
