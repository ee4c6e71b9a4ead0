#pragma once

// Dense float64 tensors and a dynamic reverse-mode tape.
//
// Shapes are limited to rank 1 and rank 2 (batch, feature). The tape is
// rebuilt every training step: record the forward pass through the free
// functions below, call Tape::backward on a scalar, then read gradients of
// the leaves. Nodes are appended in creation order, which is a valid
// topological order, so backward is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace difflab {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  // Rank-2 helpers; rank-1 tensors behave as a single row.
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }
  bool all_finite() const noexcept;
  std::string shape_str() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient (a parameter or a grad-checked input).
  Var param(Tensor value);
  // Leaf excluded from differentiation.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() target; zeros if none reached the node.
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1; out must hold exactly one element.
  void backward(Var out);

  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  // Used by op implementations. Inputs must already live on this tape.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);
  Tensor& grad_buffer(std::size_t id);
  const Tensor& node_value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }
  bool node_requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. All throw ContractError on shape mismatch and
// NumericError if the result is not finite.
Var matmul(Var a, Var b);                     // [m×k]·[k×n]
Var add(Var a, Var b);                        // same shape
Var sub(Var a, Var b);                        // same shape
Var mul(Var a, Var b);                        // elementwise, same shape
Var scale(Var a, double s);
Var add_row(Var x, Var bias);                 // x[m×n] + bias[n] broadcast over rows
Var silu(Var a);
Var sum(Var a);                               // scalar
Var mse(Var pred, Var target);                // mean over all elements
// Σ_i w_i·Σ_j (pred_ij − target_ij)² / denom. Rows with w_i == 0 contribute
// exactly zero gradient to pred.
Var weighted_row_sse(Var pred, Var target, std::span<const double> row_weights, double denom);

// Non-differentiable helpers.
Tensor matmul(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& t);

// Central-difference gradient check. `f` must build a scalar on the tape from
// the given parameter Vars. Returns max over coordinates of
// |analytic − numeric| / max(1, |analytic|).
using ScalarGraphFn = std::function<Var(Tape&, std::span<const Var>)>;
double grad_check(const ScalarGraphFn& f, std::span<const Tensor> params, double h = 1e-6);

}  // namespace difflab
