#pragma once

// MLP denoiser: [x_t | embed(t)] → SiLU trunk → one linear head per
// prediction type. Each head owns its output layer.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/predictor.hpp"
#include "difflab/rng.hpp"
#include "difflab/tensor.hpp"

namespace difflab {

struct ModelConfig {
  std::size_t data_dim = 2;
  std::size_t time_embed_dim = 32;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::vector<PredictionType> heads = {PredictionType::A};
  int T = 1000;  // embedding is a function of t/T

  bool has_head(PredictionType p) const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Sinusoidal embedding of t/T: [sin(ω_k·t/T) for k] ++ [cos(ω_k·t/T) for k],
// ω_k = 1000·10000^(−k/(dim/2)).
std::vector<double> embed_time(int t, std::size_t dim, int T);

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Per-head outputs indexed by PredictionType code.
template <typename T>
using PerHead = std::array<std::optional<T>, 3>;

struct ForwardResult {
  std::vector<Var> params;  // same order as DenoiserModel::params()
  PerHead<Var> heads;
};

class DenoiserModel {
 public:
  DenoiserModel() = default;
  // He-normal weights from `init`; zero biases. zero_heads zeroes the output layers.
  DenoiserModel(ModelConfig cfg, RngStream& init, bool zero_heads = false);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<NamedTensor>& params() noexcept { return params_; }
  const std::vector<NamedTensor>& params() const noexcept { return params_; }
  std::size_t param_count() const noexcept;
  // Index of the output-layer weight/bias pair for a head, into params().
  std::array<std::size_t, 2> head_param_indices(PredictionType p) const;

  // Records the forward pass on `tape`. ts.size() must equal xt.rows().
  ForwardResult forward(Tape& tape, const Tensor& xt, std::span<const int> ts) const;
  // Same graph on caller-owned parameter variables (layout of params()).
  ForwardResult forward(Tape& tape, const Tensor& xt, std::span<const int> ts, std::span<const Var> params) const;
  // Forward pass without keeping the tape.
  PerHead<Tensor> predict(const Tensor& xt, std::span<const int> ts) const;

  // Loads parameters; names and shapes must match this model's layout.
  void set_params(std::vector<NamedTensor> params);

 private:
  Tensor input_matrix(const Tensor& xt, std::span<const int> ts) const;

  ModelConfig cfg_;
  std::vector<NamedTensor> params_;
};

}  // namespace difflab
