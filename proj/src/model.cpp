#include "difflab/model.hpp"

#include <algorithm>
#include <cmath>

#include "difflab/errors.hpp"

namespace difflab {

bool ModelConfig::has_head(PredictionType p) const {
  return std::find(heads.begin(), heads.end(), p) != heads.end();
}

void ModelConfig::validate() const {
  if (data_dim < 1) throw ConfigError("model: data_dim must be >= 1");
  if (time_embed_dim % 2 != 0) throw ConfigError("model: time_embed_dim must be even");
  if (hidden.empty()) throw ConfigError("model: need at least one hidden layer");
  if (std::any_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h == 0; })) {
    throw ConfigError("model: hidden widths must be positive");
  }
  if (heads.empty()) throw ConfigError("model: at least one head required");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    for (std::size_t j = i + 1; j < heads.size(); ++j) {
      if (heads[i] == heads[j]) throw ConfigError("model: duplicate head");
    }
  }
  if (T < 1) throw ConfigError("model: T must be >= 1");
}

nlohmann::json ModelConfig::to_json() const {
  std::vector<std::string> hs;
  for (auto h : heads) hs.emplace_back(name(h));
  return {{"data_dim", data_dim}, {"time_embed_dim", time_embed_dim}, {"hidden", hidden},
          {"heads", hs}, {"T", T}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "data_dim") c.data_dim = value.get<std::size_t>();
    else if (key == "time_embed_dim") c.time_embed_dim = value.get<std::size_t>();
    else if (key == "hidden") c.hidden = value.get<std::vector<std::size_t>>();
    else if (key == "heads") {
      c.heads.clear();
      for (const auto& h : value) c.heads.push_back(parse_prediction_type(h.get<std::string>()));
    } else if (key == "T") c.T = value.get<int>();
    else throw ConfigError("model: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::vector<double> embed_time(int t, std::size_t dim, int T) {
  if (dim % 2 != 0) throw ConfigError("embed_time: dim must be even");
  if (T < 1) throw ConfigError("embed_time: T must be >= 1");
  const std::size_t half = dim / 2;
  std::vector<double> e(dim);
  const double pos = static_cast<double>(t) / T;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = 1000.0 * std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
    e[k] = std::sin(freq * pos);
    e[half + k] = std::cos(freq * pos);
  }
  return e;
}

DenoiserModel::DenoiserModel(ModelConfig cfg, RngStream& init, bool zero_heads) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t fan_in = cfg_.data_dim + cfg_.time_embed_dim;
  auto he = [&](std::size_t in, std::size_t out) {
    Tensor w = Tensor::matrix(in, out);
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : w.data()) v = sd * init.normal();
    return w;
  };
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    const std::size_t width = cfg_.hidden[l];
    params_.push_back({"trunk." + std::to_string(l) + ".weight", he(fan_in, width)});
    params_.push_back({"trunk." + std::to_string(l) + ".bias", Tensor({width}, 0.0)});
    fan_in = width;
  }
  // Heads in canonical D, V, A order regardless of the config order.
  for (PredictionType p : kAllPredictionTypes) {
    if (!cfg_.has_head(p)) continue;
    Tensor w = zero_heads ? Tensor::matrix(fan_in, cfg_.data_dim) : he(fan_in, cfg_.data_dim);
    if (!zero_heads) {
      // Smaller output scale keeps initial predictions near zero.
      for (double& v : w.data()) v *= 0.1;
    }
    params_.push_back({"head." + std::string(name(p)) + ".weight", std::move(w)});
    params_.push_back({"head." + std::string(name(p)) + ".bias", Tensor({cfg_.data_dim}, 0.0)});
  }
}

std::size_t DenoiserModel::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::array<std::size_t, 2> DenoiserModel::head_param_indices(PredictionType p) const {
  const std::string w = "head." + std::string(name(p)) + ".weight";
  for (std::size_t i = 0; i + 1 < params_.size(); ++i) {
    if (params_[i].name == w) return {i, i + 1};
  }
  throw ContractError("model has no head " + std::string(name(p)));
}

Tensor DenoiserModel::input_matrix(const Tensor& xt, std::span<const int> ts) const {
  if (xt.rank() != 2 || xt.cols() != cfg_.data_dim) {
    throw ContractError("forward: expected x_t of shape [batch x " + std::to_string(cfg_.data_dim) + "], got " +
                        xt.shape_str());
  }
  if (ts.size() != xt.rows()) throw ContractError("forward: timestep count != batch");
  const std::size_t d = cfg_.data_dim, e = cfg_.time_embed_dim;
  Tensor in = Tensor::matrix(xt.rows(), d + e);
  // Embeddings repeat heavily within a batch; cache by t.
  std::vector<std::pair<int, std::vector<double>>> cache;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    auto r = in.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] = xt.at(i, j);
    auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& c) { return c.first == ts[i]; });
    if (it == cache.end()) {
      cache.emplace_back(ts[i], embed_time(ts[i], e, cfg_.T));
      it = cache.end() - 1;
    }
    std::copy(it->second.begin(), it->second.end(), r.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return in;
}

ForwardResult DenoiserModel::forward(Tape& tape, const Tensor& xt, std::span<const int> ts) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.param(p.value));
  return forward(tape, xt, ts, vars);
}

ForwardResult DenoiserModel::forward(Tape& tape, const Tensor& xt, std::span<const int> ts,
                                     std::span<const Var> params) const {
  if (params.size() != params_.size()) throw ContractError("forward: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value().shape() != params_[i].value.shape()) {
      throw ContractError("forward: shape mismatch for " + params_[i].name);
    }
  }
  ForwardResult out;
  out.params.assign(params.begin(), params.end());

  Var h = tape.constant(input_matrix(xt, ts));
  std::size_t k = 0;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l, k += 2) {
    try {
      h = silu(add_row(matmul(h, out.params[k]), out.params[k + 1]));
    } catch (const NumericError& e) {
      throw NumericError("forward: non-finite activation at layer " + std::to_string(l) + " (" + e.what() + ")");
    }
  }
  for (PredictionType p : kAllPredictionTypes) {
    if (!cfg_.has_head(p)) continue;
    try {
      out.heads[code(p)] = add_row(matmul(h, out.params[k]), out.params[k + 1]);
    } catch (const NumericError& e) {
      throw NumericError("forward: non-finite output at head " + std::string(name(p)) + " (" + e.what() + ")");
    }
    k += 2;
  }
  return out;
}

PerHead<Tensor> DenoiserModel::predict(const Tensor& xt, std::span<const int> ts) const {
  Tape tape;
  ForwardResult f = forward(tape, xt, ts);
  PerHead<Tensor> out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (f.heads[i]) out[i] = f.heads[i]->value();
  }
  return out;
}

void DenoiserModel::set_params(std::vector<NamedTensor> params) {
  if (params.size() != params_.size()) throw ContractError("set_params: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != params_[i].name || !params[i].value.same_shape(params_[i].value)) {
      throw ContractError("set_params: layout mismatch at " + params_[i].name);
    }
  }
  params_ = std::move(params);
}

}  // namespace difflab
