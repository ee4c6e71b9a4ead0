#include "difflab/optimizer.hpp"

#include <cmath>

#include "difflab/errors.hpp"

namespace difflab {

void adam_step(std::span<NamedTensor> params, std::span<const Tensor> grads, double lr, AdamState& st) {
  if (grads.size() != params.size()) throw ContractError("adam_step: grad count != param count");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.value.shape(), 0.0);
      st.v.emplace_back(p.value.shape(), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  ++st.step;
  const double c1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].value.data();
    auto g = grads[k].data();
    auto m = st.m[k].data();
    auto v = st.v[k].data();
    if (g.size() != w.size()) throw ContractError("adam_step: grad shape mismatch for " + params[k].name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = AdamState::beta1 * m[i] + (1.0 - AdamState::beta1) * g[i];
      v[i] = AdamState::beta2 * v[i] + (1.0 - AdamState::beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + AdamState::eps);
    }
  }
}

}  // namespace difflab
