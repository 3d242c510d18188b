#include "emocause/optim.hpp"

#include <cmath>

#include "emocause/error.hpp"

namespace emocause {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
  for (const auto& e : params.entries()) {
    m.emplace_back(e.tensor.size(), 0.0);
    v.emplace_back(e.tensor.size(), 0.0);
  }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  auto& entries = params.entries();
  if (state.m.size() != entries.size()) throw DimensionError("Adam state does not match the parameter store");
  for (std::size_t p = 0; p < entries.size(); ++p) {
    if (state.m[p].size() != entries[p].tensor.size()) {
      throw DimensionError("Adam state for '" + entries[p].name + "' has the wrong size");
    }
    if (!entries[p].tensor.has_grad()) continue;
    for (double g : entries[p].tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + entries[p].name + "'");
    }
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& param = entries[p].tensor;
    auto values = param.mutable_data();
    auto& m = state.m[p];
    auto& v = state.v[p];
    const bool has = param.has_grad();
    const std::span<const double> grad = has ? param.grad() : std::span<const double>{};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (auto& e : params.entries()) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& e : params.entries()) {
      if (!e.tensor.has_grad()) continue;
      for (double& g : e.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace emocause
