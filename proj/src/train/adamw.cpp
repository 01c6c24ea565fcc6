#include "moelab/train/adamw.hpp"

#include <cmath>

#include "moelab/errors.hpp"

namespace moelab::train {

void adamw_step(std::span<const OptimTarget> params, AdamState& state, double lr, double weight_decay,
                const AdamParams& hyper) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value->size(), 0.0);
      state.v.emplace_back(p.value->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("optimizer state does not match the parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].value->size()) {
      throw DimensionError("optimizer state shape mismatch for " + params[i].name);
    }
    if (params[i].value->has_grad()) {
      const auto g = params[i].value->grad();
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!std::isfinite(g[k])) {
          throw NumericError("non-finite gradient in " + params[i].name + " at entry " + std::to_string(k));
        }
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor& p = *params[i].value;
    auto w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = p.has_grad();
    std::span<const double> g = has ? p.grad() : std::span<const double>{};
    const double shrink = params[i].decay ? 1.0 - lr * weight_decay : 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = has ? g[k] : 0.0;
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * gk;
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * gk * gk;
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      w[k] = w[k] * shrink - lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

}  // namespace moelab::train
