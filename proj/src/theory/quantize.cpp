#include "moelab/theory/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "moelab/errors.hpp"

namespace moelab::theory {

namespace {

void check_bits(int bits) {
  if (bits < 2) throw ContractError("quantization needs at least 2 bits");
  if (bits > 62) throw ContractError("quantization supports at most 62 bits");
}

}  // namespace

std::vector<double> quantize_tensor(std::span<const double> values, int bits) {
  check_bits(bits);
  double range = 0.0;
  for (double v : values) range = std::max(range, std::abs(v));
  std::vector<double> out(values.begin(), values.end());
  if (range == 0.0) return out;
  const double levels = std::ldexp(1.0, bits - 1) - 1.0;
  const double step = range / levels;
  for (auto& v : out) v = std::nearbyint(v / step) * step;
  return out;
}

void quantize_in_place(Eigen::Ref<Eigen::MatrixXd> values, int bits) {
  std::vector<double> flat(values.size());
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    for (Eigen::Index r = 0; r < values.rows(); ++r) flat[static_cast<std::size_t>(k++)] = values(r, c);
  auto q = quantize_tensor(flat, bits);
  k = 0;
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    for (Eigen::Index r = 0; r < values.rows(); ++r) values(r, c) = q[static_cast<std::size_t>(k++)];
}

ExplicitTransformer quantize_params(const ExplicitTransformer& tf, int bits) {
  check_bits(bits);
  ExplicitTransformer q = tf;
  quantize_in_place(q.query, bits);
  quantize_in_place(q.key, bits);
  quantize_in_place(q.value, bits);
  const double scale = std::ldexp(1.0, bits);
  q.threshold = std::nearbyint(tf.threshold * scale) / scale;
  q.activation_bits = bits;
  return q;
}

MemorizerMoE quantize_params(const MemorizerMoE& model, int bits) {
  check_bits(bits);
  MemorizerMoE q = model;
  quantize_in_place(q.router.vectors, bits);
  for (auto& e : q.experts) {
    quantize_in_place(e.w, bits);
    quantize_in_place(e.b, bits);
    quantize_in_place(e.u, bits);
  }
  return q;
}

}  // namespace moelab::theory
