#include "moelab/theory/length2.hpp"

#include <cmath>

#include "moelab/errors.hpp"

namespace moelab::theory {

namespace {

double round_fixed(double x, int bits) {
  const double scale = std::ldexp(1.0, bits);
  return std::nearbyint(x * scale) / scale;
}

}  // namespace

std::vector<EdgeToken> encode_length2_input(const Graph& g) {
  if (!g.source() || !g.destination()) throw ContractError("graph has no designated endpoints");
  const Vertex s = *g.source(), t = *g.destination();
  const int n = g.num_vertices();
  std::vector<EdgeToken> out;
  for (Vertex i = 1; i <= n; ++i) out.push_back({s, (i != s && g.has_edge(s, i)) ? i : 0});
  for (const auto& e : g.edges()) {
    if (e.u != s && e.u != t && e.v != s && e.v != t) out.push_back({e.u, e.v});
  }
  for (Vertex i = 1; i <= n; ++i) out.push_back({t, (i != t && g.has_edge(i, t)) ? i : 0});
  return out;
}

Eigen::VectorXd ExplicitTransformer::embed(const EdgeToken& token) const {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(num_vertices);
  if (token.v > 0 && (token.u == source || token.u == destination)) e(token.v - 1) = 1.0;
  return e;
}

Eigen::VectorXd ExplicitTransformer::pre_threshold(std::span<const EdgeToken> tokens) const {
  const auto N = static_cast<Eigen::Index>(tokens.size());
  if (N == 0) throw ContractError("empty token stream");
  Eigen::MatrixXd phi(N, num_vertices);
  for (Eigen::Index j = 0; j < N; ++j) phi.row(j) = embed(tokens[static_cast<std::size_t>(j)]).transpose();

  Eigen::RowVectorXd scores = phi.row(N - 1) * query * key.transpose() * phi.transpose();
  Eigen::RowVectorXd probs = (scores.array() - scores.maxCoeff()).exp();
  probs /= probs.sum();
  if (activation_bits) probs = probs.unaryExpr([&](double p) { return round_fixed(p, *activation_bits); });

  Eigen::VectorXd y = (probs * phi * value).transpose();
  y *= static_cast<double>(N) / num_vertices;
  if (activation_bits) y = y.unaryExpr([&](double v) { return round_fixed(v, *activation_bits); });
  return y;
}

bool ExplicitTransformer::decide(std::span<const EdgeToken> tokens) const {
  return (pre_threshold(tokens).array() > threshold).any();
}

ExplicitTransformer build_length2_dense(int num_vertices, double threshold_scale) {
  if (num_vertices < 2) throw ContractError("length-2 construction needs at least 2 vertices");
  ExplicitTransformer tf;
  tf.num_vertices = num_vertices;
  tf.source = num_vertices - 1;
  tf.destination = num_vertices;
  tf.query = Eigen::MatrixXd::Zero(num_vertices, num_vertices);
  tf.key = Eigen::MatrixXd::Zero(num_vertices, num_vertices);
  tf.value = Eigen::MatrixXd::Identity(num_vertices, num_vertices);
  tf.threshold = threshold_scale / num_vertices;
  return tf;
}

bool eval_explicit(const ExplicitTransformer& tf, const Graph& g) {
  if (g.num_vertices() != tf.num_vertices) throw ContractError("graph size does not match the construction");
  if (g.source() != tf.source || g.destination() != tf.destination) {
    throw ContractError("graph endpoints do not match the construction");
  }
  auto tokens = encode_length2_input(g);
  const int n = tf.num_vertices;
  const std::size_t mid_end = tokens.size() - static_cast<std::size_t>(n);
  for (int i = 0; i < n; ++i) {
    const auto& a = tokens[static_cast<std::size_t>(i)];
    const auto& b = tokens[mid_end + static_cast<std::size_t>(i)];
    if (a.u != tf.source || (a.v != 0 && a.v != i + 1)) throw ContractError("malformed source slot");
    if (b.u != tf.destination || (b.v != 0 && b.v != i + 1)) throw ContractError("malformed destination slot");
  }
  for (std::size_t j = static_cast<std::size_t>(n); j < mid_end; ++j) {
    const auto& m = tokens[j];
    if (m.u == tf.source || m.u == tf.destination || m.v == tf.source || m.v == tf.destination) {
      throw ContractError("middle edge touches an endpoint");
    }
  }
  return tf.decide(tokens);
}

Graph length2_family_member(int num_vertices, std::uint32_t mask) {
  const int r = num_vertices - 2;
  if (r < 0 || r > 15) throw ContractError("family defined for 2..17 vertices");
  std::vector<std::uint8_t> a(static_cast<std::size_t>(r)), b(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    a[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    b[static_cast<std::size_t>(i)] = (mask >> (r + i)) & 1u;
  }
  return tasks::gen_length2_instance(a, b);
}

}  // namespace moelab::theory
