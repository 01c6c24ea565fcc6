#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moelab/tasks/graph.hpp"

namespace moelab::theory {

using tasks::Graph;
using tasks::Vertex;

// Input token of the explicit construction: a pair (u, v). v == 0 marks an
// empty slot.
struct EdgeToken {
  Vertex u = 0;
  Vertex v = 0;
  bool operator==(const EdgeToken&) const = default;
};

// Token stream of a graph with designated source s and destination t:
//   |V| slots (s, i) if s->i else (s, 0), for i = 1..|V|
//   the edges that touch neither s nor t, in insertion order
//   |V| slots (t, i) if i->t else (t, 0), for i = 1..|V|
std::vector<EdgeToken> encode_length2_input(const Graph& g);

// Depth-1, one-head dense transformer of width |V| deciding whether s and t
// are joined by a 2-edge path.
struct ExplicitTransformer {
  int num_vertices = 0;
  Vertex source = 0;
  Vertex destination = 0;
  Eigen::MatrixXd query;  // |V| x |V|, all zero
  Eigen::MatrixXd key;    // |V| x |V|, all zero
  Eigen::MatrixXd value;  // identity
  double threshold = 0.0;
  // Fixed-point precision (fractional bits) of attention weights and
  // activations; unset means exact f64 arithmetic.
  std::optional<int> activation_bits;

  int width() const noexcept { return num_vertices; }
  Eigen::VectorXd embed(const EdgeToken& token) const;
  // Attention output at the last position, rescaled by N / |V| so a vertex
  // seen from both endpoints reads 2/|V| and from one endpoint 1/|V|.
  Eigen::VectorXd pre_threshold(std::span<const EdgeToken> tokens) const;
  bool decide(std::span<const EdgeToken> tokens) const;
};

// threshold = threshold_scale / |V|; the construction uses 1.5.
ExplicitTransformer build_length2_dense(int num_vertices, double threshold_scale = 1.5);

// Checks the stream layout and runs the construction.
bool eval_explicit(const ExplicitTransformer& tf, const Graph& g);

// Graph on |V| vertices with s = |V|-1, t = |V| whose s- and t-edges are
// selected by the bits of `mask` (low |V|-2 bits: s->i, next |V|-2: i->t).
Graph length2_family_member(int num_vertices, std::uint32_t mask);

}  // namespace moelab::theory
