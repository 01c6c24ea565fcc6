#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace moelab::tasks {

using Vertex = std::int32_t;  // 1-based

struct Edge {
  Vertex u = 0;
  Vertex v = 0;
  auto operator<=>(const Edge&) const = default;
};

// Directed simple graph on vertices 1..n with an optional designated
// source/destination pair.
class Graph {
 public:
  explicit Graph(int n);

  int num_vertices() const noexcept { return n_; }
  // Throws ContractError on self-loops, duplicates or out-of-range vertices.
  void add_edge(Vertex u, Vertex v);
  bool has_edge(Vertex u, Vertex v) const;
  // Edges in insertion order.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  // Out-neighbours of u in increasing order.
  const std::vector<Vertex>& successors(Vertex u) const;
  const std::vector<Vertex>& predecessors(Vertex u) const;

  void set_endpoints(Vertex source, Vertex destination);
  std::optional<Vertex> source() const noexcept { return source_; }
  std::optional<Vertex> destination() const noexcept { return destination_; }

  void check_vertex(Vertex u) const;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Vertex>> out_;
  std::vector<std::vector<Vertex>> in_;
  std::optional<Vertex> source_;
  std::optional<Vertex> destination_;
};

// Each ordered pair u != v is an edge independently with probability p.
Graph gen_er_graph(int n, double p, std::uint64_t seed);

// Shortest directed path u -> v; among equal-length paths the
// lexicographically smallest vertex sequence. nullopt if unreachable.
std::optional<std::vector<Vertex>> bfs_shortest_path(const Graph& g, Vertex u, Vertex v);

// Hop distance from `from` to every vertex (index v-1); -1 if unreachable.
std::vector<int> bfs_distances(const Graph& g, Vertex from);

// True iff path is a u->v walk along edges of g with the given hop count.
bool is_valid_path(const Graph& g, std::span<const Vertex> path, Vertex u, Vertex v);

// Expected shortest-path length of a query drawn as in the shortest-path task:
// mean over `trials` ER graphs of the mean distance among connected ordered
// pairs. Graphs without any connected pair are skipped.
double mean_query_path_length(int n, double p, int trials, std::uint64_t seed);

struct Calibration {
  double p = 0.0;
  double estimate = 0.0;
};
// Bisection on p for the decreasing branch of mean_query_path_length.
// Throws CalibrationError if target is not reachable within (0, 1).
Calibration calibrate_p(int n, double target_avg, int trials, std::uint64_t seed,
                        double tolerance = 0.1);

// Set-disjointness reduction: items 1..r, source r+1, destination r+2,
// edges source->i when a[i] and i->destination when b[i].
Graph gen_length2_instance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// Brute-force: is there s -> i -> t for the graph's designated endpoints?
bool has_length2_path(const Graph& g);

}  // namespace moelab::tasks
