#include "moelab/tasks/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <string>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::tasks {

Graph::Graph(int n) : n_(n), out_(static_cast<std::size_t>(std::max(n, 0))), in_(out_.size()) {
  if (n < 1) throw ContractError("graph needs at least one vertex");
}

void Graph::check_vertex(Vertex u) const {
  if (u < 1 || u > n_) {
    throw ContractError("vertex " + std::to_string(u) + " outside [1, " + std::to_string(n_) + "]");
  }
}

void Graph::add_edge(Vertex u, Vertex v) {
  check_vertex(u);
  check_vertex(v);
  if (u == v) throw ContractError("self-loop on vertex " + std::to_string(u));
  auto& succ = out_[static_cast<std::size_t>(u - 1)];
  auto it = std::lower_bound(succ.begin(), succ.end(), v);
  if (it != succ.end() && *it == v) {
    throw ContractError("duplicate edge " + std::to_string(u) + "->" + std::to_string(v));
  }
  succ.insert(it, v);
  auto& pred = in_[static_cast<std::size_t>(v - 1)];
  pred.insert(std::lower_bound(pred.begin(), pred.end(), u), u);
  edges_.push_back({u, v});
}

bool Graph::has_edge(Vertex u, Vertex v) const {
  check_vertex(u);
  check_vertex(v);
  const auto& succ = out_[static_cast<std::size_t>(u - 1)];
  return std::binary_search(succ.begin(), succ.end(), v);
}

const std::vector<Vertex>& Graph::successors(Vertex u) const {
  check_vertex(u);
  return out_[static_cast<std::size_t>(u - 1)];
}

const std::vector<Vertex>& Graph::predecessors(Vertex u) const {
  check_vertex(u);
  return in_[static_cast<std::size_t>(u - 1)];
}

void Graph::set_endpoints(Vertex source, Vertex destination) {
  check_vertex(source);
  check_vertex(destination);
  if (source == destination) throw ContractError("source and destination must differ");
  source_ = source;
  destination_ = destination;
}

Graph gen_er_graph(int n, double p, std::uint64_t seed) {
  if (n < 2) throw ContractError("gen_er_graph needs n >= 2");
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("edge probability must lie in [0, 1]");
  Graph g(n);
  Rng rng(seed);
  for (Vertex u = 1; u <= n; ++u) {
    for (Vertex v = 1; v <= n; ++v) {
      if (u == v) continue;
      if (rng.bernoulli(p)) g.add_edge(u, v);
    }
  }
  return g;
}

namespace {

std::vector<int> bfs(int n, Vertex from, const std::function<const std::vector<Vertex>&(Vertex)>& next) {
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::deque<Vertex> queue{from};
  dist[static_cast<std::size_t>(from - 1)] = 0;
  while (!queue.empty()) {
    Vertex x = queue.front();
    queue.pop_front();
    for (Vertex y : next(x)) {
      auto& dy = dist[static_cast<std::size_t>(y - 1)];
      if (dy < 0) {
        dy = dist[static_cast<std::size_t>(x - 1)] + 1;
        queue.push_back(y);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<int> bfs_distances(const Graph& g, Vertex from) {
  g.check_vertex(from);
  return bfs(g.num_vertices(), from, [&](Vertex x) -> const std::vector<Vertex>& { return g.successors(x); });
}

std::optional<std::vector<Vertex>> bfs_shortest_path(const Graph& g, Vertex u, Vertex v) {
  g.check_vertex(u);
  g.check_vertex(v);
  // distances to v on the reversed graph, then walk greedily from u taking
  // the smallest successor that is one hop closer
  auto to_v = bfs(g.num_vertices(), v,
                  [&](Vertex x) -> const std::vector<Vertex>& { return g.predecessors(x); });
  if (to_v[static_cast<std::size_t>(u - 1)] < 0) return std::nullopt;
  std::vector<Vertex> path{u};
  Vertex cur = u;
  while (cur != v) {
    const int want = to_v[static_cast<std::size_t>(cur - 1)] - 1;
    for (Vertex y : g.successors(cur)) {
      if (to_v[static_cast<std::size_t>(y - 1)] == want) {
        cur = y;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

bool is_valid_path(const Graph& g, std::span<const Vertex> path, Vertex u, Vertex v) {
  if (path.empty() || path.front() != u || path.back() != v) return false;
  for (Vertex x : path) {
    if (x < 1 || x > g.num_vertices()) return false;
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!g.has_edge(path[i], path[i + 1])) return false;
  }
  return true;
}

double mean_query_path_length(int n, double p, int trials, std::uint64_t seed) {
  double total = 0.0;
  int graphs = 0;
  for (int t = 0; t < trials; ++t) {
    Graph g = gen_er_graph(n, p, mix_seed(seed, static_cast<std::uint64_t>(t)));
    double sum = 0.0;
    long pairs = 0;
    for (Vertex u = 1; u <= n; ++u) {
      auto dist = bfs_distances(g, u);
      for (Vertex v = 1; v <= n; ++v) {
        const int d = dist[static_cast<std::size_t>(v - 1)];
        if (v != u && d > 0) {
          sum += d;
          ++pairs;
        }
      }
    }
    if (pairs == 0) continue;
    total += sum / static_cast<double>(pairs);
    ++graphs;
  }
  return graphs ? total / graphs : 0.0;
}

Calibration calibrate_p(int n, double target, int trials, std::uint64_t seed, double tolerance) {
  if (trials < 1) throw ContractError("calibrate_p needs at least one trial");
  auto estimate = [&](double p) { return mean_query_path_length(n, p, trials, seed); };
  if (target < 1.0 - tolerance) {
    throw CalibrationError("mean shortest-path length is always >= 1");
  }
  // Coarse log-spaced scan to locate the peak; the estimate rises from 1 near
  // p = 0 (isolated edges) and decays back to 1 at p = 1.
  constexpr int kGrid = 48;
  double best_p = 1.0, best_est = estimate(1.0);
  for (int i = 0; i < kGrid; ++i) {
    double p = std::pow(10.0, -3.0 + 3.0 * i / (kGrid - 1));
    double e = estimate(p);
    if (e > best_est) {
      best_est = e;
      best_p = p;
    }
  }
  if (best_est < target - tolerance) {
    throw CalibrationError("target mean path length " + std::to_string(target) +
                           " unreachable for n=" + std::to_string(n) + " (peak " +
                           std::to_string(best_est) + ")");
  }
  double lo = best_p, hi = 1.0;
  Calibration best{best_p, best_est};
  auto consider = [&](double p, double e) {
    if (std::abs(e - target) < std::abs(best.estimate - target)) best = {p, e};
  };
  consider(1.0, estimate(1.0));
  for (int it = 0; it < 60 && std::abs(best.estimate - target) > tolerance / 4; ++it) {
    double mid = 0.5 * (lo + hi);
    double e = estimate(mid);
    consider(mid, e);
    if (e > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(best.estimate - target) > tolerance) {
    throw CalibrationError("bisection did not reach the target within tolerance");
  }
  return best;
}

Graph gen_length2_instance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ContractError("bitvectors must have equal length");
  const int r = static_cast<int>(a.size());
  Graph g(r + 2);
  const Vertex s = r + 1, t = r + 2;
  for (int i = 0; i < r; ++i) {
    if (a[static_cast<std::size_t>(i)]) g.add_edge(s, i + 1);
  }
  for (int i = 0; i < r; ++i) {
    if (b[static_cast<std::size_t>(i)]) g.add_edge(i + 1, t);
  }
  g.set_endpoints(s, t);
  return g;
}

bool has_length2_path(const Graph& g) {
  if (!g.source() || !g.destination()) throw ContractError("graph has no designated endpoints");
  const Vertex s = *g.source(), t = *g.destination();
  for (Vertex i : g.successors(s)) {
    if (i != t && g.has_edge(i, t)) return true;
  }
  return false;
}

}  // namespace moelab::tasks
