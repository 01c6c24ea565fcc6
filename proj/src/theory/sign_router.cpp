#include "moelab/theory/sign_router.hpp"

#include <algorithm>
#include <cmath>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::theory {

bool is_power_of_two(long k) { return k > 0 && (k & (k - 1)) == 0; }

int log2_exact(long k) {
  if (!is_power_of_two(k)) throw ContractError("expert count " + std::to_string(k) + " is not a power of 2");
  int b = 0;
  while ((1L << b) < k) ++b;
  return b;
}

SignRouter SignRouter::make(int experts, int dim) {
  const int bits = log2_exact(experts);
  if (dim < bits) throw ContractError("router dimension smaller than log2 K");
  SignRouter r;
  r.experts = experts;
  r.dim = dim;
  r.vectors = Eigen::MatrixXd::Zero(experts, dim);
  for (int j = 0; j < experts; ++j) {
    for (int c = 0; c < bits; ++c) {
      const int bit = (j >> (bits - 1 - c)) & 1;
      r.vectors(j, c) = bit ? -1.0 : 1.0;
    }
  }
  return r;
}

int SignRouter::sign_bits() const noexcept {
  int b = 0;
  while ((1 << b) < experts) ++b;
  return b;
}

std::size_t SignRouter::route(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) throw DimensionError("router input has the wrong dimension");
  Eigen::Map<const Eigen::VectorXd> v(x.data(), dim);
  Eigen::VectorXd scores = vectors * v;
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < scores.size(); ++j) {
    if (scores(j) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(j);
  }
  return best;
}

std::size_t BalanceReport::required_within_bound() const {
  return static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(seeds) - 1e-9));
}

BalanceReport verify_routing_balance(std::size_t n, int m, int experts, std::span<const std::uint64_t> seeds,
                                     double delta, BalanceInput input) {
  SignRouter router = SignRouter::make(experts, m);
  BalanceReport rep;
  rep.n = n;
  rep.experts = experts;
  rep.seeds = seeds.size();
  rep.delta = delta;
  rep.load_histogram.assign(static_cast<std::size_t>(experts), 0);
  const double K = experts;
  rep.precondition_met = static_cast<double>(n) >= K * K * std::log(K / delta) / 2.0;
  const double bound = 2.0 * static_cast<double>(n) / K;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (auto seed : seeds) {
    Rng rng(seed);
    std::vector<std::size_t> load(static_cast<std::size_t>(experts), 0);
    if (input == BalanceInput::identical) for (auto& v : x) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      if (input == BalanceInput::gaussian) for (auto& v : x) v = rng.normal();
      ++load[router.route(x)];
    }
    const std::size_t mx = *std::max_element(load.begin(), load.end());
    rep.max_load = std::max(rep.max_load, mx);
    if (static_cast<double>(mx) <= bound) {
      ++rep.seeds_within_bound;
    } else {
      rep.seeds_over_bound.push_back(seed);
    }
    for (std::size_t j = 0; j < load.size(); ++j) rep.load_histogram[j] += load[j];
  }
  return rep;
}

}  // namespace moelab::theory
