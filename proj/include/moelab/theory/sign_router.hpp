#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace moelab::theory {

bool is_power_of_two(long k);
int log2_exact(long k);  // ContractError unless k is a power of 2

// K router vectors in R^m. Vector j carries the sign pattern of j's log2 K
// bits (most significant first, 0 -> +1, 1 -> -1) on its first log2 K
// coordinates and zeros elsewhere.
struct SignRouter {
  int experts = 1;
  int dim = 0;
  Eigen::MatrixXd vectors;  // K x m

  static SignRouter make(int experts, int dim);
  int sign_bits() const noexcept;
  // argmax_j <r_j, x>, ties to the lower index.
  std::size_t route(std::span<const double> x) const;
};

enum class BalanceInput { gaussian, identical };

struct BalanceReport {
  std::size_t n = 0;
  int experts = 1;
  std::size_t seeds = 0;
  std::size_t seeds_within_bound = 0;
  std::size_t max_load = 0;  // over all seeds
  std::vector<std::size_t> load_histogram;  // summed expert loads over seeds
  double delta = 0.01;
  bool precondition_met = true;             // n >= K^2 ln(K/delta) / 2
  std::vector<std::uint64_t> seeds_over_bound;
  bool bound_2n_over_K_satisfied() const { return seeds_within_bound == seeds; }
  // At least ceil((1 - delta) * seeds) seeds within the bound.
  std::size_t required_within_bound() const;
};

// Routes n standard Gaussian points in R^m per seed and checks max load <= 2n/K.
BalanceReport verify_routing_balance(std::size_t n, int m, int experts, std::span<const std::uint64_t> seeds,
                                     double delta = 0.01, BalanceInput input = BalanceInput::gaussian);

}  // namespace moelab::theory
