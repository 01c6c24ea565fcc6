#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "moelab/tasks/memorization.hpp"
#include "moelab/theory/sign_router.hpp"

namespace moelab::theory {

// Two-layer ReLU network f(x) = u . relu(W x + b). Columns of W below
// `skip` are zero: the expert never reads the router's coordinates.
struct MemorizerExpert {
  Eigen::MatrixXd w;  // q x m
  Eigen::VectorXd b;  // q
  Eigen::VectorXd u;  // q
  int skip = 0;

  int width() const noexcept { return static_cast<int>(w.rows()); }
  double operator()(const Eigen::VectorXd& x) const;
  // q (m - skip) + 2q, the structurally zero columns excluded.
  std::int64_t param_count() const;
};

// One-layer MoE: mean pooling over the sequence (the averaging attention),
// sign routing, then the selected expert.
struct MemorizerMoE {
  SignRouter router;
  std::vector<MemorizerExpert> experts;

  double output(std::span<const double> sequence, std::size_t seq_len) const;
  double output_pooled(const Eigen::VectorXd& pooled) const;
};

struct MemorizerParams {
  std::int64_t router = 0;
  std::int64_t largest_expert = 0;
  std::int64_t total = 0;   // router + all experts
  std::int64_t active = 0;  // router + largest expert
};
MemorizerParams memorizer_params(const MemorizerMoE& model);

// ceil(8 n ln^4(m - log2 K) / (m K)).
int memorizer_width_bound(std::size_t n, int m, int experts);

struct MemorizerOptions {
  int initial_width = 1;
  std::uint64_t seed = 0;
  int max_iterations = 4000;  // gradient refinement steps per attempt
  double learning_rate = 3e-3;
  int restarts = 2;  // attempts per width before doubling
  double target_margin = 0.25;
};

// Fits each expert on the points routed to it, trying widths initial_width,
// 2 initial_width, ... up to max_width. Throws FitError naming the expert
// and its subset size when max_width is not enough.
MemorizerMoE build_moe_memorizer(const tasks::MemorizationSet& data, int experts, int max_width,
                                 const MemorizerOptions& options = {});

struct MemorizerCheck {
  std::size_t points = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> wrong;
  bool all_correct() const { return correct == points; }
  double accuracy() const { return points ? static_cast<double>(correct) / points : 0.0; }
};
MemorizerCheck check_memorizer(const MemorizerMoE& model, const tasks::MemorizationSet& data);

}  // namespace moelab::theory
