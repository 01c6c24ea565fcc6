#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moelab/autodiff/ops.hpp"

namespace moelab::model {

// Routing decisions of one MoE layer for every token of a forward pass.
struct RoutingTrace {
  std::size_t experts = 0;
  std::size_t top_k = 0;
  std::vector<std::size_t> chosen;  // tokens x top_k
  std::vector<double> gates;        // tokens x top_k
  std::vector<double> logits;       // tokens x experts

  std::size_t tokens() const noexcept { return top_k ? chosen.size() / top_k : 0; }
};

struct ExpertWeights {
  ad::Var w1;  // [d x f]
  ad::Var w2;  // [f x d]
  ad::Var b1;  // optional [f]
  ad::Var b2;  // optional [d]
};

// relu(x W1 + b1) W2 + b2
ad::Var expert_ffn(ad::Var x, const ExpertWeights& w);

struct MoeOutput {
  ad::Var y;
  RoutingTrace trace;
  ad::Var gates;  // [tokens x top_k], for auxiliary losses
  ad::Var router_logits;
};

// Token-choice top-k mixture: y_t = sum over the selected experts of
// gate * expert(x_t), gates = softmax of the selected router logits. Every
// token is processed by exactly top_k experts; nothing is dropped.
MoeOutput moe_ffn(ad::Var x, ad::Var router, std::span<const ExpertWeights> experts, std::size_t top_k);

// Switch-style balance penalty E * sum_j f_j * P_j, where f_j is the fraction
// of assignments to expert j and P_j the mean router probability.
ad::Var load_balance_loss(const MoeOutput& out);

struct LoadStats {
  std::vector<std::size_t> counts;  // per expert, summed over layers
  double max_mean_ratio = 1.0;
  std::size_t assignments = 0;
};
LoadStats load_balance_stats(std::span<const RoutingTrace> traces);

}  // namespace moelab::model
