#include "moelab/model/moe.hpp"

#include <algorithm>

#include "moelab/errors.hpp"

namespace moelab::model {

using ad::Var;

Var expert_ffn(Var x, const ExpertWeights& w) {
  Var h = ad::matmul(x, w.w1);
  if (w.b1.valid()) h = ad::add_row(h, w.b1);
  Var y = ad::matmul(ad::relu(h), w.w2);
  if (w.b2.valid()) y = ad::add_row(y, w.b2);
  return y;
}

MoeOutput moe_ffn(Var x, Var router, std::span<const ExpertWeights> experts, std::size_t top_k) {
  const std::size_t tokens = x.rows(), e = experts.size();
  if (router.cols() != e) throw DimensionError("router columns must equal the number of experts");
  if (top_k < 1 || top_k > e) throw ContractError("top_k must be in [1, experts]");

  MoeOutput out;
  out.router_logits = ad::matmul(x, router);
  auto topk = ad::topk_softmax(out.router_logits, top_k);
  out.gates = topk.gates;

  out.trace.experts = e;
  out.trace.top_k = top_k;
  out.trace.chosen = topk.experts;
  auto gv = topk.gates.value().data();
  out.trace.gates.assign(gv.begin(), gv.end());
  auto lv = out.router_logits.value().data();
  out.trace.logits.assign(lv.begin(), lv.end());

  std::vector<std::vector<std::size_t>> rows(e), slots(e);
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t s = 0; s < top_k; ++s) {
      const std::size_t j = topk.experts[t * top_k + s];
      rows[j].push_back(t);
      slots[j].push_back(t * top_k + s);
    }
  }
  std::vector<Var> parts;
  std::vector<std::vector<std::size_t>> part_rows;
  for (std::size_t j = 0; j < e; ++j) {
    if (rows[j].empty()) continue;
    Var xj = ad::gather_rows(x, rows[j]);
    Var yj = expert_ffn(xj, experts[j]);
    Var gj = ad::gather_elems(topk.gates, slots[j]);
    parts.push_back(ad::scale_rows(yj, gj));
    part_rows.push_back(std::move(rows[j]));
  }
  out.y = ad::scatter_add_rows(parts, part_rows, tokens);
  return out;
}

Var load_balance_loss(const MoeOutput& out) {
  const auto& tr = out.trace;
  const std::size_t tokens = tr.tokens(), e = tr.experts;
  std::vector<double> frac(e, 0.0);
  for (auto j : tr.chosen) frac[j] += 1.0;
  for (auto& f : frac) f /= static_cast<double>(tr.chosen.size());
  ad::Tensor w = ad::Tensor::zeros({tokens, e});
  for (std::size_t t = 0; t < tokens; ++t)
    for (std::size_t j = 0; j < e; ++j) w[t * e + j] = static_cast<double>(e) * frac[j] / static_cast<double>(tokens);
  return ad::weighted_sum(ad::softmax_rows(out.router_logits), w);
}

LoadStats load_balance_stats(std::span<const RoutingTrace> traces) {
  if (traces.empty()) throw ContractError("load_balance_stats needs at least one trace");
  LoadStats stats;
  stats.counts.assign(traces[0].experts, 0);
  for (const auto& tr : traces) {
    if (tr.experts != stats.counts.size()) throw ContractError("traces disagree on the expert count");
    for (auto j : tr.chosen) ++stats.counts[j];
    stats.assignments += tr.chosen.size();
  }
  if (stats.assignments == 0) return stats;
  const double mean = static_cast<double>(stats.assignments) / static_cast<double>(stats.counts.size());
  const double mx = static_cast<double>(*std::max_element(stats.counts.begin(), stats.counts.end()));
  stats.max_mean_ratio = mx / mean;
  return stats;
}

}  // namespace moelab::model
