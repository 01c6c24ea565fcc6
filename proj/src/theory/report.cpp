#include "moelab/theory/report.hpp"

#include <cmath>
#include <fstream>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/theory/length2.hpp"
#include "moelab/theory/quantize.hpp"

namespace moelab::theory {

void to_json(nlohmann::json& j, const VerifierReport& r) {
  j = {{"construction", r.construction},
       {"instance_count", r.instance_count},
       {"failures", r.failures},
       {"load_histogram", r.load_histogram},
       {"passed", r.passed()}};
  j["bits"] = r.bits ? nlohmann::json(*r.bits) : nlohmann::json(nullptr);
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
}

void write_report(const VerifierReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << nlohmann::json(r).dump(2) << '\n';
}

int length2_bits(std::size_t stream_length) {
  if (stream_length < 1) throw ContractError("empty stream");
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(stream_length)))) + 4;
}

namespace {

constexpr std::size_t kMaxListed = 32;

void fail(VerifierReport& r, std::string name) {
  if (r.failures.size() < kMaxListed) r.failures.push_back(std::move(name));
  r.extra["failure_count"] = r.extra.value("failure_count", 0) + 1;
}

}  // namespace

VerifierReport verify_length2_exhaustive(const Length2Options& options) {
  VerifierReport r;
  r.construction = options.bits ? "length2_dense_quantized" : "length2_dense";
  r.extra["threshold_scale"] = options.threshold_scale;
  r.extra["failure_count"] = 0;
  for (int nv = 2; nv <= options.max_vertices; ++nv) {
    ExplicitTransformer tf = build_length2_dense(nv, options.threshold_scale);
    if (options.bits) {
      const int b = *options.bits > 0 ? *options.bits : length2_bits(2 * static_cast<std::size_t>(nv));
      tf = quantize_params(tf, b);
      r.bits = r.bits ? std::max(*r.bits, b) : b;
    }
    const std::uint32_t family = 1u << (2 * (nv - 2));
    for (std::uint32_t mask = 0; mask < family; ++mask) {
      Graph g = length2_family_member(nv, mask);
      ++r.instance_count;
      if (eval_explicit(tf, g) != tasks::has_length2_path(g)) {
        fail(r, "vertices=" + std::to_string(nv) + " mask=" + std::to_string(mask));
      }
    }
  }
  return r;
}

VerifierReport verify_length2_random(int n, double p, std::size_t graphs, std::uint64_t seed) {
  VerifierReport r;
  r.construction = "length2_dense_random";
  r.extra["failure_count"] = 0;
  ExplicitTransformer tf = build_length2_dense(n);
  for (std::size_t i = 0; i < graphs; ++i) {
    const std::uint64_t s = mix_seed(seed, i);
    Graph g = tasks::gen_er_graph(n, p, s);
    g.set_endpoints(n - 1, n);
    ++r.instance_count;
    if (eval_explicit(tf, g) != tasks::has_length2_path(g)) fail(r, "graph_seed=" + std::to_string(s));
  }
  return r;
}

VerifierReport verify_disjointness(int r_items) {
  if (r_items < 0 || r_items > 12) throw ContractError("disjointness check supports r in [0, 12]");
  VerifierReport r;
  r.construction = "disjointness_reduction";
  r.extra["failure_count"] = 0;
  const std::uint32_t count = 1u << r_items;
  std::vector<std::uint8_t> a(static_cast<std::size_t>(r_items)), b(a.size());
  for (std::uint32_t x = 0; x < count; ++x) {
    for (std::uint32_t y = 0; y < count; ++y) {
      bool meet = false;
      for (int i = 0; i < r_items; ++i) {
        a[static_cast<std::size_t>(i)] = (x >> i) & 1u;
        b[static_cast<std::size_t>(i)] = (y >> i) & 1u;
        meet = meet || (a[static_cast<std::size_t>(i)] && b[static_cast<std::size_t>(i)]);
      }
      ++r.instance_count;
      if (tasks::has_length2_path(tasks::gen_length2_instance(a, b)) != meet) {
        fail(r, "a=" + std::to_string(x) + " b=" + std::to_string(y));
      }
    }
  }
  return r;
}

VerifierReport balance_report(const BalanceReport& b) {
  VerifierReport r;
  r.construction = "routing_balance";
  r.instance_count = b.seeds;
  r.load_histogram = b.load_histogram;
  r.extra = {{"n", b.n}, {"experts", b.experts}, {"max_load", b.max_load},
             {"seeds_within_bound", b.seeds_within_bound}, {"required_within_bound", b.required_within_bound()},
             {"precondition_met", b.precondition_met}};
  if (!b.precondition_met) r.failures.push_back("precondition n >= K^2 ln(K/delta) / 2");
  if (b.seeds_within_bound < b.required_within_bound()) {
    for (auto s : b.seeds_over_bound) r.failures.push_back("seed " + std::to_string(s));
  }
  return r;
}

}  // namespace moelab::theory
