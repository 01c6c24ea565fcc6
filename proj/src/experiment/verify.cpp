#include "moelab/experiment/verify.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/theory/memorizer.hpp"
#include "moelab/theory/quantize.hpp"
#include "moelab/theory/sign_router.hpp"

namespace moelab::experiment {

using nlohmann::json;

bool VerifySummary::passed() const {
  for (const auto& r : reports) {
    if (!r.passed()) return false;
  }
  return true;
}

theory::VerifierReport verify_routing_law(std::size_t draws, int dim, int experts, std::uint64_t seed) {
  const std::uint64_t s[] = {seed};
  auto balance = theory::verify_routing_balance(draws, dim, experts, s);
  theory::VerifierReport rep;
  rep.construction = "routing_law";
  rep.instance_count = draws;
  rep.load_histogram = balance.load_histogram;
  const double p = 1.0 / experts;
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
  json freq = json::array();
  for (std::size_t j = 0; j < balance.load_histogram.size(); ++j) {
    const double f = static_cast<double>(balance.load_histogram[j]) / static_cast<double>(draws);
    freq.push_back(f);
    if (std::abs(f - p) > 3.0 * sigma) rep.failures.push_back("expert " + std::to_string(j) + " frequency " + std::to_string(f));
  }
  rep.extra = {{"frequencies", freq}, {"sigma", sigma}, {"experts", experts}};
  return rep;
}

std::vector<theory::VerifierReport> verify_memorizer(std::size_t n, std::size_t seq_len, int dim, int experts,
                                                     std::size_t seeds, std::uint64_t seed,
                                                     std::optional<int> bits) {
  theory::VerifierReport plain, quant;
  plain.construction = "memorizer";
  quant.construction = "memorizer_quantized";
  quant.bits = bits;
  plain.instance_count = quant.instance_count = seeds;
  const int width = theory::memorizer_width_bound(n, dim, experts);
  json runs = json::array(), qruns = json::array();
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t run_seed = mix_seed(seed, s);
    const std::string name = "seed " + std::to_string(s);
    auto data = tasks::gen_memorization_set(n, seq_len, static_cast<std::size_t>(dim), run_seed);
    theory::MemorizerOptions opts;
    opts.seed = run_seed;
    try {
      auto model = theory::build_moe_memorizer(data, experts, width, opts);
      const auto params = theory::memorizer_params(model);
      auto check = theory::check_memorizer(model, data);
      if (!check.all_correct()) {
        plain.failures.push_back(name + ": " + std::to_string(check.points - check.correct) + " wrong signs");
      }
      if (params.active >= static_cast<std::int64_t>(n)) {
        plain.failures.push_back(name + ": active params " + std::to_string(params.active) + " >= n");
      }
      runs.push_back({{"seed", s}, {"accuracy", check.accuracy()}, {"active", params.active},
                      {"total", params.total}, {"largest_expert", params.largest_expert}});
      if (plain.load_histogram.empty()) {
        plain.load_histogram.assign(static_cast<std::size_t>(experts), 0);
        for (std::size_t i = 0; i < n; ++i) ++plain.load_histogram[model.router.route(data.pooled(i))];
      }
      if (bits) {
        auto qcheck = theory::check_memorizer(theory::quantize_params(model, *bits), data);
        if (!qcheck.all_correct()) {
          quant.failures.push_back(name + ": " + std::to_string(qcheck.points - qcheck.correct) + " wrong signs");
        }
        qruns.push_back({{"seed", s}, {"accuracy", qcheck.accuracy()}});
      }
    } catch (const FitError& e) {
      const std::string why = name + ": expert " + std::to_string(e.expert()) + " with " +
                              std::to_string(e.subset_size()) + " points did not fit";
      plain.failures.push_back(why);
      quant.failures.push_back(why);
    }
  }
  plain.extra = {{"n", n}, {"m", dim}, {"experts", experts}, {"width_bound", width}, {"runs", runs}};
  quant.extra = {{"n", n}, {"runs", qruns}};
  std::vector<theory::VerifierReport> out{std::move(plain)};
  if (bits) out.push_back(std::move(quant));
  return out;
}

VerifySummary run_verify(const VerifyOptions& o) {
  theory::log2_exact(o.experts);
  if (o.max_vertices < 2 || o.disjointness_r < 1) throw ContractError("vertex count and r must be positive");
  VerifySummary out;
  auto timed = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    theory::VerifierReport r = fn();
    r.extra["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.reports.push_back(std::move(r));
  };

  theory::Length2Options l2;
  l2.max_vertices = o.max_vertices;
  l2.threshold_scale = o.threshold_scale;
  timed([&] { return theory::verify_length2_exhaustive(l2); });
  timed([&] {
    theory::VerifierReport all;
    all.construction = "disjointness_reduction";
    for (int r = 1; r <= o.disjointness_r; ++r) {
      auto rep = theory::verify_disjointness(r);
      all.instance_count += rep.instance_count;
      for (auto& f : rep.failures) all.failures.push_back("r=" + std::to_string(r) + " " + f);
    }
    return all;
  });
  timed([&] { return verify_routing_law(o.law_draws, o.dim, o.experts, mix_seed(o.seed, 1)); });
  timed([&] {
    std::vector<std::uint64_t> seeds(o.balance_seeds);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = mix_seed(mix_seed(o.seed, 2), i);
    return theory::balance_report(theory::verify_routing_balance(o.balance_n, o.dim, o.experts, seeds));
  });
  {
    const auto t0 = std::chrono::steady_clock::now();
    auto reps = verify_memorizer(o.memorizer_n, o.memorizer_seq_len, o.dim, o.experts, o.memorizer_seeds,
                                 mix_seed(o.seed, 3),
                                 o.memorizer_bits > 0 ? std::optional<int>(o.memorizer_bits) : std::nullopt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (auto& r : reps) {
      r.extra["seconds"] = secs;
      out.reports.push_back(std::move(r));
    }
  }
  l2.bits = o.length2_bits;
  timed([&] { return theory::verify_length2_exhaustive(l2); });
  return out;
}

void write_verify_reports(const VerifySummary& summary, const std::filesystem::path& output_dir) {
  std::filesystem::create_directories(output_dir);
  json all = json::array();
  for (const auto& r : summary.reports) {
    theory::write_report(r, output_dir / (r.construction + ".json"));
    all.push_back({{"construction", r.construction}, {"passed", r.passed()}, {"failures", r.failures.size()}});
  }
  std::ofstream(output_dir / "summary.json") << json{{"passed", summary.passed()}, {"reports", all}}.dump(2) << "\n";
}

}  // namespace moelab::experiment
