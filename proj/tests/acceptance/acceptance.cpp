// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
// MOELAB_ACCEPTANCE_ONLY=1,2,6  runs a subset.
// MOELAB_ACCEPTANCE_SCALE=smoke shrinks the two training sweeps to a few
// minutes (for checking the plumbing; the verdicts are then meaningless).
// MOELAB_ACCEPTANCE_DIR         sweep output root (default ./acceptance_runs).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "moelab/experiment/records.hpp"
#include "moelab/experiment/report.hpp"
#include "moelab/experiment/runner.hpp"
#include "moelab/experiment/sweep.hpp"
#include "moelab/experiment/sweep_config.hpp"
#include "moelab/experiment/verify.hpp"
#include "moelab/theory/length2.hpp"
#include "moelab/theory/report.hpp"
#include "moelab/theory/sign_router.hpp"
#include "support.hpp"

using namespace moelab;
using namespace moelab::experiment;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool smoke() {
  const char* s = std::getenv("MOELAB_ACCEPTANCE_SCALE");
  return s && std::string(s) == "smoke";
}

fs::path runs_root() {
  const char* s = std::getenv("MOELAB_ACCEPTANCE_DIR");
  return s ? fs::path(s) : fs::path("acceptance_runs");
}

std::set<int> selected() {
  std::set<int> out;
  const char* s = std::getenv("MOELAB_ACCEPTANCE_ONLY");
  if (!s) {
    for (int i = 1; i <= 10; ++i) out.insert(i);
    return out;
  }
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.insert(std::stoi(tok));
  }
  return out;
}

std::string first_failure(const theory::VerifierReport& r) {
  return r.failures.empty() ? "" : "; first failure: " + r.failures.front();
}

Outcome length2_exact() {
  const auto t0 = std::chrono::steady_clock::now();
  theory::Length2Options o;
  o.max_vertices = 6;
  auto r = theory::verify_length2_exhaustive(o);
  const double secs = since(t0);
  return {r.passed() && secs < 60.0, fmt("%zu graphs on <= 6 vertices, %zu errors, %.2fs (limit 60s)",
                                         r.instance_count, r.failures.size(), secs) + first_failure(r)};
}

Outcome disjointness() {
  auto r = theory::verify_disjointness(4);
  return {r.passed() && r.instance_count == 256,
          fmt("r=4, %zu pairs, %zu errors", r.instance_count, r.failures.size()) + first_failure(r)};
}

Outcome routing_law() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = verify_routing_law(100000, 64, 8, 11);
  const double secs = since(t0);
  const double sigma = std::sqrt(0.125 * 0.875 / 1e5);
  double worst = 0.0;
  for (auto c : r.load_histogram) worst = std::max(worst, std::abs(static_cast<double>(c) / 1e5 - 0.125) / sigma);
  return {r.passed() && secs < 10.0,
          fmt("K=8, 1e5 draws, worst deviation %.2f sigma (limit 3), %.2fs (limit 10s)", worst, secs)};
}

Outcome load_bound() {
  std::vector<std::uint64_t> seeds(1000);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = mix_seed(17, i);
  auto b = theory::verify_routing_balance(4096, 64, 8, seeds);
  return {b.seeds_within_bound >= 990,
          fmt("n=4096, K=8: %zu/1000 seeds with max load <= 1024 (need 990), worst load %zu", b.seeds_within_bound,
              b.max_load)};
}

Outcome memorizer() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 2048, seeds = 20;
  auto reps = verify_memorizer(n, 8, 64, 8, seeds, 23, std::nullopt);
  const double secs = since(t0);
  std::size_t ok = 0;
  long long worst_active = 0;
  for (const auto& run : reps[0].extra.at("runs")) {
    const long long active = run.at("active").get<long long>();
    worst_active = std::max(worst_active, active);
    if (run.at("accuracy").get<double>() == 1.0 && active < static_cast<long long>(n)) ++ok;
  }
  return {ok >= 19 && secs < 600.0,
          fmt("n=2048, m=64, K=8, width %d: %zu/20 seeds exact with active < n (need 19), max active %lld, "
              "%.1fs (limit 600s)",
              reps[0].extra.at("width_bound").get<int>(), ok, worst_active, secs) +
              first_failure(reps[0])};
}

Outcome gradients() {
  double worst = 0.0;
  std::string worst_name;
  std::size_t entries = 0;
  ad::GradCheckOptions opts;
  opts.kink_margin = 1e-3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const testing::PrimitiveCases cases(seed);
    for (const auto& [name, f] : cases.fns) {
      auto r = ad::grad_check(f, cases.x, 1e-4, opts);
      entries += r.entries_checked;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_name = name;
      }
    }
    auto dense = model::ModelConfig::dense(8, 2, 7, 6);
    dense.ffn_bias = true;
    auto moe = model::ModelConfig::moe(8, 2, 4, 2, 7, 6);
    moe.aux_load_loss_weight = 0.1;
    for (const auto& [name, cfg] : {std::pair{"dense d=8 L=2", dense}, std::pair{"moe d=8 L=2", moe}}) {
      auto r = testing::model_grad_check(cfg, seed, 1e-4);
      entries += r.entries_checked;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_name = name;
      }
    }
  }
  return {worst < 1e-4, fmt("28 primitive cases + 2 models x 10 seeds, %zu entries, max rel err %.3g (%s), limit 1e-4",
                            entries, worst, worst_name.c_str())};
}

Outcome quantized_length2() {
  theory::Length2Options o;
  o.max_vertices = 6;
  o.bits = 0;
  auto r = theory::verify_length2_exhaustive(o);
  return {r.passed(), fmt("%zu graphs quantized to ceil(log2 N)+4 bits (%d bits at 6 vertices), %zu errors",
                          r.instance_count, r.bits.value_or(0), r.failures.size()) +
                          first_failure(r)};
}

// Sweep presets for the two training criteria.
json phonebook_preset(const fs::path& out) {
  json sizes = smoke() ? json{16, 32} : json{256, 512, 1024, 2048, 4096};
  const int epochs = smoke() ? 20 : 300;
  json dense_widths = smoke() ? json{16, 32} : json{32, 64, 128};
  json experts = smoke() ? json{2, 4} : json{4, 8, 16};
  return {{"task", "phonebook"},
          {"output_dir", out.string()},
          {"seeds", {0, 1}},
          {"workers", 1},
          {"metrics", {"phonebook_capacity"}},
          {"task_args", {{"sizes", sizes}, {"num_queries", 1000}, {"threshold", 0.9}, {"search", "ascending"}}},
          {"models",
           {{{"arch", "dense"}, {"width", dense_widths}, {"depth", 2}},
            {{"arch", "moe"}, {"width", smoke() ? 16 : 32}, {"depth", 2}, {"experts", experts}, {"top_k", 2}}}},
          {"train", {{"learning_rate", {1e-2}}, {"epochs", {epochs}}, {"batch_size", {16}}}}};
}

json shortest_path_preset(const fs::path& out) {
  const bool s = smoke();
  return {{"task", "shortest_path"},
          {"output_dir", out.string()},
          {"seeds", s ? json{0, 1} : json{0, 1, 2, 3, 4}},
          {"workers", 1},
          {"metrics", {"exact_match", "valid_path_accuracy"}},
          {"task_args",
           {{"n", s ? 6 : 12}, {"p", s ? 0.35 : 0.17}, {"train_size", s ? 100 : 3000}, {"test_size", s ? 50 : 500}}},
          {"models",
           {{{"arch", "moe"}, {"width", s ? json{16, 32} : json{32, 64}}, {"depth", 2}, {"experts", {4}}, {"top_k", 2}},
            {{"arch", "moe"}, {"width", s ? 16 : 32}, {"depth", 2}, {"experts", {16}}, {"top_k", 2}}}},
          {"train", {{"learning_rate", {3e-3}}, {"epochs", {s ? 2 : 15}}, {"batch_size", {32}}}}};
}

struct SweepRun {
  ExperimentConfig cfg;
  std::vector<ExperimentRecord> rows;
  double seconds = 0.0;
  std::size_t failed = 0;
};

SweepRun run_preset(const json& preset) {
  SweepRun out;
  out.cfg = experiment_config_from_json(preset);
  fs::remove_all(out.cfg.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  SweepOptions opts;
  opts.workers = resolve_workers(out.cfg.workers);
  opts.on_done = [](const JobSpec& job, const JobResult& res) {
    std::fprintf(stderr, "  done %s d=%d E=%d seed=%llu:", model::to_string(job.model.arch).c_str(), job.model.width,
                 job.model.experts, static_cast<unsigned long long>(job.seed));
    for (const auto& r : res.records) std::fprintf(stderr, " %s=%g", r.metric_name.c_str(), r.metric_value);
    std::fprintf(stderr, " (%.0fs)\n", res.records.empty() ? 0.0 : res.records[0].wall_seconds);
  };
  auto summary = run_sweep(out.cfg, opts);
  out.seconds = since(t0);
  out.failed = summary.failed;
  if (fs::exists(summary.csv)) out.rows = read_records(summary.csv);
  return out;
}

SweepRun phonebook_sweep, shortest_path_sweep;

Outcome phonebook_trend() {
  phonebook_sweep = run_preset(phonebook_preset(runs_root() / "phonebook"));
  const auto& rows = phonebook_sweep.rows;
  const int moe_d = smoke() ? 16 : 32;
  // seed means of capacity per E at fixed d
  std::map<int, std::pair<double, int>> by_e;
  for (const auto& r : rows) {
    if (r.arch != "moe" || r.d != moe_d) continue;
    by_e[r.E].first += r.metric_value;
    by_e[r.E].second += 1;
  }
  std::vector<double> es, caps;
  std::string listing;
  for (const auto& [e, acc] : by_e) {
    es.push_back(e);
    caps.push_back(acc.first / acc.second);
    listing += fmt(" E=%d:%g", e, acc.first / acc.second);
  }
  const auto rho = spearman(es, caps);
  auto rep = build_report(rows);
  std::optional<double> gap;
  std::size_t gap_points = 0;
  for (const auto& g : rep.plots) {
    if (g.metric == "phonebook_capacity") {
      gap = g.max_gap;
      gap_points = g.gap_points;
    }
  }
  std::string dense;
  for (const auto& r : rows) {
    if (r.arch == "dense" && r.seed == 0) dense += fmt(" d=%d:%g", r.d, r.metric_value);
  }
  const bool pass = phonebook_sweep.failed == 0 && rho && *rho >= 0.9 && gap && gap_points > 0 && *gap <= 1.0;
  return {pass, fmt("Spearman(capacity, E | d=%d) = %s (need >= 0.9); max log2 gap to dense = %s over %zu points "
                    "(limit 1); %zu jobs, %zu failed, %.0fs",
                    moe_d, rho ? fmt("%.3f", *rho).c_str() : "undefined", gap ? fmt("%.3f", *gap).c_str() : "undefined",
                    gap_points, rows.size(), phonebook_sweep.failed, phonebook_sweep.seconds) +
                    "; means" + listing + "; dense seed 0" + dense};
}

Outcome shortest_path_trend() {
  shortest_path_sweep = run_preset(shortest_path_preset(runs_root() / "shortest_path"));
  const int d0 = smoke() ? 16 : 32;
  std::map<std::tuple<int, int, unsigned long long>, double> em;
  std::set<unsigned long long> seeds;
  for (const auto& r : shortest_path_sweep.rows) {
    if (r.metric_name != "exact_match") continue;
    em[{r.d, r.E, r.seed}] = r.metric_value;
    seeds.insert(r.seed);
  }
  std::size_t wins = 0, compared = 0;
  std::string listing;
  for (auto s : seeds) {
    auto get = [&](int d, int e) {
      auto it = em.find({d, e, s});
      return it == em.end() ? std::nan("") : it->second;
    };
    const double base = get(d0, 4), wide = get(2 * d0, 4), many = get(d0, 16);
    if (std::isnan(base) || std::isnan(wide) || std::isnan(many)) continue;
    ++compared;
    const double gain_e = many - base, gain_d = wide - base;
    if (gain_e < gain_d) ++wins;
    listing += fmt(" seed %llu: +E %+.3f vs +d %+.3f;", s, gain_e, gain_d);
  }
  const std::size_t need = smoke() ? compared : 4;
  const bool pass = shortest_path_sweep.failed == 0 && compared == seeds.size() && compared > 0 && wins >= need;
  return {pass, fmt("gain(E 4->16, d=%d) < gain(d %d->%d, E=4) in %zu/%zu seeds (need %zu); %zu failed, %.0fs;", d0, d0,
                    2 * d0, wins, compared, need, shortest_path_sweep.failed, shortest_path_sweep.seconds) +
                    listing};
}

Outcome determinism() {
  std::size_t checked = 0, mismatched = 0;
  std::string detail;
  for (const SweepRun* run : {&phonebook_sweep, &shortest_path_sweep}) {
    if (run->rows.empty()) continue;
    // the cheapest row of each sweep, rerun from its manifest entry
    const auto it = std::min_element(run->rows.begin(), run->rows.end(), [](const auto& a, const auto& b) {
      return a.wall_seconds < b.wall_seconds;
    });
    const auto job = find_job(read_manifest(run->cfg.output_dir), *it);
    if (!job) {
      ++mismatched;
      detail += " no manifest entry for a " + it->task + " row;";
      continue;
    }
    const auto again = run_job(*job);
    for (const auto& r : again.records) {
      if (r.metric_name != it->metric_name) continue;
      ++checked;
      if (r.metric_value != it->metric_value) ++mismatched;
      detail += fmt(" %s %s d=%d E=%d seed %llu: %.17g vs %.17g;", it->task.c_str(), it->metric_name.c_str(), it->d,
                    it->E, it->seed, it->metric_value, r.metric_value);
    }
  }
  if (checked == 0 && mismatched == 0) {
    // training criteria were not selected: rerun a tiny job twice
    json tiny{{"task", "phonebook"},
              {"task_args", {{"sizes", {16}}, {"num_queries", 16}}},
              {"models", {{{"arch", "moe"}, {"width", 16}, {"depth", 1}, {"experts", 2}, {"top_k", 1}}}},
              {"train", {{"epochs", {20}}, {"learning_rate", {1e-2}}, {"batch_size", {16}}}}};
    const auto job = expand_jobs(experiment_config_from_json(tiny)).at(0);
    const double a = run_job(job).records.at(0).metric_value, b = run_job(job).records.at(0).metric_value;
    checked = 1;
    mismatched = a == b ? 0 : 1;
    detail = fmt(" tiny phonebook job: %.17g vs %.17g", a, b);
  }
  return {checked > 0 && mismatched == 0, fmt("%zu reruns, %zu mismatches;", checked, mismatched) + detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"length-2 construction exhaustive", length2_exact},
      {"disjointness reduction", disjointness},
      {"routing law", routing_law},
      {"load bound", load_bound},
      {"memorizer", memorizer},
      {"gradient check", gradients},
      {"phonebook capacity trend", phonebook_trend},
      {"shortest-path width vs experts", shortest_path_trend},
      {"quantized length-2 construction", quantized_length2},
      {"rerun determinism", determinism},
  };
  const auto only = selected();
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  if (smoke()) std::printf("note: smoke scale, training verdicts are not meaningful\n");
  return failures == 0 ? 0 : 1;
}
