#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "moelab/theory/report.hpp"

namespace moelab::experiment {

struct VerifyOptions {
  // length-2 construction
  int max_vertices = 6;
  double threshold_scale = 1.5;
  // disjointness reduction, all r' <= r
  int disjointness_r = 4;
  // routing: per-expert frequency law and the 2n/K load bound
  std::size_t law_draws = 100000;
  std::size_t balance_n = 4096;
  std::size_t balance_seeds = 1000;
  int dim = 64;
  int experts = 8;
  // memorizer
  std::size_t memorizer_n = 2048;
  std::size_t memorizer_seq_len = 8;
  std::size_t memorizer_seeds = 1;
  // quantized re-checks; bits <= 0 selects ceil(log2 N) + 4 for length-2
  int length2_bits = 0;
  int memorizer_bits = 16;  // <= 0 skips the quantized memorizer check
  std::uint64_t seed = 0;
};

struct VerifySummary {
  std::vector<theory::VerifierReport> reports;
  bool passed() const;
};

// Runs every sub-verifier; the summary passes iff each report passes.
// ContractError when experts is not a power of 2.
VerifySummary run_verify(const VerifyOptions& options);

// One report file per sub-verifier plus summary.json.
void write_verify_reports(const VerifySummary& summary, const std::filesystem::path& output_dir);

// Expert frequencies of the sign router on `draws` Gaussian points, each
// checked against 1/K +- 3 sigma.
theory::VerifierReport verify_routing_law(std::size_t draws, int dim, int experts, std::uint64_t seed);

// The memorizer report, followed by the quantized re-check when `bits` is set.
std::vector<theory::VerifierReport> verify_memorizer(std::size_t n, std::size_t seq_len, int dim, int experts,
                                                     std::size_t seeds, std::uint64_t seed,
                                                     std::optional<int> bits);

}  // namespace moelab::experiment
