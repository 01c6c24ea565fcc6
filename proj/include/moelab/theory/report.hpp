#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moelab/theory/sign_router.hpp"

namespace moelab::theory {

struct VerifierReport {
  std::string construction;
  std::size_t instance_count = 0;
  std::vector<std::string> failures;  // names of failing instances
  std::vector<std::size_t> load_histogram;
  std::optional<int> bits;
  nlohmann::json extra = nlohmann::json::object();
  bool passed() const { return failures.empty(); }
};

void to_json(nlohmann::json& j, const VerifierReport& r);
void write_report(const VerifierReport& r, const std::filesystem::path& path);

// Every s/t edge subset on 2..max_vertices vertices against the BFS oracle.
// With `bits`, the construction is quantized first; bits <= 0 selects
// ceil(log2 N) + 4 for each vertex count.
struct Length2Options {
  int max_vertices = 6;
  double threshold_scale = 1.5;
  std::optional<int> bits;
};
VerifierReport verify_length2_exhaustive(const Length2Options& options = {});

// ceil(log2 N) + 4 for streams of length N.
int length2_bits(std::size_t stream_length);

// Randomized sweep: Erdos-Renyi graphs on n vertices with s = n-1, t = n.
VerifierReport verify_length2_random(int n, double p, std::size_t graphs, std::uint64_t seed);

// length-2-path(reduce(a, b)) == OR_i a_i b_i for all a, b in {0,1}^r.
VerifierReport verify_disjointness(int r);

VerifierReport balance_report(const BalanceReport& b);

}  // namespace moelab::theory
