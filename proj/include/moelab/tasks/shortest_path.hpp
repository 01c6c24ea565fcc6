#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "moelab/tasks/graph.hpp"
#include "moelab/tasks/sample.hpp"
#include "moelab/tasks/vocab.hpp"

namespace moelab::tasks {

// Wire format (one sample):
//   <BOS> u1 <EDGE> v1 / u2 <EDGE> v2 / ... uk <EDGE> vk <SEP> s t <SEP> path... <EOS>
// "/" separates consecutive edges. The loss mask is set exactly on path...<EOS>.
// Edge order is shuffled with `shuffle_seed`.
Sample shortest_path_sample(const Graph& g, std::pair<Vertex, Vertex> query, const Vocabulary& vocab,
                            std::uint64_t shuffle_seed);

// Inverse of the prompt part of the wire format.
struct ParsedPrompt {
  Graph graph;
  Vertex source = 0;
  Vertex target = 0;
};
ParsedPrompt parse_shortest_path_prompt(std::span<const TokenId> prompt, const Vocabulary& vocab);

// Decodes a completion "v1 v2 ... <EOS>" into vertices; nullopt if it contains
// anything else or lacks the terminating <EOS>.
std::optional<std::vector<Vertex>> decode_path(std::span<const TokenId> completion,
                                               const Vocabulary& vocab);

struct ShortestPathDataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Sample i (train first, then test) draws its graph from seed mix_seed(seed, i),
// so train and test graphs never share a seed. Queries are uniform over ordered
// pairs, resampled until connected; graphs with no connected pair are redrawn.
ShortestPathDataset gen_shortest_path_dataset(int n, double p, std::size_t train_size,
                                              std::size_t test_size, std::uint64_t seed);

Sample gen_shortest_path_instance(int n, double p, std::uint64_t graph_seed, const Vocabulary& vocab);

}  // namespace moelab::tasks
