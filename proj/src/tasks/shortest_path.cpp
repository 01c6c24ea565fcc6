#include "moelab/tasks/shortest_path.hpp"

#include <algorithm>
#include <string>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::tasks {

void Sample::validate() const {
  if (loss_mask.size() != tokens.size()) throw ContractError("mask length differs from token length");
  if (answer_begin > answer_end || answer_end > tokens.size()) {
    throw ContractError("answer span outside the token sequence");
  }
}

namespace {

TokenId vertex_token(const Vocabulary& vocab, Vertex v) { return vocab.id(std::to_string(v)); }

}  // namespace

Sample shortest_path_sample(const Graph& g, std::pair<Vertex, Vertex> query, const Vocabulary& vocab,
                            std::uint64_t shuffle_seed) {
  auto [s, t] = query;
  auto path = bfs_shortest_path(g, s, t);
  if (!path || s == t) {
    throw ContractError("query " + std::to_string(s) + "->" + std::to_string(t) + " is not connected");
  }
  std::vector<Edge> edges = g.edges();
  Rng rng(shuffle_seed);
  rng.shuffle(edges);

  const TokenId edge = vocab.id(kEdge), slash = vocab.id(kSlash), sep = vocab.id(kSep);
  Sample out;
  out.tokens.push_back(vocab.id(kBos));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i) out.tokens.push_back(slash);
    out.tokens.push_back(vertex_token(vocab, edges[i].u));
    out.tokens.push_back(edge);
    out.tokens.push_back(vertex_token(vocab, edges[i].v));
  }
  out.tokens.push_back(sep);
  out.tokens.push_back(vertex_token(vocab, s));
  out.tokens.push_back(vertex_token(vocab, t));
  out.tokens.push_back(sep);
  out.answer_begin = out.tokens.size();
  for (Vertex v : *path) out.tokens.push_back(vertex_token(vocab, v));
  out.tokens.push_back(vocab.id(kEos));
  out.answer_end = out.tokens.size();
  out.loss_mask.assign(out.tokens.size(), 0);
  std::fill(out.loss_mask.begin() + static_cast<std::ptrdiff_t>(out.answer_begin), out.loss_mask.end(), 1);
  out.meta = {{"task", "shortest_path"}, {"n", g.num_vertices()}, {"source", s}, {"target", t}};
  return out;
}

ParsedPrompt parse_shortest_path_prompt(std::span<const TokenId> prompt, const Vocabulary& vocab) {
  const TokenId bos = vocab.id(kBos), edge = vocab.id(kEdge), slash = vocab.id(kSlash),
                sep = vocab.id(kSep);
  auto vertex = [&](TokenId id) -> Vertex {
    const auto& tok = vocab.token(id);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit)) {
      throw ContractError("expected a vertex token, got '" + tok + "'");
    }
    return std::stoi(tok);
  };
  // vocabulary lists vertices first
  int n = 0;
  while (static_cast<std::size_t>(n) < vocab.size() && vocab.token(n) == std::to_string(n + 1)) ++n;
  if (prompt.size() < 5 || prompt[0] != bos) throw ContractError("prompt must start with <BOS>");
  std::size_t i = 1;
  Graph g(n);
  while (i < prompt.size() && prompt[i] != sep) {
    if (i + 2 >= prompt.size() || prompt[i + 1] != edge) throw ContractError("malformed edge in prompt");
    g.add_edge(vertex(prompt[i]), vertex(prompt[i + 2]));
    i += 3;
    if (i < prompt.size() && prompt[i] == slash) ++i;
  }
  if (i + 4 != prompt.size() || prompt[i] != sep || prompt[i + 3] != sep) {
    throw ContractError("prompt must end with <SEP> s t <SEP>");
  }
  ParsedPrompt out{g, vertex(prompt[i + 1]), vertex(prompt[i + 2])};
  return out;
}

std::optional<std::vector<Vertex>> decode_path(std::span<const TokenId> completion,
                                               const Vocabulary& vocab) {
  const TokenId eos = vocab.id(kEos);
  std::vector<Vertex> path;
  for (TokenId id : completion) {
    if (id == eos) return path;
    const auto& tok = vocab.token(id);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit)) return std::nullopt;
    path.push_back(std::stoi(tok));
  }
  return std::nullopt;
}

Sample gen_shortest_path_instance(int n, double p, std::uint64_t graph_seed, const Vocabulary& vocab) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? graph_seed : mix_seed(graph_seed, attempt);
    Graph g = gen_er_graph(n, p, seed);
    if (g.edges().empty()) continue;
    Rng rng(mix_seed(seed, 0x51));
    // An edge guarantees a connected pair, so resampling terminates.
    for (;;) {
      Vertex s = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n))) + 1;
      Vertex t = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n))) + 1;
      if (s == t || !bfs_shortest_path(g, s, t)) continue;
      Sample out = shortest_path_sample(g, {s, t}, vocab, mix_seed(seed, 0x5f));
      out.meta["graph_seed"] = seed;
      return out;
    }
  }
}

ShortestPathDataset gen_shortest_path_dataset(int n, double p, std::size_t train_size,
                                              std::size_t test_size, std::uint64_t seed) {
  if (train_size < 1 || test_size < 1) throw ContractError("dataset sizes must be >= 1");
  const Vocabulary vocab = Vocabulary::graph(n);
  ShortestPathDataset ds;
  ds.train.reserve(train_size);
  ds.test.reserve(test_size);
  for (std::size_t i = 0; i < train_size + test_size; ++i) {
    Sample s = gen_shortest_path_instance(n, p, mix_seed(seed, i), vocab);
    s.meta["split"] = i < train_size ? "train" : "test";
    (i < train_size ? ds.train : ds.test).push_back(std::move(s));
  }
  return ds;
}

}  // namespace moelab::tasks
