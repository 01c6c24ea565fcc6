#include "moelab/train/evaluate.hpp"

#include <algorithm>

#include "moelab/errors.hpp"
#include "moelab/tasks/graph.hpp"
#include "moelab/tasks/shortest_path.hpp"

namespace moelab::train {

namespace {

using tasks::Sample;
using tasks::TokenId;

TokenId argmax_row(const ad::Tensor& logits, std::size_t row) {
  const std::size_t v = logits.cols();
  auto r = logits.data().subspan(row * v, v);
  return static_cast<TokenId>(std::max_element(r.begin(), r.end()) - r.begin());
}

// Greedy continuation of several prompts at once; returns the generated
// tokens of each.
std::vector<std::vector<TokenId>> greedy_batch(model::Model& model, std::vector<std::vector<TokenId>> seqs,
                                               std::span<const std::size_t> max_new,
                                               std::span<const TokenId> eos) {
  const std::size_t cap = static_cast<std::size_t>(model.config().max_seq_len);
  std::vector<std::vector<TokenId>> generated(seqs.size());
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (max_new[i] > 0 && seqs[i].size() <= cap) active.push_back(i);
  }
  while (!active.empty()) {
    std::vector<TokenId> packed;
    ad::SeqLayout layout;
    for (auto i : active) {
      packed.insert(packed.end(), seqs[i].begin(), seqs[i].end());
      layout.append(seqs[i].size());
    }
    ad::Tape tape;
    auto fwd = model.forward(tape, packed, layout);
    const ad::Tensor& logits = fwd.logits.value();
    std::vector<std::size_t> still;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      const TokenId next = argmax_row(logits, layout.offsets[a + 1] - 1);
      generated[i].push_back(next);
      seqs[i].push_back(next);
      if (next != eos[i] && generated[i].size() < max_new[i] && seqs[i].size() <= cap) still.push_back(i);
    }
    active = std::move(still);
  }
  return generated;
}

}  // namespace

std::vector<TokenId> greedy_decode(model::Model& model, std::span<const TokenId> prompt, std::size_t max_new,
                                   TokenId eos) {
  std::vector<std::vector<TokenId>> seqs{{prompt.begin(), prompt.end()}};
  std::size_t caps[] = {max_new};
  TokenId eoss[] = {eos};
  return greedy_batch(model, std::move(seqs), caps, eoss)[0];
}

EvalResult evaluate(model::Model& model, std::span<const Sample> queries, const tasks::Vocabulary* path_vocab,
                    const EvalOptions& options) {
  model.set_trainable(false);
  EvalResult res;
  res.total = queries.size();
  std::vector<model::RoutingTrace> traces;
  std::vector<std::uint8_t> exact(queries.size(), 0);

  // Greedy decoding reproduces the reference exactly iff the argmax at every
  // answer position, given the reference prefix, is the reference token; one
  // teacher-forced pass decides exact match.
  for (std::size_t begin = 0; begin < queries.size(); begin += options.batch_size) {
    const std::size_t end = std::min(queries.size(), begin + options.batch_size);
    std::vector<TokenId> packed;
    ad::SeqLayout layout;
    for (std::size_t i = begin; i < end; ++i) {
      const Sample& q = queries[i];
      if (q.answer_begin < 1 || q.answer_end <= q.answer_begin || q.answer_end > q.tokens.size()) {
        throw ContractError("query lacks a prompt or a reference answer");
      }
      packed.insert(packed.end(), q.tokens.begin(), q.tokens.begin() + static_cast<std::ptrdiff_t>(q.answer_end - 1));
      layout.append(q.answer_end - 1);
    }
    ad::Tape tape;
    auto fwd = model.forward(tape, packed, layout);
    const ad::Tensor& logits = fwd.logits.value();
    for (std::size_t i = begin; i < end; ++i) {
      const Sample& q = queries[i];
      const std::size_t o = layout.offsets[i - begin];
      bool ok = true;
      for (std::size_t j = q.answer_begin; j < q.answer_end && ok; ++j) ok = argmax_row(logits, o + j - 1) == q.tokens[j];
      exact[i] = ok;
    }
    for (auto& tr : fwd.traces) traces.push_back(std::move(tr));
  }
  res.exact = static_cast<std::size_t>(std::count(exact.begin(), exact.end(), std::uint8_t{1}));
  if (!traces.empty()) res.load_ratio = model::load_balance_stats(traces).max_mean_ratio;

  if (path_vocab) {
    res.valid_path = res.exact;
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (!exact[i]) misses.push_back(i);
    }
    for (std::size_t begin = 0; begin < misses.size(); begin += options.batch_size) {
      const std::size_t end = std::min(misses.size(), begin + options.batch_size);
      std::vector<std::vector<TokenId>> seqs;
      std::vector<std::size_t> caps;
      std::vector<TokenId> eos;
      for (std::size_t m = begin; m < end; ++m) {
        const Sample& q = queries[misses[m]];
        seqs.emplace_back(q.prompt().begin(), q.prompt().end());
        caps.push_back(q.answer_end - q.answer_begin);
        eos.push_back(q.tokens[q.answer_end - 1]);
      }
      auto outs = greedy_batch(model, std::move(seqs), caps, eos);
      for (std::size_t m = begin; m < end; ++m) {
        const Sample& q = queries[misses[m]];
        auto path = tasks::decode_path(outs[m - begin], *path_vocab);
        if (!path) continue;
        auto parsed = tasks::parse_shortest_path_prompt(q.prompt(), *path_vocab);
        if (!tasks::is_valid_path(parsed.graph, *path, parsed.source, parsed.target)) continue;
        auto dist = tasks::bfs_distances(parsed.graph, parsed.source);
        if (static_cast<int>(path->size()) - 1 == dist[static_cast<std::size_t>(parsed.target - 1)]) ++res.valid_path;
      }
    }
  }
  return res;
}

double evaluate_exact_match(model::Model& model, std::span<const Sample> queries, const EvalOptions& options) {
  return evaluate(model, queries, nullptr, options).exact_match();
}

}  // namespace moelab::train
