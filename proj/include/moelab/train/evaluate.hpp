#pragma once

#include <span>
#include <vector>

#include "moelab/model/model.hpp"
#include "moelab/tasks/sample.hpp"
#include "moelab/tasks/vocab.hpp"

namespace moelab::train {

struct EvalOptions {
  std::size_t batch_size = 64;
};

struct EvalResult {
  std::size_t total = 0;
  std::size_t exact = 0;
  std::size_t valid_path = 0;  // shortest-path queries only
  double load_ratio = 1.0;
  double exact_match() const { return total ? static_cast<double>(exact) / total : 0.0; }
  double valid_path_accuracy() const { return total ? static_cast<double>(valid_path) / total : 0.0; }
};

// Greedy decoding from each prompt. Generation stops at <EOS> or after as
// many tokens as the reference holds; a query counts only if every generated
// token equals the reference. With a shortest-path vocabulary, any decoded
// path that is a valid shortest path in the prompt's graph also counts
// towards valid_path.
EvalResult evaluate(model::Model& model, std::span<const tasks::Sample> queries,
                    const tasks::Vocabulary* path_vocab = nullptr, const EvalOptions& options = {});

double evaluate_exact_match(model::Model& model, std::span<const tasks::Sample> queries,
                            const EvalOptions& options = {});

// Greedy continuation of one prompt, at most max_new tokens, stopping after <EOS>.
std::vector<tasks::TokenId> greedy_decode(model::Model& model, std::span<const tasks::TokenId> prompt,
                                          std::size_t max_new, tasks::TokenId eos);

}  // namespace moelab::train
