#include "moelab/train/capacity.hpp"

#include <algorithm>

#include "moelab/errors.hpp"
#include "moelab/tasks/phonebook.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/train/trainer.hpp"

namespace moelab::train {

CapacityResult phonebook_capacity(const ModelBuilder& build, const TrainConfig& cfg,
                                  std::span<const std::size_t> sizes, const CapacityOptions& options) {
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw ContractError("phone-book sizes must be strictly ascending");
  }
  const auto vocab = tasks::Vocabulary::phonebook();
  CapacityResult res;
  res.params = model::count_params(build().config());
  auto trial = [&](std::size_t size) {
    model::Model m = build();
    auto book = tasks::gen_phonebook(size, mix_seed(options.data_seed, 2 * size));
    auto data = tasks::phonebook_samples(book, vocab, options.num_queries, mix_seed(options.data_seed, 2 * size + 1));
    train(m, data.train, cfg);
    const double acc = evaluate_exact_match(m, data.queries);
    res.points.push_back({size, acc});
    return acc >= options.threshold;
  };
  using Search = CapacityOptions::Search;
  if (options.search == Search::bisect) {
    // invariant: every index < lo passes, every index >= hi fails
    std::size_t lo = 0, hi = sizes.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (trial(sizes[mid])) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    res.capacity = lo > 0 ? sizes[lo - 1] : 0;
    std::sort(res.points.begin(), res.points.end(),
              [](const CapacityPoint& a, const CapacityPoint& b) { return a.size < b.size; });
    return res;
  }
  for (std::size_t size : sizes) {
    if (trial(size)) {
      res.capacity = size;
    } else if (options.search == Search::ascending) {
      break;
    }
  }
  return res;
}

double train_test_gap(model::Model& model, std::span<const tasks::Sample> train_subset,
                      std::span<const tasks::Sample> test_set) {
  if (train_subset.empty() || test_set.empty()) throw ContractError("train_test_gap needs nonempty sets");
  return evaluate_exact_match(model, train_subset) - evaluate_exact_match(model, test_set);
}

}  // namespace moelab::train
