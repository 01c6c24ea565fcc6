#include "moelab/tasks/memorization.hpp"

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::tasks {

std::vector<double> MemorizationSet::pooled(std::size_t i) const {
  std::vector<double> x(dim, 0.0);
  auto seq = sequence(i);
  for (std::size_t t = 0; t < seq_len; ++t)
    for (std::size_t c = 0; c < dim; ++c) x[c] += seq[t * dim + c];
  for (auto& v : x) v /= static_cast<double>(seq_len);
  return x;
}

MemorizationSet gen_memorization_set(std::size_t count, std::size_t seq_len, std::size_t dim,
                                     std::uint64_t seed) {
  if (count < 1 || seq_len < 1 || dim < 1) throw ContractError("memorization set sizes must be >= 1");
  MemorizationSet set{count, seq_len, dim, {}, {}};
  Rng rng(seed);
  set.values.resize(count * seq_len * dim);
  for (auto& v : set.values) v = rng.normal();
  Rng label_rng(mix_seed(seed, 1));
  set.labels.resize(count);
  for (auto& y : set.labels) y = label_rng.below(2) ? 1 : -1;
  return set;
}

}  // namespace moelab::tasks
