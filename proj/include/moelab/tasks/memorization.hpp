#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace moelab::tasks {

// n sequences of N tokens in R^m with i.i.d. N(0, 1) entries and uniform
// +/-1 labels.
struct MemorizationSet {
  std::size_t count = 0;
  std::size_t seq_len = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // count x seq_len x dim
  std::vector<int> labels;     // +1 / -1

  std::span<const double> sequence(std::size_t i) const {
    return {values.data() + i * seq_len * dim, seq_len * dim};
  }
  // Mean over the sequence positions, length dim.
  std::vector<double> pooled(std::size_t i) const;
};

MemorizationSet gen_memorization_set(std::size_t count, std::size_t seq_len, std::size_t dim,
                                     std::uint64_t seed);

}  // namespace moelab::tasks
