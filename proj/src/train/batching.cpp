#include "moelab/train/batching.hpp"

#include <algorithm>
#include <numeric>

#include "moelab/errors.hpp"

namespace moelab::train {

std::size_t Batch::masked() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Batch make_batch(std::span<const tasks::Sample> samples, std::span<const std::size_t> picks) {
  Batch b;
  for (auto i : picks) {
    if (i >= samples.size()) throw IndexError("batch index out of range");
    const auto& s = samples[i];
    if (s.tokens.size() < 2) throw ContractError("training samples need at least two tokens");
    const std::size_t n = s.tokens.size() - 1;
    b.inputs.insert(b.inputs.end(), s.tokens.begin(), s.tokens.end() - 1);
    b.targets.insert(b.targets.end(), s.tokens.begin() + 1, s.tokens.end());
    b.mask.insert(b.mask.end(), s.loss_mask.begin() + 1, s.loss_mask.end());
    b.layout.append(n);
  }
  return b;
}

Batch make_batch(std::span<const tasks::Sample> samples) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(samples, all);
}

}  // namespace moelab::train
