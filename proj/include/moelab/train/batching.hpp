#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moelab/autodiff/ops.hpp"
#include "moelab/tasks/sample.hpp"

namespace moelab::train {

// Next-token training batch. Sequences are packed back to back instead of
// padded: row r of the packed input predicts targets[r], and only rows with
// mask[r] set contribute to the loss.
struct Batch {
  std::vector<tasks::TokenId> inputs;
  std::vector<tasks::TokenId> targets;
  std::vector<std::uint8_t> mask;
  ad::SeqLayout layout;
  std::size_t masked() const;
};

Batch make_batch(std::span<const tasks::Sample> samples, std::span<const std::size_t> picks);
Batch make_batch(std::span<const tasks::Sample> samples);

}  // namespace moelab::train
