#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "moelab/tasks/vocab.hpp"

namespace moelab::tasks {

// Token sequence with a per-token loss mask. loss_mask[j] means "predicting
// token j is penalised". [answer_begin, answer_end) is the reference
// completion (ending with <EOS>); everything before it is the prompt.
struct Sample {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::size_t answer_begin = 0;
  std::size_t answer_end = 0;
  nlohmann::json meta = nlohmann::json::object();

  std::span<const TokenId> prompt() const { return {tokens.data(), answer_begin}; }
  std::span<const TokenId> answer() const {
    return {tokens.data() + answer_begin, answer_end - answer_begin};
  }
  // Throws ContractError when the mask/span invariants are broken.
  void validate() const;
};

}  // namespace moelab::tasks
