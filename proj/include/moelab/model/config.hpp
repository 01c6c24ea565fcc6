#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace moelab::model {

enum class Arch { dense, moe };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& name);

struct ModelConfig {
  Arch arch = Arch::dense;
  int width = 32;
  int depth = 2;
  int heads = 1;
  int experts = 1;  // 1 for dense
  int top_k = 1;
  int vocab_size = 0;
  int max_seq_len = 0;
  int ffn_intermediate = 0;  // 0 selects `width`
  double aux_load_loss_weight = 0.0;
  bool ffn_bias = false;

  int intermediate() const noexcept { return ffn_intermediate > 0 ? ffn_intermediate : width; }
  // Throws ContractError describing the first broken invariant.
  void validate() const;

  static int default_heads(int width);
  static ModelConfig dense(int width, int depth, int vocab, int max_seq_len);
  static ModelConfig moe(int width, int depth, int experts, int top_k, int vocab, int max_seq_len);
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Non-embedding parameter totals. Token embedding and unembedding are
// excluded; norms, attention, router and experts are included. "active"
// counts only top_k experts per MoE layer.
struct ParamCounts {
  std::int64_t total_nonembedding = 0;
  std::int64_t active_nonembedding = 0;
};
ParamCounts count_params(const ModelConfig& config);

}  // namespace moelab::model
