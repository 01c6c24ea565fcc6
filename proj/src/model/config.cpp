#include "moelab/model/config.hpp"

#include <algorithm>

#include "moelab/errors.hpp"

namespace moelab::model {

std::string to_string(Arch arch) { return arch == Arch::dense ? "dense" : "moe"; }

Arch arch_from_string(const std::string& name) {
  if (name == "dense") return Arch::dense;
  if (name == "moe") return Arch::moe;
  throw ContractError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("invalid model config: " + what); };
  if (width < 1 || depth < 1 || heads < 1) fail("width, depth and heads must be positive");
  if (experts < 1 || top_k < 1) fail("experts and top_k must be positive");
  if (vocab_size < 1 || max_seq_len < 1) fail("vocab_size and max_seq_len must be positive");
  if (width % heads != 0) fail("width must be divisible by heads");
  if (top_k > experts) fail("top_k must not exceed experts");
  if (arch == Arch::dense && (experts != 1 || top_k != 1)) fail("dense models have one expert and top_k 1");
  if (ffn_intermediate < 0) fail("ffn_intermediate must be nonnegative");
  if (!(aux_load_loss_weight >= 0.0)) fail("aux_load_loss_weight must be nonnegative");
}

int ModelConfig::default_heads(int width) { return std::max(1, width / 64); }

ModelConfig ModelConfig::dense(int width, int depth, int vocab, int max_seq_len) {
  ModelConfig c;
  c.arch = Arch::dense;
  c.width = width;
  c.depth = depth;
  c.heads = default_heads(width);
  c.vocab_size = vocab;
  c.max_seq_len = max_seq_len;
  return c;
}

ModelConfig ModelConfig::moe(int width, int depth, int experts, int top_k, int vocab, int max_seq_len) {
  ModelConfig c = dense(width, depth, vocab, max_seq_len);
  c.arch = Arch::moe;
  c.experts = experts;
  c.top_k = top_k;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"arch", to_string(c.arch)},
                     {"width", c.width},
                     {"depth", c.depth},
                     {"heads", c.heads},
                     {"experts", c.experts},
                     {"top_k", c.top_k},
                     {"vocab_size", c.vocab_size},
                     {"max_seq_len", c.max_seq_len},
                     {"ffn_intermediate", c.ffn_intermediate},
                     {"aux_load_loss_weight", c.aux_load_loss_weight},
                     {"ffn_bias", c.ffn_bias}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.arch = arch_from_string(j.value("arch", std::string("dense")));
  c.width = j.value("width", c.width);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", ModelConfig::default_heads(c.width));
  c.experts = j.value("experts", c.arch == Arch::dense ? 1 : 8);
  c.top_k = j.value("top_k", c.arch == Arch::dense ? 1 : 2);
  c.vocab_size = j.value("vocab_size", 0);
  c.max_seq_len = j.value("max_seq_len", 0);
  c.ffn_intermediate = j.value("ffn_intermediate", 0);
  c.aux_load_loss_weight = j.value("aux_load_loss_weight", 0.0);
  c.ffn_bias = j.value("ffn_bias", false);
}

ParamCounts count_params(const ModelConfig& c) {
  c.validate();
  const std::int64_t d = c.width, f = c.intermediate();
  const std::int64_t attention = 4 * d * d;
  const std::int64_t norms = 2 * d;
  const std::int64_t expert = 2 * d * f + (c.ffn_bias ? f + d : 0);
  std::int64_t total_layer = attention + norms, active_layer = attention + norms;
  if (c.arch == Arch::dense) {
    total_layer += expert;
    active_layer += expert;
  } else {
    const std::int64_t router = d * c.experts;
    total_layer += router + c.experts * expert;
    active_layer += router + c.top_k * expert;
  }
  return {c.depth * total_layer + d, c.depth * active_layer + d};
}

}  // namespace moelab::model
