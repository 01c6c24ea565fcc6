#include "moelab/model/model.hpp"

#include <cmath>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

std::string layer_name(int layer, const std::string& leaf) {
  return "layer" + std::to_string(layer) + "." + leaf;
}

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (auto& v : t.mutable_data()) v = rng.normal() * stddev;
}

}  // namespace

void Model::add(std::string name, Shape shape, bool embedding, bool decay) {
  params_.push_back({std::move(name), Tensor::zeros(std::move(shape)), embedding, decay});
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(config), seed_(init_seed) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.width);
  const auto f = static_cast<std::size_t>(config_.intermediate());
  const auto V = static_cast<std::size_t>(config_.vocab_size);
  const bool bias = config_.ffn_bias;

  add("embed", {V, d}, true, true);
  for (int l = 0; l < config_.depth; ++l) {
    add(layer_name(l, "attn_norm"), {d}, false, false);
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(layer_name(l, w), {d, d}, false, true);
    add(layer_name(l, "ffn_norm"), {d}, false, false);
    auto add_expert = [&](const std::string& prefix) {
      add(layer_name(l, prefix + ".w1"), {d, f}, false, true);
      add(layer_name(l, prefix + ".w2"), {f, d}, false, true);
      if (bias) {
        add(layer_name(l, prefix + ".b1"), {f}, false, false);
        add(layer_name(l, prefix + ".b2"), {d}, false, false);
      }
    };
    if (config_.arch == Arch::dense) {
      add_expert("ffn");
    } else {
      add(layer_name(l, "router"), {d, static_cast<std::size_t>(config_.experts)}, false, true);
      for (int j = 0; j < config_.experts; ++j) add_expert("expert" + std::to_string(j));
    }
  }
  add("final_norm", {d}, false, false);
  add("unembed", {d, V}, true, true);

  Rng rng(init_seed);
  const double residual = 1.0 / std::sqrt(2.0 * config_.depth);
  for (auto& p : params_) {
    const auto& n = p.name;
    auto ends_with = [&](const std::string& s) {
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("norm")) {
      for (auto& v : p.value.mutable_data()) v = 1.0;
    } else if (ends_with(".b1") || ends_with(".b2")) {
      // zero
    } else if (n == "embed") {
      fill_normal(p.value, rng, 1.0);
    } else {
      const double fan_in = static_cast<double>(p.value.shape()[0]);
      double sd = 1.0 / std::sqrt(fan_in);
      if (ends_with("wo") || ends_with(".w2")) sd *= residual;
      fill_normal(p.value, rng, sd);
    }
  }
}

std::size_t Model::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw IndexError("no parameter named " + name);
}

Param& Model::param(const std::string& name) { return params_[index_of(name)]; }
const Param& Model::param(const std::string& name) const { return params_[index_of(name)]; }

void Model::set_trainable(bool trainable) {
  for (auto& p : params_) {
    p.value.set_requires_grad(trainable);
    if (!trainable) p.value.clear_grad();
  }
}

std::int64_t Model::stored_nonembedding() const {
  std::int64_t n = 0;
  for (const auto& p : params_) {
    if (!p.embedding) n += static_cast<std::int64_t>(p.value.size());
  }
  return n;
}

void Model::check_finite() const {
  for (const auto& p : params_) p.value.check_finite(p.name);
}

ForwardResult Model::forward(ad::Tape& tape, std::span<const tasks::TokenId> tokens) {
  return forward(tape, tokens, ad::SeqLayout::single(tokens.size()));
}

ForwardResult Model::forward(ad::Tape& tape, std::span<const tasks::TokenId> tokens,
                             const ad::SeqLayout& layout) {
  if (tokens.empty()) throw ContractError("forward needs at least one token");
  if (layout.total_rows() != tokens.size()) throw DimensionError("layout does not cover the token list");
  if (layout.max_length() > static_cast<std::size_t>(config_.max_seq_len)) {
    throw ContractError("sequence length " + std::to_string(layout.max_length()) + " exceeds max_seq_len " +
                        std::to_string(config_.max_seq_len));
  }
  for (auto t : tokens) {
    if (t < 0 || t >= config_.vocab_size) throw IndexError("token id " + std::to_string(t) + " outside vocabulary");
  }

  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (auto& p : params_) vars.push_back(tape.watch(p.value));
  std::size_t cursor = 0;
  auto next = [&]() { return vars[cursor++]; };

  const auto heads = static_cast<std::size_t>(config_.heads);
  const bool bias = config_.ffn_bias;
  auto read_expert = [&]() {
    ExpertWeights w;
    w.w1 = next();
    w.w2 = next();
    if (bias) {
      w.b1 = next();
      w.b2 = next();
    }
    return w;
  };

  ForwardResult result;
  Var x = ad::embedding(next(), tokens);
  for (int l = 0; l < config_.depth; ++l) {
    Var attn_norm = next();
    Var wq = next(), wk = next(), wv = next(), wo = next();
    Var h = ad::rms_norm(x, attn_norm);
    Var q = ad::rope(ad::matmul(h, wq), layout, heads);
    Var k = ad::rope(ad::matmul(h, wk), layout, heads);
    Var v = ad::matmul(h, wv);
    x = ad::add(x, ad::matmul(ad::causal_attention(q, k, v, layout, heads), wo));

    Var ffn_norm = next();
    Var u = ad::rms_norm(x, ffn_norm);
    if (config_.arch == Arch::dense) {
      x = ad::add(x, expert_ffn(u, read_expert()));
    } else {
      Var router = next();
      std::vector<ExpertWeights> experts;
      for (int j = 0; j < config_.experts; ++j) experts.push_back(read_expert());
      MoeOutput moe = moe_ffn(u, router, experts, static_cast<std::size_t>(config_.top_k));
      x = ad::add(x, moe.y);
      if (config_.aux_load_loss_weight > 0.0) {
        Var aux = ad::scale(load_balance_loss(moe), config_.aux_load_loss_weight);
        result.aux_loss = result.aux_loss.valid() ? ad::add(result.aux_loss, aux) : aux;
      }
      result.traces.push_back(std::move(moe.trace));
    }
  }
  Var final_norm = next();
  Var unembed = next();
  result.logits = ad::matmul(ad::rms_norm(x, final_norm), unembed);
  return result;
}

}  // namespace moelab::model
