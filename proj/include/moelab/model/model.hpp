#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moelab/autodiff/ops.hpp"
#include "moelab/model/config.hpp"
#include "moelab/model/moe.hpp"
#include "moelab/tasks/vocab.hpp"

namespace moelab::model {

struct Param {
  std::string name;
  ad::Tensor value;
  bool embedding = false;  // token embedding / unembedding
  bool decay = true;       // weight decay applies
};

struct ForwardResult {
  ad::Var logits;                     // [rows x V]
  std::vector<RoutingTrace> traces;   // one per MoE layer
  ad::Var aux_loss;                   // weighted balance loss, invalid when disabled
};

// Pre-norm decoder-only transformer. Parameters live in a flat, named store
// in a fixed order so checkpoints and optimizers can address them by index.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::uint64_t init_seed() const noexcept { return seed_; }

  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;

  // Toggles requires_grad on every parameter.
  void set_trainable(bool trainable);

  // Element count of all non-embedding parameters actually stored.
  std::int64_t stored_nonembedding() const;

  // Runs every sequence of `layout` over the packed `tokens`.
  ForwardResult forward(ad::Tape& tape, std::span<const tasks::TokenId> tokens,
                        const ad::SeqLayout& layout);
  ForwardResult forward(ad::Tape& tape, std::span<const tasks::TokenId> tokens);

  void check_finite() const;

 private:
  std::size_t index_of(const std::string& name) const;
  void add(std::string name, ad::Shape shape, bool embedding, bool decay);

  ModelConfig config_;
  std::uint64_t seed_;
  std::vector<Param> params_;
};

}  // namespace moelab::model
