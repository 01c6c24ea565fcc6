#pragma once

#include <vector>

#include "moelab/autodiff/tensor.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::testing {

inline ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.normal() * scale;
  return ad::Tensor(std::move(shape), std::move(v));
}

}  // namespace moelab::testing

#include "moelab/autodiff/grad_check.hpp"
#include "moelab/model/model.hpp"
#include "moelab/train/batching.hpp"
#include "moelab/train/trainer.hpp"

namespace moelab::testing {

// ReLU units of a random model sit arbitrarily close to 0 now and then.
inline ad::GradCheckOptions model_check_options() {
  ad::GradCheckOptions o;
  o.kink_retries = 2;
  return o;
}

// Finite-difference check of the full training loss of a small model with
// respect to every parameter entry (or a strided subset when `stride` > 1).
inline ad::GradCheckReport model_grad_check(const model::ModelConfig& cfg, std::uint64_t seed, double tol,
                                            std::size_t stride = 1, ad::GradCheckOptions opts = model_check_options()) {
  model::Model m(cfg, seed);
  // break the unit norm gains and zero biases so their gradients are generic
  Rng rng(mix_seed(seed, 99));
  for (auto& p : m.params()) {
    if (p.name.find("norm") != std::string::npos || p.name.find(".b") != std::string::npos) {
      for (auto& v : p.value.mutable_data()) v += 0.3 * rng.normal();
    }
  }
  std::vector<tasks::Sample> samples;
  for (int s = 0; s < 2; ++s) {
    tasks::Sample smp;
    const std::size_t len = static_cast<std::size_t>(cfg.max_seq_len) - static_cast<std::size_t>(s);
    for (std::size_t t = 0; t < len; ++t) {
      smp.tokens.push_back(static_cast<tasks::TokenId>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size))));
      smp.loss_mask.push_back(t > 0 ? 1 : 0);
    }
    smp.answer_begin = 1;
    smp.answer_end = len;
    samples.push_back(smp);
  }
  std::vector<std::size_t> picks{0, 1};
  const train::Batch batch = train::make_batch(samples, picks);
  std::vector<ad::Tensor*> params;
  std::vector<ad::ParamEntry> entries;
  for (auto& p : m.params()) {
    params.push_back(&p.value);
    for (std::size_t i = 0; i < p.value.size(); i += stride) entries.push_back({&p.value, i});
  }
  return ad::check_param_gradients([&](ad::Tape& tape) { return train::batch_loss(m, tape, batch).loss; }, params,
                                   entries, tol, opts);
}

}  // namespace moelab::testing

#include "moelab/autodiff/ops.hpp"

namespace moelab::testing {

// One taped function per primitive (and per differentiable argument), all
// taking the same {4, 6} input.
struct PrimitiveCases {
  ad::Tensor x, other, right, bias, w, left;
  std::vector<std::int32_t> targets{0, 5, 2, 3};
  std::vector<std::uint8_t> mask{1, 0, 1, 1};
  ad::SeqLayout layout;
  std::vector<std::size_t> pick{3, 0, 3};
  std::vector<std::size_t> elems{0, 7, 23};
  std::vector<std::pair<const char*, ad::TapedFn>> fns;

  explicit PrimitiveCases(std::uint64_t seed)
      : x(random_tensor({4, 6}, seed)),
        other(random_tensor({4, 6}, seed + 100)),
        right(random_tensor({6, 3}, seed + 200)),
        bias(random_tensor({6}, seed + 300)),
        w(random_tensor({4, 6}, seed + 400)),
        left(random_tensor({3, 4}, seed + 500)) {
    using namespace ad;
    layout.append(1);
    layout.append(3);
    fns = {
        {"matmul", [this](Tape& t, Var a) { return matmul(a, t.constant(right)); }},
        {"matmul_left", [this](Tape& t, Var a) { return matmul(t.constant(left), a); }},
        {"add", [this](Tape& t, Var a) { return add(a, t.constant(other)); }},
        {"sub", [this](Tape& t, Var a) { return sub(t.constant(other), a); }},
        {"add_row", [this](Tape& t, Var a) { return add_row(a, t.constant(bias)); }},
        {"add_row_bias", [this](Tape& t, Var a) { return add_row(t.constant(other), slice(a, 0, 1, 0, 6)); }},
        {"scale", [](Tape&, Var a) { return scale(a, -1.7); }},
        {"relu", [](Tape&, Var a) { return relu(a); }},
        {"softmax_rows", [](Tape&, Var a) { return softmax_rows(a); }},
        {"transpose", [](Tape&, Var a) { return transpose(a); }},
        {"slice", [](Tape&, Var a) { return slice(a, 1, 3, 2, 5); }},
        {"concat_cols", [this](Tape& t, Var a) { std::vector<Var> p{a, t.constant(other), a}; return concat_cols(p); }},
        {"sum", [](Tape&, Var a) { return sum(a); }},
        {"weighted_sum", [this](Tape&, Var a) { return weighted_sum(a, w); }},
        {"cross_entropy_masked", [this](Tape&, Var a) { return cross_entropy_masked(a, targets, mask); }},
        {"rms_norm", [this](Tape& t, Var a) { return rms_norm(a, t.constant(bias)); }},
        {"rms_norm_gain", [this](Tape& t, Var a) { return rms_norm(t.constant(other), slice(a, 0, 1, 0, 6)); }},
        {"embedding", [](Tape&, Var a) { std::vector<std::int32_t> ids{3, 1, 3}; return embedding(a, ids); }},
        {"rope", [this](Tape&, Var a) { return rope(slice(a, 0, 4, 0, 4), layout, 2); }},
        {"causal_attention_q", [this](Tape& t, Var a) { return causal_attention(a, t.constant(other), t.constant(w), layout, 2); }},
        {"causal_attention_k", [this](Tape& t, Var a) { return causal_attention(t.constant(other), a, t.constant(w), layout, 3); }},
        {"causal_attention_v", [this](Tape& t, Var a) { return causal_attention(t.constant(other), t.constant(w), a, layout, 1); }},
        {"gather_rows", [this](Tape&, Var a) { return gather_rows(a, pick); }},
        {"scatter_add_rows", [this](Tape& t, Var a) {
           std::vector<Var> parts{slice(a, 0, 2, 0, 6), t.constant(other)};
           std::vector<std::vector<std::size_t>> rows{{4, 1}, {0, 1, 2, 3}};
           return scatter_add_rows(parts, rows, 5);
         }},
        {"scale_rows_x", [](Tape& t, Var a) { return scale_rows(a, t.constant(Tensor({4, 1}, {0.5, -1.0, 2.0, 0.1}))); }},
        {"scale_rows_s", [this](Tape& t, Var a) { return scale_rows(t.constant(other), slice(a, 0, 4, 1, 2)); }},
        {"gather_elems", [this](Tape&, Var a) { return gather_elems(a, elems); }},
        {"topk_softmax", [](Tape&, Var a) { return topk_softmax(a, 2).gates; }},
    };
  }
  PrimitiveCases(const PrimitiveCases&) = delete;
  PrimitiveCases& operator=(const PrimitiveCases&) = delete;
};

}  // namespace moelab::testing
