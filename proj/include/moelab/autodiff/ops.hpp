#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "moelab/autodiff/tape.hpp"

namespace moelab::ad {

// Packed variable-length batch: sequence s occupies rows
// [offsets[s], offsets[s+1]) of every activation matrix.
struct SeqLayout {
  std::vector<std::size_t> offsets{0};

  static SeqLayout single(std::size_t length) { return SeqLayout{{0, length}}; }
  std::size_t num_sequences() const noexcept { return offsets.size() - 1; }
  std::size_t total_rows() const noexcept { return offsets.back(); }
  std::size_t length(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
  std::size_t max_length() const;
  void append(std::size_t length) { offsets.push_back(offsets.back() + length); }
};

// --- primitives ---------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a[m x n] + bias[n] broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, double factor);
Var relu(Var a);
Var softmax_rows(Var a);
Var transpose(Var a);
Var slice(Var a, std::size_t row_begin, std::size_t row_end, std::size_t col_begin,
          std::size_t col_end);
Var concat_cols(std::span<const Var> parts);
Var sum(Var a);
// Scalar sum_i weights[i] * a[i]; weights is a constant.
Var weighted_sum(Var a, const Tensor& weights);

// Mean negative log-likelihood of targets over positions where mask is set.
// Returns 0 (with zero gradient) when no position is masked in.
Var cross_entropy_masked(Var logits, std::span<const std::int32_t> targets,
                         std::span<const std::uint8_t> mask);

// --- transformer building blocks ----------------------------------------

// y = x / sqrt(mean(x^2) + eps) * gain, row-wise.
Var rms_norm(Var x, Var gain, double eps = 1e-6);
Var embedding(Var table, std::span<const std::int32_t> ids);
// Rotary position encoding on each head of x, positions restart at each
// sequence of the layout.
Var rope(Var x, const SeqLayout& layout, std::size_t heads, double base = 10000.0);
// softmax(q k^T / sqrt(d_head) + causal mask) v per sequence and head.
Var causal_attention(Var q, Var k, Var v, const SeqLayout& layout, std::size_t heads);

Var gather_rows(Var x, std::span<const std::size_t> rows);
// out[rows[p][i]] += parts[p][i]; out has `out_rows` rows.
Var scatter_add_rows(std::span<const Var> parts, std::span<const std::vector<std::size_t>> rows,
                     std::size_t out_rows);
// y[i, :] = s[i] * x[i, :] with s a column [n x 1].
Var scale_rows(Var x, Var s);
// Picks entries of x (flattened row-major) into an [n x 1] column.
Var gather_elems(Var x, std::span<const std::size_t> flat_index);

struct TopKGates {
  Var gates;                         // [rows x k], softmax over the selected logits
  std::vector<std::size_t> experts;  // [rows x k], descending logit, ties to lower index
};
TopKGates topk_softmax(Var logits, std::size_t k);

// Indices of the k largest entries of row, descending, ties to lower index.
std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k);

}  // namespace moelab::ad
