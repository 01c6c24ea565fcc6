#include "moelab/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "moelab/errors.hpp"

namespace moelab::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Stride = Eigen::OuterStride<>;
using StridedMap = Eigen::Map<RowMat, 0, Stride>;
using CStridedMap = Eigen::Map<const RowMat, 0, Stride>;

CMapMat view(const Tensor& t) { return CMapMat(t.data().data(), t.rows(), t.cols()); }
MapMat view(std::span<double> buf, std::size_t rows, std::size_t cols) {
  return MapMat(buf.data(), rows, cols);
}

Tensor make(std::size_t rows, std::size_t cols) { return Tensor::zeros({rows, cols}); }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
}

void accumulate(Tape& tape, std::size_t id, std::span<const double> g, double factor = 1.0) {
  if (!tape.requires_grad(id)) return;
  auto dst = tape.grad(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

std::size_t SeqLayout::max_length() const {
  std::size_t m = 0;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) m = std::max(m, length(s));
  return m;
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions of " + to_string(av.shape()) + " and " +
                         to_string(bv.shape()) + " disagree");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out = make(m, n);
  view(out.mutable_data(), m, n).noalias() = view(av) * view(bv);
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    auto g = CMapMat(t.grad(self).data(), m, n);
    if (t.requires_grad(ia)) {
      view(t.grad(ia), m, k).noalias() += g * view(t.value(ib)).transpose();
    }
    if (t.requires_grad(ib)) {
      view(t.grad(ib), k, n).noalias() += view(t.value(ia)).transpose() * g;
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  auto o = out.mutable_data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  auto o = out.mutable_data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g, -1.0);
  });
}

Var add_row(Var a, Var bias) {
  require_same_tape(a, bias);
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.value().size() != n) throw DimensionError("add_row: bias length must equal columns");
  Tensor out = a.value();
  view(out.mutable_data(), m, n).rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(bias.value().data().data(), n);
  std::size_t ia = a.id(), ib = bias.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib, m, n](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, g);
    if (t.requires_grad(ib)) {
      Eigen::Map<Eigen::RowVectorXd>(t.grad(ib).data(), n) +=
          CMapMat(g.data(), m, n).colwise().sum();
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.mutable_data()) v *= factor;
  std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    accumulate(t, ia, t.grad(self), factor);
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.mutable_data()) v = v > 0.0 ? v : 0.0;
  std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    auto g = t.grad(self);
    auto x = t.value(ia).data();
    auto dst = t.grad(ia);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (x[i] > 0.0) dst[i] += g[i];
    }
  });
}

Var softmax_rows(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (n == 0) throw DimensionError("softmax_rows: rows must be nonempty");
  Tensor out = a.value();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < m; ++r) {
    double* row = o.data() + r * n;
    double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (std::size_t c = 0; c < n; ++c) row[c] /= z;
  }
  std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, m, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    auto g = t.grad(self);
    auto y = t.value(self).data();
    auto dst = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) dst[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
    }
  });
}

Var transpose(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = make(n, m);
  view(out.mutable_data(), n, m) = view(a.value()).transpose();
  std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, m, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    view(t.grad(ia), m, n) += CMapMat(t.grad(self).data(), n, m).transpose();
  });
}

Var slice(Var a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  const std::size_t m = a.rows(), n = a.cols();
  if (r0 > r1 || r1 > m || c0 > c1 || c1 > n) throw IndexError("slice bounds out of range");
  const std::size_t rr = r1 - r0, cc = c1 - c0;
  Tensor out = make(rr, cc);
  view(out.mutable_data(), rr, cc) = view(a.value()).block(r0, c0, rr, cc);
  std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    view(t.grad(ia), m, n).block(r0, c0, rr, cc) += CMapMat(t.grad(self).data(), rr, cc);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    require_same_tape(parts[0], p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
    n += p.cols();
  }
  Tensor out = make(m, n);
  auto ov = view(out.mutable_data(), m, n);
  std::size_t c = 0;
  for (const auto& p : parts) {
    ov.block(0, c, m, p.cols()) = view(p.value());
    c += p.cols();
  }
  return parts[0].tape().record(std::move(out), ids, [ids, widths, m, n](Tape& t, std::size_t self) {
    auto g = CMapMat(t.grad(self).data(), m, n);
    std::size_t c = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (t.requires_grad(ids[p])) view(t.grad(ids[p]), m, widths[p]) += g.block(0, c, m, widths[p]);
      c += widths[p];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    double g = t.grad(self)[0];
    for (auto& d : t.grad(ia)) d += g;
  });
}

Var weighted_sum(Var a, const Tensor& weights) {
  if (weights.size() != a.value().size()) throw DimensionError("weighted_sum: size mismatch");
  double s = 0.0;
  auto x = a.value().data();
  auto w = weights.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
  std::size_t ia = a.id();
  std::vector<double> wcopy(w.begin(), w.end());
  return a.tape().record(Tensor::scalar(s), {ia}, [ia, wcopy](Tape& t, std::size_t self) {
    accumulate(t, ia, wcopy, t.grad(self)[0]);
  });
}

Var cross_entropy_masked(Var logits, std::span<const std::int32_t> targets,
                         std::span<const std::uint8_t> mask) {
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows || mask.size() != rows) {
    throw DimensionError("cross_entropy_masked: targets/mask length must equal logit rows");
  }
  auto x = logits.value().data();
  // Softmax rows of the masked positions, kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>();
  std::vector<std::size_t> used;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw IndexError("cross_entropy_masked: target id " + std::to_string(targets[r]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    const double* row = x.data() + r * vocab;
    double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    std::size_t base = probs->size();
    probs->resize(base + vocab);
    for (std::size_t c = 0; c < vocab; ++c) {
      double e = std::exp(row[c] - mx);
      (*probs)[base + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < vocab; ++c) (*probs)[base + c] /= z;
    total += std::log(z) + mx - row[targets[r]];
    used.push_back(r);
  }
  const double count = static_cast<double>(used.size());
  const double loss = used.empty() ? 0.0 : total / count;
  std::vector<std::int32_t> tcopy(targets.begin(), targets.end());
  std::size_t il = logits.id();
  return logits.tape().record(
      Tensor::scalar(loss), {il}, [il, probs, used, tcopy, vocab, count](Tape& t, std::size_t self) {
        if (!t.requires_grad(il) || used.empty()) return;
        double g = t.grad(self)[0] / count;
        auto dst = t.grad(il);
        for (std::size_t u = 0; u < used.size(); ++u) {
          std::size_t r = used[u];
          double* drow = dst.data() + r * vocab;
          const double* p = probs->data() + u * vocab;
          for (std::size_t c = 0; c < vocab; ++c) drow[c] += g * p[c];
          drow[tcopy[r]] -= g;
        }
      });
}

Var rms_norm(Var x, Var gain, double eps) {
  require_same_tape(x, gain);
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.value().size() != n) throw DimensionError("rms_norm: gain length must equal columns");
  auto xv = x.value().data();
  auto gv = gain.value().data();
  Tensor out = make(m, n);
  auto o = out.mutable_data();
  std::vector<double> inv(m);
  for (std::size_t r = 0; r < m; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < n; ++c) ss += xv[r * n + c] * xv[r * n + c];
    inv[r] = 1.0 / std::sqrt(ss / static_cast<double>(n) + eps);
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] = xv[r * n + c] * inv[r] * gv[c];
  }
  std::size_t ix = x.id(), ig = gain.id();
  return x.tape().record(std::move(out), {ix, ig}, [ix, ig, m, n, inv](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    auto xv = t.value(ix).data();
    auto gv = t.value(ig).data();
    if (t.requires_grad(ig)) {
      auto dg = t.grad(ig);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) dg[c] += g[r * n + c] * xv[r * n + c] * inv[r];
    }
    if (t.requires_grad(ix)) {
      auto dx = t.grad(ix);
      for (std::size_t r = 0; r < m; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * gv[c] * xv[r * n + c];
        double k = inv[r] * inv[r] * inv[r] * dot / static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
          dx[r * n + c] += inv[r] * g[r * n + c] * gv[c] - k * xv[r * n + c];
        }
      }
    }
  });
}

Var embedding(Var table, std::span<const std::int32_t> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  Tensor out = make(ids.size(), d);
  auto o = out.mutable_data();
  auto tv = table.value().data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.data() + ids[i] * d, d, o.data() + i * d);
  }
  std::vector<std::int32_t> idcopy(ids.begin(), ids.end());
  std::size_t it = table.id();
  return table.tape().record(std::move(out), {it}, [it, idcopy, d](Tape& t, std::size_t self) {
    if (!t.requires_grad(it)) return;
    auto g = t.grad(self);
    auto dst = t.grad(it);
    for (std::size_t i = 0; i < idcopy.size(); ++i) {
      double* row = dst.data() + idcopy[i] * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += g[i * d + c];
    }
  });
}

namespace {

// Applies the rotary map (sign = +1) or its inverse (sign = -1) in place.
void rotate(std::span<double> x, std::size_t d, const SeqLayout& layout, std::size_t heads,
            double base, double sign) {
  const std::size_t dh = d / heads;
  const std::size_t pairs = dh / 2;
  std::vector<double> freq(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
  }
  for (std::size_t s = 0; s < layout.num_sequences(); ++s) {
    for (std::size_t r = layout.offsets[s]; r < layout.offsets[s + 1]; ++r) {
      const double pos = static_cast<double>(r - layout.offsets[s]);
      for (std::size_t i = 0; i < pairs; ++i) {
        const double c = std::cos(pos * freq[i]);
        const double sn = sign * std::sin(pos * freq[i]);
        for (std::size_t h = 0; h < heads; ++h) {
          double* p = x.data() + r * d + h * dh + 2 * i;
          const double a = p[0], b = p[1];
          p[0] = a * c - b * sn;
          p[1] = a * sn + b * c;
        }
      }
    }
  }
}

}  // namespace

Var rope(Var x, const SeqLayout& layout, std::size_t heads, double base) {
  const std::size_t d = x.cols();
  if (x.rows() != layout.total_rows()) throw DimensionError("rope: layout does not cover rows");
  if (heads == 0 || d % heads != 0) throw DimensionError("rope: width not divisible by heads");
  Tensor out = x.value();
  rotate(out.mutable_data(), d, layout, heads, base, 1.0);
  std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, d, layout, heads, base](Tape& t, std::size_t self) {
    if (!t.requires_grad(ix)) return;
    std::vector<double> g(t.grad(self).begin(), t.grad(self).end());
    rotate(g, d, layout, heads, base, -1.0);
    accumulate(t, ix, g);
  });
}

Var causal_attention(Var q, Var k, Var v, const SeqLayout& layout, std::size_t heads) {
  require_same_tape(q, k);
  require_same_tape(q, v);
  require_same_shape(q, k, "causal_attention");
  require_same_shape(q, v, "causal_attention");
  const std::size_t d = q.cols();
  if (q.rows() != layout.total_rows()) throw DimensionError("causal_attention: layout mismatch");
  if (heads == 0 || d % heads != 0) throw DimensionError("causal_attention: width not divisible by heads");
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  // probabilities, one T x T block per (sequence, head)
  std::size_t pbytes = 0;
  for (std::size_t s = 0; s < layout.num_sequences(); ++s) pbytes += layout.length(s) * layout.length(s);
  auto probs = std::make_shared<std::vector<double>>(pbytes * heads, 0.0);

  Tensor out = make(q.rows(), d);
  const double* qp = q.value().data().data();
  const double* kp = k.value().data().data();
  const double* vp = v.value().data().data();
  double* op = out.mutable_data().data();
  std::size_t pofs = 0;
  for (std::size_t s = 0; s < layout.num_sequences(); ++s) {
    const std::size_t o = layout.offsets[s], T = layout.length(s);
    for (std::size_t h = 0; h < heads; ++h) {
      CStridedMap Q(qp + o * d + h * dh, T, dh, Stride(d));
      CStridedMap K(kp + o * d + h * dh, T, dh, Stride(d));
      CStridedMap V(vp + o * d + h * dh, T, dh, Stride(d));
      MapMat P(probs->data() + pofs, T, T);
      P.noalias() = sc * (Q * K.transpose());
      for (std::size_t i = 0; i < T; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, P(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          P(i, j) = std::exp(P(i, j) - mx);
          z += P(i, j);
        }
        for (std::size_t j = 0; j <= i; ++j) P(i, j) /= z;
        for (std::size_t j = i + 1; j < T; ++j) P(i, j) = 0.0;
      }
      StridedMap O(op + o * d + h * dh, T, dh, Stride(d));
      O.noalias() = P * V;
      pofs += T * T;
    }
  }

  std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(
      std::move(out), {iq, ik, iv}, [=](Tape& t, std::size_t self) {
        const double* g = t.grad(self).data();
        const double* qv = t.value(iq).data().data();
        const double* kv = t.value(ik).data().data();
        const double* vv = t.value(iv).data().data();
        double* dq = t.requires_grad(iq) ? t.grad(iq).data() : nullptr;
        double* dk = t.requires_grad(ik) ? t.grad(ik).data() : nullptr;
        double* dv = t.requires_grad(iv) ? t.grad(iv).data() : nullptr;
        RowMat dP, dS;
        std::size_t pofs = 0;
        for (std::size_t s = 0; s < layout.num_sequences(); ++s) {
          const std::size_t o = layout.offsets[s], T = layout.length(s);
          for (std::size_t h = 0; h < heads; ++h) {
            CStridedMap G(g + o * d + h * dh, T, dh, Stride(d));
            CStridedMap Q(qv + o * d + h * dh, T, dh, Stride(d));
            CStridedMap K(kv + o * d + h * dh, T, dh, Stride(d));
            CStridedMap V(vv + o * d + h * dh, T, dh, Stride(d));
            CMapMat P(probs->data() + pofs, T, T);
            if (dv) StridedMap(dv + o * d + h * dh, T, dh, Stride(d)).noalias() += P.transpose() * G;
            if (dq || dk) {
              dP.noalias() = G * V.transpose();
              dS.resize(T, T);
              for (std::size_t i = 0; i < T; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j <= i; ++j) dot += dP(i, j) * P(i, j);
                for (std::size_t j = 0; j <= i; ++j) dS(i, j) = sc * P(i, j) * (dP(i, j) - dot);
                for (std::size_t j = i + 1; j < T; ++j) dS(i, j) = 0.0;
              }
              if (dq) StridedMap(dq + o * d + h * dh, T, dh, Stride(d)).noalias() += dS * K;
              if (dk) StridedMap(dk + o * d + h * dh, T, dh, Stride(d)).noalias() += dS.transpose() * Q;
            }
            pofs += T * T;
          }
        }
      });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = make(rows.size(), n);
  auto o = out.mutable_data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) throw IndexError("gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[i] * n, n, o.data() + i * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, idx, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(ix)) return;
    auto g = t.grad(self);
    auto dst = t.grad(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < n; ++c) dst[idx[i] * n + c] += g[i * n + c];
    }
  });
}

Var scatter_add_rows(std::span<const Var> parts, std::span<const std::vector<std::size_t>> rows,
                     std::size_t out_rows) {
  if (parts.empty() || parts.size() != rows.size()) {
    throw ContractError("scatter_add_rows: need one row list per part");
  }
  const std::size_t n = parts[0].cols();
  Tensor out = make(out_rows, n);
  auto o = out.mutable_data();
  std::vector<std::size_t> ids;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    require_same_tape(parts[0], parts[p]);
    if (parts[p].cols() != n || parts[p].rows() != rows[p].size()) {
      throw DimensionError("scatter_add_rows: part shape does not match its rows");
    }
    auto src = parts[p].value().data();
    for (std::size_t i = 0; i < rows[p].size(); ++i) {
      if (rows[p][i] >= out_rows) throw IndexError("scatter_add_rows: row out of range");
      for (std::size_t c = 0; c < n; ++c) o[rows[p][i] * n + c] += src[i * n + c];
    }
    ids.push_back(parts[p].id());
  }
  std::vector<std::vector<std::size_t>> rcopy(rows.begin(), rows.end());
  return parts[0].tape().record(std::move(out), ids, [ids, rcopy, n](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!t.requires_grad(ids[p])) continue;
      auto dst = t.grad(ids[p]);
      for (std::size_t i = 0; i < rcopy[p].size(); ++i) {
        for (std::size_t c = 0; c < n; ++c) dst[i * n + c] += g[rcopy[p][i] * n + c];
      }
    }
  });
}

Var scale_rows(Var x, Var s) {
  require_same_tape(x, s);
  const std::size_t m = x.rows(), n = x.cols();
  if (s.value().size() != m) throw DimensionError("scale_rows: one scale per row required");
  Tensor out = x.value();
  auto o = out.mutable_data();
  auto sv = s.value().data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] *= sv[r];
  std::size_t ix = x.id(), is = s.id();
  return x.tape().record(std::move(out), {ix, is}, [ix, is, m, n](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    if (t.requires_grad(ix)) {
      auto sv = t.value(is).data();
      auto dx = t.grad(ix);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) dx[r * n + c] += g[r * n + c] * sv[r];
    }
    if (t.requires_grad(is)) {
      auto xv = t.value(ix).data();
      auto ds = t.grad(is);
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += g[r * n + c] * xv[r * n + c];
        ds[r] += acc;
      }
    }
  });
}

Var gather_elems(Var x, std::span<const std::size_t> flat_index) {
  Tensor out = make(flat_index.size(), 1);
  auto xv = x.value().data();
  for (std::size_t i = 0; i < flat_index.size(); ++i) {
    if (flat_index[i] >= xv.size()) throw IndexError("gather_elems: index out of range");
    out[i] = xv[flat_index[i]];
  }
  std::vector<std::size_t> idx(flat_index.begin(), flat_index.end());
  std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, idx](Tape& t, std::size_t self) {
    if (!t.requires_grad(ix)) return;
    auto g = t.grad(self);
    auto dst = t.grad(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] += g[i];
  });
}

std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k) {
  if (k == 0 || k > row.size()) throw ContractError("top-k needs 1 <= k <= row length");
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

TopKGates topk_softmax(Var logits, std::size_t k) {
  const std::size_t m = logits.rows(), e = logits.cols();
  if (k == 0 || k > e) throw ContractError("top_k must be in [1, experts]");
  auto lv = logits.value().data();
  TopKGates result;
  result.experts.resize(m * k);
  Tensor gates = make(m, k);
  auto gv = gates.mutable_data();
  for (std::size_t r = 0; r < m; ++r) {
    auto chosen = topk_indices(lv.subspan(r * e, e), k);
    const double mx = lv[r * e + chosen[0]];
    double z = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      result.experts[r * k + s] = chosen[s];
      gv[r * k + s] = std::exp(lv[r * e + chosen[s]] - mx);
      z += gv[r * k + s];
    }
    for (std::size_t s = 0; s < k; ++s) gv[r * k + s] /= z;
  }
  std::size_t il = logits.id();
  auto experts = result.experts;
  result.gates = logits.tape().record(std::move(gates), {il}, [il, experts, m, k, e](Tape& t, std::size_t self) {
    if (!t.requires_grad(il)) return;
    auto g = t.grad(self);
    auto y = t.value(self).data();
    auto dst = t.grad(il);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t s = 0; s < k; ++s) dot += g[r * k + s] * y[r * k + s];
      for (std::size_t s = 0; s < k; ++s) {
        dst[r * e + experts[r * k + s]] += y[r * k + s] * (g[r * k + s] - dot);
      }
    }
  });
  return result;
}

}  // namespace moelab::ad
