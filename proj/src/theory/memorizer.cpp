#include "moelab/theory/memorizer.hpp"

#include <algorithm>
#include <cmath>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::theory {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double MemorizerExpert::operator()(const VectorXd& x) const {
  return u.dot((w * x + b).cwiseMax(0.0));
}

std::int64_t MemorizerExpert::param_count() const {
  const std::int64_t q = width();
  return q * (w.cols() - skip) + 2 * q;
}

double MemorizerMoE::output_pooled(const VectorXd& pooled) const {
  const std::size_t j = router.route({pooled.data(), static_cast<std::size_t>(pooled.size())});
  return experts[j](pooled);
}

double MemorizerMoE::output(std::span<const double> sequence, std::size_t seq_len) const {
  const auto m = static_cast<std::size_t>(router.dim);
  if (seq_len == 0 || sequence.size() != seq_len * m) throw DimensionError("sequence shape mismatch");
  VectorXd pooled = VectorXd::Zero(router.dim);
  for (std::size_t t = 0; t < seq_len; ++t) {
    pooled += Eigen::Map<const VectorXd>(sequence.data() + t * m, router.dim);
  }
  return output_pooled(pooled / static_cast<double>(seq_len));
}

MemorizerParams memorizer_params(const MemorizerMoE& model) {
  MemorizerParams p;
  p.router = static_cast<std::int64_t>(model.router.vectors.size());
  p.total = p.router;
  for (const auto& e : model.experts) {
    p.total += e.param_count();
    p.largest_expert = std::max(p.largest_expert, e.param_count());
  }
  p.active = p.router + p.largest_expert;
  return p;
}

int memorizer_width_bound(std::size_t n, int m, int experts) {
  const int bits = log2_exact(experts);
  if (m - bits < 2) throw ContractError("dimension too small for the width bound");
  const double l = std::log(static_cast<double>(m - bits));
  return static_cast<int>(std::ceil(8.0 * static_cast<double>(n) * std::pow(l, 4) / (static_cast<double>(m) * experts)));
}

namespace {

struct Fit {
  MatrixXd w;  // q x m'
  VectorXd b, u;
  double min_margin = 0.0;
};

double min_margin(const MatrixXd& x, const VectorXd& y, const Fit& f) {
  MatrixXd h = ((x * f.w.transpose()).rowwise() + f.b.transpose()).cwiseMax(0.0);
  return (y.array() * (h * f.u).array()).minCoeff();
}

// Random ReLU features with a ridge least-squares output layer, then
// full-batch Adam on the squared hinge loss over every weight.
Fit fit_expert(const MatrixXd& x, const VectorXd& y, int q, Rng& rng, const MemorizerOptions& opt) {
  const auto s = x.rows(), m = x.cols();
  Fit f;
  f.w.resize(q, m);
  for (Eigen::Index i = 0; i < f.w.size(); ++i) f.w.data()[i] = rng.normal() / std::sqrt(static_cast<double>(m));
  f.b.resize(q);
  MatrixXd proj = x * f.w.transpose();
  for (int k = 0; k < q; ++k) {
    std::vector<double> col(proj.col(k).data(), proj.col(k).data() + s);
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(s / 2), col.end());
    f.b(k) = 0.1 - col[static_cast<std::size_t>(s / 2)];
  }
  MatrixXd h = (proj.rowwise() + f.b.transpose()).cwiseMax(0.0);
  MatrixXd gram = h.transpose() * h;
  const double ridge = 1e-8 * (gram.trace() / q + 1.0);
  gram.diagonal().array() += ridge;
  f.u = gram.ldlt().solve(h.transpose() * y);
  f.min_margin = min_margin(x, y, f);
  if (f.min_margin >= opt.target_margin) return f;

  const double lr = opt.learning_rate, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  MatrixXd mw = MatrixXd::Zero(q, m), vw = MatrixXd::Zero(q, m);
  VectorXd mb = VectorXd::Zero(q), vb = VectorXd::Zero(q), mu = VectorXd::Zero(q), vu = VectorXd::Zero(q);
  auto adam = [&](auto& param, auto& m1, auto& m2, const auto& g, int t) {
    m1 = b1 * m1 + (1.0 - b1) * g;
    m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
  };
  for (int t = 1; t <= opt.max_iterations; ++t) {
    MatrixXd z = (x * f.w.transpose()).rowwise() + f.b.transpose();
    MatrixXd hz = z.cwiseMax(0.0);
    VectorXd out = hz * f.u;
    ArrayXd margin = y.array() * out.array();
    if (t % 10 == 1 && margin.minCoeff() >= opt.target_margin) break;
    VectorXd g = (-2.0 / static_cast<double>(s)) * (y.array() * (1.0 - margin).cwiseMax(0.0)).matrix();
    VectorXd gu = hz.transpose() * g;
    MatrixXd gz = (g * f.u.transpose()).cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    MatrixXd gw = gz.transpose() * x;
    VectorXd gb = gz.colwise().sum().transpose();
    adam(f.w, mw, vw, gw, t);
    adam(f.b, mb, vb, gb, t);
    adam(f.u, mu, vu, gu, t);
  }
  f.min_margin = min_margin(x, y, f);
  return f;
}

}  // namespace

MemorizerMoE build_moe_memorizer(const tasks::MemorizationSet& data, int experts, int max_width,
                                 const MemorizerOptions& options) {
  if (max_width < 1) throw ContractError("expert width must be at least 1");
  if (data.count == 0) throw ContractError("memorization set is empty");
  const int m = static_cast<int>(data.dim);
  MemorizerMoE model;
  model.router = SignRouter::make(experts, m);
  const int skip = model.router.sign_bits();
  if (m - skip < 1) throw ContractError("no coordinates left for the experts");

  std::vector<std::vector<std::size_t>> routed(static_cast<std::size_t>(experts));
  std::vector<VectorXd> pooled(data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    auto p = data.pooled(i);
    pooled[i] = Eigen::Map<const VectorXd>(p.data(), m);
    routed[model.router.route(p)].push_back(i);
  }

  for (int j = 0; j < experts; ++j) {
    const auto& idx = routed[static_cast<std::size_t>(j)];
    MemorizerExpert e;
    e.skip = skip;
    if (idx.empty()) {
      e.w = MatrixXd::Zero(1, m);
      e.b = VectorXd::Zero(1);
      e.u = VectorXd::Zero(1);
      model.experts.push_back(std::move(e));
      continue;
    }
    MatrixXd x(static_cast<Eigen::Index>(idx.size()), m - skip);
    VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = pooled[idx[r]].tail(m - skip).transpose();
      y(static_cast<Eigen::Index>(r)) = data.labels[idx[r]];
    }
    bool done = false;
    int attempt = 0;
    for (int q = std::min(options.initial_width, max_width); !done; q = std::min(2 * q, max_width)) {
      Fit f;
      for (int r = 0; r < std::max(1, options.restarts) && !(f.min_margin > 1e-9); ++r, ++attempt) {
        Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(j) * 1024 + static_cast<std::uint64_t>(attempt)));
        f = fit_expert(x, y, q, rng, options);
      }
      if (f.min_margin > 1e-9) {
        e.w = MatrixXd::Zero(q, m);
        e.w.rightCols(m - skip) = f.w;
        e.b = f.b;
        e.u = f.u;
        done = true;
      } else if (q == max_width) {
        throw FitError(static_cast<std::size_t>(j), idx.size(),
                       "expert " + std::to_string(j) + " cannot separate its " + std::to_string(idx.size()) +
                           " points at width " + std::to_string(max_width));
      }
    }
    model.experts.push_back(std::move(e));
  }

  if (!check_memorizer(model, data).all_correct()) {
    throw FitError(0, data.count, "memorizer postcondition failed");
  }
  return model;
}

MemorizerCheck check_memorizer(const MemorizerMoE& model, const tasks::MemorizationSet& data) {
  MemorizerCheck c;
  c.points = data.count;
  for (std::size_t i = 0; i < data.count; ++i) {
    const double f = model.output(data.sequence(i), data.seq_len);
    const int sign = f > 0.0 ? 1 : (f < 0.0 ? -1 : 0);
    if (sign == data.labels[i]) {
      ++c.correct;
    } else {
      c.wrong.push_back(i);
    }
  }
  return c;
}

}  // namespace moelab::theory
