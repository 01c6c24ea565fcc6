#include "moelab/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "moelab/autodiff/ops.hpp"
#include "moelab/errors.hpp"

namespace moelab::ad {

namespace {

constexpr std::size_t kMaxReported = 16;

double rel_error(double a, double n, double floor) {
  double denom = std::max({std::abs(a), std::abs(n), floor});
  return std::abs(a - n) / denom;
}

std::vector<double> evaluate(const TapedFn& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  return std::vector<double>(out.value().data().begin(), out.value().data().end());
}

void note(GradCheckReport& report, GradMismatch m) {
  report.max_rel_err = std::max(report.max_rel_err, m.rel_err);
  ++report.entries_checked;
  if (m.rel_err > report.tolerance && report.failures.size() < kMaxReported) {
    report.failures.push_back(m);
  }
}

}  // namespace

Tensor away_from_kinks(const Tensor& x, double margin) {
  Tensor out = x;
  out.clear_grad();
  for (auto& v : out.mutable_data()) {
    if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;
  }
  return out;
}

GradCheckReport grad_check(const TapedFn& f, const Tensor& x0, double tol,
                           const GradCheckOptions& options) {
  Tensor x = options.kink_margin > 0.0 ? away_from_kinks(x0, options.kink_margin) : x0;
  x.clear_grad();
  const std::size_t outputs = evaluate(f, x).size();
  const std::size_t inputs = x.size();

  // analytic Jacobian, one reverse sweep per output component
  std::vector<double> jac(outputs * inputs, 0.0);
  for (std::size_t o = 0; o < outputs; ++o) {
    Tensor leaf = x;
    leaf.set_requires_grad(true);
    Tape tape;
    Var y = f(tape, tape.watch(leaf));
    Tensor pick = Tensor::zeros(y.shape());
    pick[o] = 1.0;
    tape.backward(weighted_sum(y, pick));
    if (leaf.has_grad()) {
      auto g = leaf.grad();
      std::copy(g.begin(), g.end(), jac.begin() + static_cast<std::ptrdiff_t>(o * inputs));
    }
  }

  GradCheckReport report;
  report.tolerance = tol;
  const double h = options.step;
  for (std::size_t i = 0; i < inputs; ++i) {
    Tensor plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    auto fp = evaluate(f, plus);
    auto fm = evaluate(f, minus);
    for (std::size_t o = 0; o < outputs; ++o) {
      double numeric = (fp[o] - fm[o]) / (2.0 * h);
      double analytic = jac[o * inputs + i];
      note(report, {o, i, analytic, numeric, rel_error(analytic, numeric, options.abs_floor)});
    }
  }
  return report;
}

GradCheckReport check_param_gradients(const std::function<Var(Tape&)>& loss,
                                      std::span<Tensor* const> params,
                                      std::span<const ParamEntry> entries, double tol,
                                      const GradCheckOptions& options) {
  for (Tensor* p : params) {
    p->set_requires_grad(true);
    p->ensure_grad();
    p->zero_grad();
  }
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto scalar_loss = [&]() {
    Tape tape;
    Var l = loss(tape);
    return l.value().item();
  };
  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    Tensor& p = *entries[e].param;
    const std::size_t i = entries[e].index;
    if (i >= p.size()) throw IndexError("check_param_gradients: entry out of range");
    const double saved = p[i];
    const double analytic = p.grad()[i];
    double h = options.step;
    double numeric = 0.0, err = 0.0;
    for (int attempt = 0;; ++attempt) {
      p[i] = saved + h;
      const double up = scalar_loss();
      p[i] = saved - h;
      const double down = scalar_loss();
      p[i] = saved;
      numeric = (up - down) / (2.0 * h);
      err = rel_error(analytic, numeric, options.abs_floor);
      if (err <= tol || attempt >= options.kink_retries) break;
      const double mid = scalar_loss();
      const double right = (up - mid) / h, left = (mid - down) / h;
      if (rel_error(right, left, options.abs_floor) <= options.kink_slope_tol) break;
      h /= 10.0;
      ++report.kink_refinements;
    }
    note(report, {0, e, analytic, numeric, err});
  }
  return report;
}

}  // namespace moelab::ad
