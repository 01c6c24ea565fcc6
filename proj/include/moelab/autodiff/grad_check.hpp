#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "moelab/autodiff/tape.hpp"

namespace moelab::ad {

// A function built from taped ops, evaluated on a fresh tape each call.
using TapedFn = std::function<Var(Tape&, Var)>;

struct GradCheckOptions {
  double step = 1e-6;
  // Errors are |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
  double abs_floor = 1e-3;
  // Input entries closer than this to 0 are pushed out to +/- margin before
  // checking, so ReLU-style kinks are not straddled.
  double kink_margin = 0.0;
  // check_param_gradients only: when an entry is off, compare the one-sided
  // slopes; if they disagree by more than kink_slope_tol (relative), a kink
  // lies within one step and the step is divided by 10, up to this many times.
  int kink_retries = 0;
  double kink_slope_tol = 1e-3;
};

struct GradMismatch {
  std::size_t output = 0;
  std::size_t input = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  std::size_t entries_checked = 0;
  std::size_t kink_refinements = 0;
  std::vector<GradMismatch> failures;  // first few entries above tolerance
  bool passed() const noexcept { return max_rel_err <= tolerance; }
};

// Compares the full Jacobian of f at x from backward() against central
// finite differences.
GradCheckReport grad_check(const TapedFn& f, const Tensor& x, double tol,
                           const GradCheckOptions& options = {});

// Gradient check of a scalar loss with respect to chosen parameter entries.
// `loss` must watch the parameters it uses on the tape it is given.
struct ParamEntry {
  Tensor* param = nullptr;
  std::size_t index = 0;
};
GradCheckReport check_param_gradients(const std::function<Var(Tape&)>& loss,
                                      std::span<Tensor* const> params,
                                      std::span<const ParamEntry> entries, double tol,
                                      const GradCheckOptions& options = {});

Tensor away_from_kinks(const Tensor& x, double margin);

}  // namespace moelab::ad
