#pragma once

// Central finite-difference verification of tape gradients. The function
// under test builds a scalar loss on the tape it is given; it is re-run in
// forward-only mode for every probe.

#include <string>
#include <vector>

#include "kgf/ops.hpp"

namespace kgf {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int64_t n_checked = 0;
  bool pass = true;
  std::string note;
};

// rel = |analytic - numeric| / max(floor, |analytic|, |numeric|)
inline double relative_error(double analytic, double numeric, double floor_abs) {
  double denom = std::max(floor_abs, std::max(std::fabs(analytic), std::fabs(numeric)));
  return std::fabs(analytic - numeric) / denom;
}

template <typename T, typename F>
GradCheckReport grad_check(F&& f, const std::vector<Var<T>>& inputs, double step = 1e-4, double tol = 1e-3,
                           double floor_abs = 1e-6) {
  GradCheckReport report;

  for (const auto& x : inputs) x->zero_grad();
  Tape<T> tape;
  auto loss = f(tape);
  if (!loss || loss->size() != 1) throw NumericError("grad_check: f must produce a scalar loss");
  if (!std::isfinite(static_cast<double>(loss->v[0]))) {
    report.pass = false;
    report.note = "non-finite loss at the base point";
    return report;
  }
  tape.backward(loss);

  auto eval = [&]() -> double {
    Tape<T> fwd(false);
    auto l = f(fwd);
    return static_cast<double>(l->v[0]);
  };

  for (const auto& x : inputs) {
    if (!x->requires_grad) continue;
    x->ensure_grad();
    for (size_t i = 0; i < x->v.size(); ++i) {
      T saved = x->v[i];
      x->v[i] = saved + static_cast<T>(step);
      double up = eval();
      x->v[i] = saved - static_cast<T>(step);
      double down = eval();
      x->v[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double analytic = static_cast<double>(x->g[i]);
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        report.pass = false;
        report.note = "non-finite gradient probe at element " + std::to_string(i);
        return report;
      }
      double rel = relative_error(analytic, numeric, floor_abs);
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.n_checked;
    }
  }
  report.pass = report.n_checked == 0 || report.max_rel_err < tol;
  return report;
}

}  // namespace kgf
