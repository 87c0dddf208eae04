#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "kamg/errors.hpp"
#include "kamg/numerics/parameters.hpp"
#include "kamg/numerics/tape.hpp"

namespace kamg {

/// Builds a scalar loss on `tape` from registered parameter handles.
using LossBuilder = std::function<Var(Tape&, const ParamVars&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares tape gradients against central differences on every coordinate.
/// Relative error is |analytic - numeric| / max(1, |numeric|).
inline GradCheckReport finite_difference_check(const LossBuilder& build, const ParameterSet& params,
                                               double eps = 1e-5) {
  auto evaluate = [&](const ParameterSet& p) {
    Tape tape;
    const ParamVars vars = tape.parameters(p);
    const double v = value(build(tape, vars))[0];
    if (!std::isfinite(v)) throw NumericError("finite_difference_check: non-finite loss evaluation");
    return v;
  };

  ParameterSet analytic;
  {
    Tape tape;
    const ParamVars vars = tape.parameters(params);
    analytic = tape.backward(build(tape, vars));
  }

  GradCheckReport report;
  ParameterSet work = params;
  for (std::size_t p = 0; p < work.size(); ++p) {
    Matrix& m = work.value(p);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double saved = m[i];
      m[i] = saved + eps;
      const double up = evaluate(work);
      m[i] = saved - eps;
      const double down = evaluate(work);
      m[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.value(p)[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      ++report.coordinates;
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = work.name(p);
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace kamg
