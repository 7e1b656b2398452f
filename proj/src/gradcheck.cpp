#include "partstack/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace partstack {

namespace {

double eval_scalar(const ScalarFn& fn, const Tensor& x) {
  Tape tape;
  auto leaf = make_tensor(x.shape, x.values);
  auto out = fn(tape, leaf);
  if (out->size() != 1)
    throw std::invalid_argument("grad_check: function under test must be scalar-valued, got " +
                                out->shape_string());
  return out->values[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, const Tensor& x0, double tolerance, double step) {
  GradCheckReport report;

  // Analytic pass.
  Tape tape;
  auto leaf = make_tensor(x0.shape, x0.values);
  auto out = fn(tape, leaf);
  if (out->size() != 1)
    throw std::invalid_argument("grad_check: function under test must be scalar-valued, got " +
                                out->shape_string());
  tape.backward(out);
  if (!out->all_finite() || !leaf->grad_all_finite()) {
    report.finite = false;
    return report;
  }
  const std::vector<double> analytic = leaf->grad;

  Tensor probe = x0;
  for (int i = 0; i < x0.size(); ++i) {
    const double saved = probe.values[static_cast<std::size_t>(i)];
    probe.values[static_cast<std::size_t>(i)] = saved + step;
    const double fp = eval_scalar(fn, probe);
    probe.values[static_cast<std::size_t>(i)] = saved - step;
    const double fm = eval_scalar(fn, probe);
    probe.values[static_cast<std::size_t>(i)] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      report.finite = false;
      return report;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic[static_cast<std::size_t>(i)];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double err = scale < 1e-8 ? 0.0 : std::abs(a - numeric) / scale;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  report.passed = report.finite && report.max_rel_error <= tolerance;
  return report;
}

}  // namespace partstack
