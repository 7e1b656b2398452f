#pragma once

#include <functional>

#include "partstack/tape.hpp"
#include "partstack/tensor.hpp"

namespace partstack {

struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_index = -1;
  bool finite = true;
  bool passed = false;
};

// Builds a scalar from a leaf tensor on a fresh tape. Called once for the
// analytic gradient and 2*size times for central differences.
using ScalarFn = std::function<TensorPtr(Tape&, const TensorPtr&)>;

// Central finite differences with the given step against the tape gradient.
// Relative error per element uses max(|analytic|, |numeric|) as denominator;
// elements where both are below 1e-8 count as exact.
GradCheckReport grad_check(const ScalarFn& fn, const Tensor& x0, double tolerance,
                           double step = 1e-5);

}  // namespace partstack
