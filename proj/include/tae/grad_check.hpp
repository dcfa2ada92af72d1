#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tae/tape.hpp"

namespace tae {

// Builds a scalar-valued graph from freshly leased parameter leaves. Must be
// deterministic: no noise, no dropout.
using GradFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  double tol = 0.0;
  std::string worst;  // "param 2 entry 13" for the worst entry
};

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h entry by entry over every parameter.
GradCheckReport grad_check(const GradFn& f, const std::vector<Tensor>& params, double tol,
                           double step = 1e-5);

}  // namespace tae
