#pragma once

#include <cstdint>
#include <functional>

#include "sdecp/model.hpp"

namespace sdecp {

struct OptimizerConfig {
  int multistarts = 8;
  int max_iterations = 500;   // per start
  double f_tolerance = 1e-8;  // spread of simplex values
  double x_tolerance = 1e-9;  // simplex diameter, relative to box width
  std::uint64_t seed = 0;     // multistart points are deterministic in this
};

struct OptimizerResult {
  Vector x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Box-constrained Nelder-Mead with uniform multistarts and a quadratic
// coordinate polish of the incumbent. Candidates outside the box are
// projected onto it.
OptimizerResult minimize_box(const std::function<double(const Vector&)>& f, const ParamBox& box,
                             const OptimizerConfig& cfg = {});

}  // namespace sdecp
