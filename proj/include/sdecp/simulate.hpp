#pragma once

#include <cstdint>
#include <vector>

#include "sdecp/model.hpp"
#include "sdecp/path.hpp"

namespace sdecp {

// Piecewise-constant parameter assignment over [0, T]. Segment k holds on
// observation increments ( [n tau_{k-1}], [n tau_k] ]: the parameter switch
// lands exactly on the observation grid at index [n tau].
struct ScheduleSegment {
  double fraction_end = 1.0;  // tau in (0, 1]
  Vector alpha;
  Vector beta;
};

struct ParamSchedule {
  std::vector<ScheduleSegment> segments;

  ParamSchedule() = default;
  explicit ParamSchedule(std::vector<ScheduleSegment> segs);

  // Constant parameters over the whole horizon.
  static ParamSchedule constant(Vector alpha, Vector beta);

  // Segment supplying increment i of n, i.e. the first segment whose end
  // index [n tau_k] is >= i.
  const ScheduleSegment& segment_for(std::int64_t increment, std::int64_t n) const;

  // Dimension check only; simulation accepts coefficients outside the
  // estimation boxes (e.g. a zero-noise sanity run).
  void validate_dims_against(const DiffusionModel& model) const;
  // Dimensions plus box membership; benchmark schedules must satisfy both.
  void validate_against(const DiffusionModel& model) const;
};

// Euler-Maruyama with `substeps` internal steps per observation step.
// Identical arguments (including seed) give an identical path; throws
// NumericError naming the first index at which the state becomes
// non-finite.
Path simulate_path(const DiffusionModel& model, const ParamSchedule& schedule, const Vector& x0,
                   std::int64_t n, double h, int substeps, std::uint64_t seed);

// Exact Gaussian transition for the Ornstein-Uhlenbeck model
//   X_{t_{i+1}} = gamma + (X_{t_i} - gamma) e^{-beta h}
//                 + alpha sqrt((1 - e^{-2 beta h}) / (2 beta)) Z_i.
// Schedule segments must carry OU parameters (alpha scalar, beta = (b, gamma)
// with b > 0).
Path simulate_ou_exact(const ParamSchedule& schedule, double x0, std::int64_t n, double h,
                       std::uint64_t seed);

// n_reps independent draws of sup_{0<=s<=1} ||B_k^0(s)|| where the bridge is
// built on an n_grid lattice as W(s) - s W(1) from scaled partial sums.
// Returned sorted ascending. Output does not depend on n_threads.
std::vector<double> sample_brownian_bridge_sup(int dim, std::int64_t n_grid, std::int64_t n_reps,
                                               std::uint64_t seed, int n_threads = 1);

}  // namespace sdecp
