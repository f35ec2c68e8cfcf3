#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sdecp/cusum.hpp"
#include "sdecp/model.hpp"
#include "sdecp/path.hpp"

namespace sdecp {

struct ChangePointEstimate {
  double tau_hat = 0.0;
  std::int64_t index_hat = 0;  // [n tau_hat]
  IndexRange window;           // scanned range
  bool tie = false;            // several indices attain the minimum exactly
  std::vector<double> profile;  // per-index contrast, only when requested
};

// argmin over k in {window.lo, ..., window.hi} of
//   Phi_n(k) = sum_{i<=k} F_i(alpha1) + sum_{i>k} F_i(alpha2),
// computed as a prefix-sum scan of F_i(alpha1) - F_i(alpha2). Ties resolve
// to the smallest index. Warns (via `tie`) when alpha1 == alpha2.
ChangePointEstimate estimate_tau_alpha(const Path& path, const DiffusionModel& model,
                                       const Vector& alpha1, const Vector& alpha2,
                                       bool keep_profile = false);

struct ExclusionWindow {
  double epsilon1 = 0.0;
  double tau_lower = 0.0;  // tau_hat - n^{-epsilon1}, clamped
  double tau_upper = 0.0;  // tau_hat + n^{-epsilon1}, clamped
  bool clamped = false;
  bool floored = false;  // epsilon1 hit its lower floor
};

// epsilon1 = cap ^ (slope0 + slope1 * log_n |alpha1 - alpha2|), floored at
// 0.01; window is tau_hat +- n^{-epsilon1} clamped into (1/n, 1 - 1/n).
// Throws when alpha1 == alpha2.
ExclusionWindow exclusion_window(std::int64_t n, double tau_alpha_hat, const Vector& alpha1,
                                 const Vector& alpha2, double cap = 0.45, double slope0 = 0.9,
                                 double slope1 = 1.8);

// Drift change-point estimator inside one side of the exclusion window.
// side = left scans k in {0..[n tau_lower]} of
//   Psi_1(k) = sum_{i<=k} G_i(beta1|alpha) + sum_{k<i<=[n tau_lower]} G_i(beta2|alpha);
// side = right scans k in {[n tau_upper]..n} with the sums over
// ([n tau_upper], n]. `alpha` should be the matching side's estimate.
ChangePointEstimate estimate_tau_beta(const Path& path, const DiffusionModel& model,
                                      WindowSide side, const ExclusionWindow& window,
                                      const Vector& alpha, const Vector& beta1,
                                      const Vector& beta2, bool keep_profile = false);

// Approximate draw from the invariant measure: one long Euler path, burn-in
// discarded, then thinned.
struct InvariantSamplerConfig {
  double step = 0.01;
  std::int64_t burn_in_steps = 1000000;
  std::int64_t thin = 100;
  std::uint64_t seed = 4242;
};

// J = e^T ( int (d_beta b)^T A^{-1} (d_beta b) dmu ) e by Monte Carlo over
// invariant-measure samples.
double compute_J(const DiffusionModel& model, const Vector& alpha0, const Vector& beta0,
                 const Vector& direction, const InvariantSamplerConfig& sampler,
                 std::int64_t n_mc);

// Closed form for the OU model: mu = N(gamma, alpha^2 / (2 beta)) gives
// J = e0^2 / (2 beta) + e1^2 beta^2 / alpha^2.
double compute_J_ou_analytic(const Vector& alpha0, const Vector& beta0, const Vector& direction);

struct LimitArgminSample {
  std::vector<double> values;      // one argmin per replication
  double boundary_fraction = 0.0;  // argmin landed on +-v_max
  bool boundary_flag = false;      // fraction >= 1%
};

// Samples argmin over [-v_max, v_max] of G(v) = -2 sqrt(J) W(v) + J |v| with
// W a two-sided Wiener path on a grid_step lattice. Reference law for
// T theta^2 (tau_hat - tau*). Defaults concentrate the grid at scale 1/J.
// Throws when >= 5% of replications hit the boundary.
LimitArgminSample sample_limit_argmin(double J, std::int64_t reps, double v_max, double grid_step,
                                      std::uint64_t seed, int n_threads = 1);

// Defaults v_max = 50/J, grid_step = 0.01/J, reps = 1e4.
LimitArgminSample sample_limit_argmin(double J, std::uint64_t seed, int n_threads = 1);

// Dumps a retained contrast profile as "index,tau,contrast" rows (contrast
// relative to the window's left edge). Requires keep_profile = true.
void write_profile_csv(const ChangePointEstimate& estimate, std::int64_t n,
                       const std::string& filename);

}  // namespace sdecp
