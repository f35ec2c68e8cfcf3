#pragma once

#include <optional>
#include <vector>

#include "sdecp/cusum.hpp"
#include "sdecp/model.hpp"
#include "sdecp/optimize.hpp"
#include "sdecp/path.hpp"

namespace sdecp {

struct IntervalEstimate {
  IndexRange interval;
  std::optional<Vector> alpha_hat;
  std::optional<Vector> beta_hat;
  double contrast_value = 0.0;
  int iterations = 0;
  bool converged = true;
  bool clamped = false;   // estimate projected onto the parameter box
  bool boundary = false;  // estimate sits on the box boundary
  Warnings warnings;

  const Vector& value() const { return alpha_hat ? *alpha_hat : *beta_hat; }
};

// Sum over the range of F_i(alpha) =
//   tr(A^{-1}(X_{t_{i-1}}, alpha) (DX_i)^2 / h) + log det A(X_{t_{i-1}}, alpha).
double alpha_contrast(const Path& path, const DiffusionModel& model, IndexRange range,
                      const Vector& alpha);

// Sum over the range of G_i(beta | alpha) =
//   tr(A^{-1}(X_{t_{i-1}}, alpha) (DX_i - h b(X_{t_{i-1}}, beta))^2 / h).
double beta_contrast(const Path& path, const DiffusionModel& model, IndexRange range,
                     const Vector& beta, const Vector& alpha_fixed);

// argmin of alpha_contrast over alpha_space. Models with scalar constant
// diffusion use the closed form alpha^2 = sum (DX_i)^2 / (m h), clamped to
// the box; others run the derivative-free optimizer.
IntervalEstimate estimate_alpha(const Path& path, const DiffusionModel& model, IndexRange range,
                                const OptimizerConfig& cfg = {});

// argmin of beta_contrast over beta_space given a fixed alpha (adaptive
// scheme: alpha first, then beta). Builtins use closed-form least squares.
IntervalEstimate estimate_beta(const Path& path, const DiffusionModel& model, IndexRange range,
                               const Vector& alpha_fixed, const OptimizerConfig& cfg = {});

enum class ExpandRole { alpha, beta };
enum class DriftTestChoice { t1, t2, both };

struct ExpansionDeps {
  double level = 0.05;
  CriticalValueSource cv;
  DriftTestChoice drift_test = DriftTestChoice::both;
  // alpha estimate handed to the drift test and drift fits (beta role only).
  std::optional<Vector> alpha_fixed;
  OptimizerConfig optimizer;
  std::vector<double> fractions = {0.25, 0.125, 0.0625, 0.01};
  std::int64_t min_margin_obs = 50;
  // Drift estimates converge at the sqrt(T) rate, so beta-role margins are
  // additionally required to span this much time; fractions below it are
  // skipped.
  double min_margin_time = 0.0;
};

struct ExpansionResult {
  IntervalEstimate first;   // from the left margin (0, c W]
  IntervalEstimate second;  // from the right margin ((1-c) W, W]
  double split_used = 0.0;  // the fraction c of the first rejecting split
  TestResult middle_test;
};

// True when at least one fraction leaves margins with min_margin_obs
// increments and min_margin_time time span (and a testable middle).
bool expansion_has_usable_split(std::int64_t window_len, double h, const ExpansionDeps& deps);

// Tests the middle sub-interval (c W, (1-c) W] of `window` for each fraction
// c in turn; on the first rejection, estimates the parameter on the two outer
// margins. Returns nullopt when no split rejects (window looks change-free).
// Fractions whose margins would hold fewer than min_margin_obs increments or
// span less than min_margin_time are skipped; throws when no fraction is
// usable at all.
std::optional<ExpansionResult> expand_and_estimate(const Path& path, const DiffusionModel& model,
                                                   IndexRange window, ExpandRole role,
                                                   const ExpansionDeps& deps);

}  // namespace sdecp
