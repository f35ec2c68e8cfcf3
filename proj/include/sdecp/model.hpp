#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "sdecp/common.hpp"

namespace sdecp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Axis-aligned compact parameter box. Compactness is what the estimators
// rely on; projection and uniform multistart are trivial on boxes.
struct ParamBox {
  Vector lower;
  Vector upper;

  ParamBox() = default;
  ParamBox(Vector lo, Vector hi);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vector& p, double tol = 0.0) const;
  // Clamps p into the box; sets *clamped if any coordinate moved.
  Vector project(const Vector& p, bool* clamped = nullptr) const;
  bool on_boundary(const Vector& p, double rel_tol = 1e-9) const;
};

// Diffusion model dX = b(X, beta) dt + a(X, alpha) dW with user-supplied
// coefficients and the drift Jacobian in beta. Immutable after construction;
// all callbacks must be pure, so models are safe to share across threads.
struct DiffusionModel {
  std::string name;
  int state_dim = 0;   // d
  int noise_dim = 0;   // r
  int alpha_dim = 0;   // p
  int beta_dim = 0;    // q

  // out has the correct shape on entry (d, d x r, d x q respectively).
  using DriftFn = std::function<void(const Vector& x, const Vector& beta, Eigen::Ref<Vector> out)>;
  using DiffusionFn = std::function<void(const Vector& x, const Vector& alpha, Eigen::Ref<Matrix> out)>;
  using JacobianFn = std::function<void(const Vector& x, const Vector& beta, Eigen::Ref<Matrix> out)>;

  DriftFn drift;
  DiffusionFn diffusion;
  JacobianFn drift_jac_beta;

  ParamBox alpha_space;
  ParamBox beta_space;

  // True when a(x, alpha) == alpha * I with scalar alpha (p == 1): unlocks
  // the closed-form quasi-likelihood alpha estimate.
  bool scalar_constant_diffusion = false;

  // Optional closed-form least-squares drift fit (set for builtins whose
  // drift is linear in a reparameterization). Arguments: state rows
  // X_{t_lo}..X_{t_hi}, step h, increment range, fixed alpha. Returns the
  // unclamped estimate in (beta) coordinates.
  using BetaLsqFn = std::function<Vector(const Matrix& x, double h, IndexRange range, const Vector& alpha)>;
  BetaLsqFn beta_lsq;

  // Same fit over several disjoint blocks, each weighted by its own alpha
  // (the pooled drift fit of a two-regime path).
  using Block = std::pair<IndexRange, Vector>;
  using BetaLsqBlocksFn = std::function<Vector(const Matrix& x, double h, const std::vector<Block>& blocks)>;
  BetaLsqBlocksFn beta_lsq_blocks;

  bool drift_tests_supported() const { return state_dim == noise_dim; }
};

// b(x, (beta, gamma)) = -beta (x - gamma), a = alpha. d = r = 1, p = 1, q = 2.
DiffusionModel make_ou_model();

// b(x, (beta, gamma)) = beta - gamma x / sqrt(1 + x^2), a = alpha.
// Default boxes satisfy |beta| < gamma on every point of the box.
DiffusionModel make_hyperbolic_model();

// Builtin lookup by CLI name ("ou", "hyperbolic"); throws ConfigError.
DiffusionModel model_by_name(const std::string& name);

// Convenience evaluators with dimension and box checks.
Vector eval_drift(const DiffusionModel& model, const Vector& x, const Vector& beta);
Matrix eval_diffusion(const DiffusionModel& model, const Vector& x, const Vector& alpha);
// A = a a^T, symmetrized exactly.
Matrix eval_A(const DiffusionModel& model, const Vector& x, const Vector& alpha);
Matrix eval_drift_jac(const DiffusionModel& model, const Vector& x, const Vector& beta);

struct DerivativeCheckReport {
  int probes = 0;
  double max_rel_error = 0.0;
  double min_A_det = 0.0;
  bool jacobian_ok = false;
  bool A_spd_ok = false;
  std::string detail;

  bool pass() const { return jacobian_ok && A_spd_ok; }
};

// Compares drift_jac_beta against central differences of drift at random
// probes (x uniform in state_box, beta uniform in beta_space) and checks
// A(x, alpha) for symmetric positive definiteness. Throws NumericError on
// non-finite coefficient output.
DerivativeCheckReport check_derivatives(const DiffusionModel& model, int n_probes,
                                        std::uint64_t seed, double state_box_halfwidth = 10.0,
                                        double rel_tol = 1e-5);

}  // namespace sdecp
