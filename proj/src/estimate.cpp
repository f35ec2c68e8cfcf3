#include "sdecp/estimate.hpp"

#include <cmath>
#include <sstream>

namespace sdecp {

namespace {

void check_interval(const Path& path, IndexRange range, std::int64_t min_len, const char* who) {
  if (range.lo < 0 || range.hi > path.n() || range.length() < min_len) {
    std::ostringstream os;
    os << who << ": interval (" << range.lo << ", " << range.hi << "] invalid or shorter than "
       << min_len;
    throw DataError(os.str());
  }
}

Matrix inverse_at(const DiffusionModel& model, const Vector& x, const Vector& alpha,
                  std::int64_t index, Matrix& a_buf, double* log_det, const char* who) {
  model.diffusion(x, alpha, a_buf);
  Matrix A = a_buf * a_buf.transpose();
  Eigen::PartialPivLU<Matrix> lu(A);
  double det = lu.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    std::ostringstream os;
    os << who << ": singular A at increment " << index;
    throw NumericError(os.str());
  }
  if (log_det) *log_det = std::log(det);
  return lu.inverse();
}

}  // namespace

double alpha_contrast(const Path& path, const DiffusionModel& model, IndexRange range,
                      const Vector& alpha) {
  check_interval(path, range, 1, "alpha_contrast");
  const int d = model.state_dim;
  Matrix a(d, model.noise_dim);
  Vector x(d), dx(d);
  double sum = 0.0;
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    dx = path.x.row(i) - path.x.row(i - 1);
    double log_det = 0.0;
    Matrix A_inv = inverse_at(model, x, alpha, i, a, &log_det, "alpha_contrast");
    sum += (dx.transpose() * A_inv * dx).value() / path.h + log_det;
  }
  return sum;
}

double beta_contrast(const Path& path, const DiffusionModel& model, IndexRange range,
                     const Vector& beta, const Vector& alpha_fixed) {
  check_interval(path, range, 1, "beta_contrast");
  const int d = model.state_dim;
  Matrix a(d, model.noise_dim);
  Vector x(d), b(d), resid(d);
  double sum = 0.0;
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    model.drift(x, beta, b);
    resid = (path.x.row(i) - path.x.row(i - 1)).transpose() - path.h * b;
    Matrix A_inv = inverse_at(model, x, alpha_fixed, i, a, nullptr, "beta_contrast");
    sum += (resid.transpose() * A_inv * resid).value() / path.h;
  }
  return sum;
}

IntervalEstimate estimate_alpha(const Path& path, const DiffusionModel& model, IndexRange range,
                                const OptimizerConfig& cfg) {
  check_interval(path, range, model.alpha_dim + 1, "estimate_alpha");
  IntervalEstimate est;
  est.interval = range;

  if (model.scalar_constant_diffusion) {
    double sum_sq = 0.0;
    for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
      sum_sq += (path.x.row(i) - path.x.row(i - 1)).squaredNorm();
    }
    double m = static_cast<double>(range.length()) * model.state_dim;
    double alpha = std::sqrt(sum_sq / (m * path.h));
    Vector a(1);
    a[0] = alpha;
    bool clamped = false;
    a = model.alpha_space.project(a, &clamped);
    est.alpha_hat = a;
    est.clamped = clamped;
    if (clamped) {
      est.warnings.push_back(sum_sq == 0.0
                                 ? "estimate_alpha: zero increments, clamped to box edge"
                                 : "estimate_alpha: closed form outside box, clamped");
    }
  } else {
    auto objective = [&](const Vector& alpha) {
      return alpha_contrast(path, model, range, alpha);
    };
    OptimizerResult opt = minimize_box(objective, model.alpha_space, cfg);
    est.alpha_hat = opt.x;
    est.iterations = opt.iterations;
    est.converged = opt.converged;
    if (!opt.converged) est.warnings.push_back("estimate_alpha: optimizer budget exhausted");
  }
  est.boundary = model.alpha_space.on_boundary(*est.alpha_hat);
  est.contrast_value = alpha_contrast(path, model, range, *est.alpha_hat);
  return est;
}

IntervalEstimate estimate_beta(const Path& path, const DiffusionModel& model, IndexRange range,
                               const Vector& alpha_fixed, const OptimizerConfig& cfg) {
  check_interval(path, range, model.beta_dim + 1, "estimate_beta");
  IntervalEstimate est;
  est.interval = range;

  if (model.beta_lsq) {
    Vector beta = model.beta_lsq(path.x, path.h, range, alpha_fixed);
    bool clamped = false;
    beta = model.beta_space.project(beta, &clamped);
    est.beta_hat = beta;
    est.clamped = clamped;
    if (clamped) est.warnings.push_back("estimate_beta: least-squares fit outside box, clamped");
  } else {
    auto objective = [&](const Vector& beta) {
      return beta_contrast(path, model, range, beta, alpha_fixed);
    };
    OptimizerResult opt = minimize_box(objective, model.beta_space, cfg);
    est.beta_hat = opt.x;
    est.iterations = opt.iterations;
    est.converged = opt.converged;
    if (!opt.converged) est.warnings.push_back("estimate_beta: optimizer budget exhausted");
  }
  est.boundary = model.beta_space.on_boundary(*est.beta_hat);
  if (est.boundary) est.warnings.push_back("estimate_beta: estimate on box boundary");
  est.contrast_value = beta_contrast(path, model, range, *est.beta_hat, alpha_fixed);
  return est;
}

bool expansion_has_usable_split(std::int64_t window_len, double h, const ExpansionDeps& deps) {
  for (double c : deps.fractions) {
    auto margin = static_cast<std::int64_t>(std::floor(c * static_cast<double>(window_len)));
    if (margin < deps.min_margin_obs) continue;
    if (static_cast<double>(margin) * h < deps.min_margin_time) continue;
    if (window_len - 2 * margin < 100) continue;
    return true;
  }
  return false;
}

std::optional<ExpansionResult> expand_and_estimate(const Path& path, const DiffusionModel& model,
                                                   IndexRange window, ExpandRole role,
                                                   const ExpansionDeps& deps) {
  const std::int64_t w = window.length();
  if (w < 4) throw DataError("expand_and_estimate: window too short");
  if (role == ExpandRole::beta && !deps.alpha_fixed) {
    throw ConfigError("expand_and_estimate: beta role requires alpha_fixed");
  }

  bool any_usable = false;
  for (double c : deps.fractions) {
    auto margin = static_cast<std::int64_t>(std::floor(c * static_cast<double>(w)));
    if (margin < deps.min_margin_obs) continue;
    if (static_cast<double>(margin) * path.h < deps.min_margin_time) continue;
    any_usable = true;

    IndexRange middle{window.lo + margin, window.hi - margin};
    IndexRange left{window.lo, window.lo + margin};
    IndexRange right{window.hi - margin, window.hi};
    if (middle.length() < 100) continue;

    TestResult middle_test;
    if (role == ExpandRole::alpha) {
      IntervalEstimate mid_alpha = estimate_alpha(path, model, middle, deps.optimizer);
      middle_test =
          t_alpha_range(path, model, middle, *mid_alpha.alpha_hat, deps.level, deps.cv);
    } else {
      IntervalEstimate mid_beta =
          estimate_beta(path, model, middle, *deps.alpha_fixed, deps.optimizer);
      double span = static_cast<double>(middle.length()) * path.h;
      TestResult r1, r2;
      bool use1 = deps.drift_test != DriftTestChoice::t2;
      bool use2 = deps.drift_test != DriftTestChoice::t1;
      if (use1) {
        r1 = t1_drift_range(path, model, middle, span, *deps.alpha_fixed, *mid_beta.beta_hat,
                            deps.level, deps.cv);
      }
      if (use2) {
        r2 = t2_drift_range(path, model, middle, span, *deps.alpha_fixed, *mid_beta.beta_hat,
                            deps.level, deps.cv);
      }
      if (use1 && use2) {
        middle_test = (r1.statistic - r1.critical_value >= r2.statistic - r2.critical_value)
                          ? r1
                          : r2;
        middle_test.reject = r1.reject || r2.reject;
      } else {
        middle_test = use1 ? r1 : r2;
      }
    }

    if (middle_test.reject) {
      ExpansionResult res;
      res.split_used = c;
      res.middle_test = middle_test;
      if (role == ExpandRole::alpha) {
        res.first = estimate_alpha(path, model, left, deps.optimizer);
        res.second = estimate_alpha(path, model, right, deps.optimizer);
      } else {
        res.first = estimate_beta(path, model, left, *deps.alpha_fixed, deps.optimizer);
        res.second = estimate_beta(path, model, right, *deps.alpha_fixed, deps.optimizer);
      }
      return res;
    }
  }

  if (!any_usable) {
    throw DataError("expand_and_estimate: no split leaves the required margin observations");
  }
  return std::nullopt;
}

}  // namespace sdecp
