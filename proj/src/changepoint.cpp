#include "sdecp/changepoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sdecp/estimate.hpp"
#include "sdecp/parallel.hpp"
#include "sdecp/rng.hpp"
#include "sdecp/simulate.hpp"

namespace sdecp {

namespace {

// Shared prefix-sum argmin over per-increment contrast differences
// D_i = C_i(theta1) - C_i(theta2), i in (range.lo, range.hi]. The scanned
// split indices are k in [range.lo, range.hi] with cum(range.lo) = 0.
ChangePointEstimate argmin_scan(const Path& path, IndexRange range,
                                const std::function<double(std::int64_t)>& diff,
                                bool keep_profile) {
  ChangePointEstimate est;
  est.window = range;
  double cum = 0.0;
  double best = 0.0;
  std::int64_t best_k = range.lo;
  bool tie = false;
  if (keep_profile) est.profile.push_back(0.0);
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    cum += diff(i);
    if (keep_profile) est.profile.push_back(cum);
    if (cum < best) {
      best = cum;
      best_k = i;
      tie = false;
    } else if (cum == best) {
      tie = true;
    }
  }
  est.index_hat = best_k;
  est.tau_hat = static_cast<double>(best_k) / static_cast<double>(path.n());
  est.tie = tie;
  return est;
}

}  // namespace

ChangePointEstimate estimate_tau_alpha(const Path& path, const DiffusionModel& model,
                                       const Vector& alpha1, const Vector& alpha2,
                                       bool keep_profile) {
  const int d = model.state_dim;
  Matrix a(d, model.noise_dim);
  Vector x(d), dx(d);

  auto F = [&](std::int64_t i, const Vector& alpha) {
    x = path.x.row(i - 1);
    dx = path.x.row(i) - path.x.row(i - 1);
    model.diffusion(x, alpha, a);
    Matrix A = a * a.transpose();
    Eigen::PartialPivLU<Matrix> lu(A);
    double det = lu.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
      std::ostringstream os;
      os << "estimate_tau_alpha: singular A at increment " << i;
      throw NumericError(os.str());
    }
    return (dx.transpose() * lu.inverse() * dx).value() / path.h + std::log(det);
  };

  ChangePointEstimate est = argmin_scan(
      path, path.full_range(), [&](std::int64_t i) { return F(i, alpha1) - F(i, alpha2); },
      keep_profile);
  if (alpha1 == alpha2) est.tie = true;
  return est;
}

ExclusionWindow exclusion_window(std::int64_t n, double tau_alpha_hat, const Vector& alpha1,
                                 const Vector& alpha2, double cap, double slope0, double slope1) {
  if (n < 10) throw ConfigError("exclusion_window: n must be >= 10");
  double diff = (alpha1 - alpha2).norm();
  if (diff == 0.0) {
    throw NumericError("exclusion_window: alpha estimates coincide, epsilon1 undefined");
  }

  ExclusionWindow w;
  double log_n_diff = std::log(diff) / std::log(static_cast<double>(n));
  w.epsilon1 = std::min(cap, slope0 + slope1 * log_n_diff);
  if (w.epsilon1 <= 0.0) {
    w.epsilon1 = 0.01;
    w.floored = true;
  }

  double half_width = std::pow(static_cast<double>(n), -w.epsilon1);
  double lo_limit = 1.0 / static_cast<double>(n);
  double hi_limit = 1.0 - lo_limit;
  w.tau_lower = tau_alpha_hat - half_width;
  w.tau_upper = tau_alpha_hat + half_width;
  if (w.tau_lower < lo_limit) {
    w.tau_lower = lo_limit;
    w.clamped = true;
  }
  if (w.tau_upper > hi_limit) {
    w.tau_upper = hi_limit;
    w.clamped = true;
  }
  return w;
}

ChangePointEstimate estimate_tau_beta(const Path& path, const DiffusionModel& model,
                                      WindowSide side, const ExclusionWindow& window,
                                      const Vector& alpha, const Vector& beta1,
                                      const Vector& beta2, bool keep_profile) {
  const auto n = path.n();
  const double boundary =
      (side == WindowSide::left) ? window.tau_lower : window.tau_upper;
  auto split = static_cast<std::int64_t>(std::floor(boundary * static_cast<double>(n)));
  IndexRange range =
      (side == WindowSide::left) ? IndexRange{0, split} : IndexRange{split, n};
  if (range.length() < 2) throw DataError("estimate_tau_beta: empty window");

  const int d = model.state_dim;
  Matrix a(d, model.noise_dim);
  Vector x(d), b(d), resid(d);

  auto G = [&](std::int64_t i, const Vector& beta) {
    x = path.x.row(i - 1);
    model.drift(x, beta, b);
    resid = (path.x.row(i) - path.x.row(i - 1)).transpose() - path.h * b;
    model.diffusion(x, alpha, a);
    Matrix A = a * a.transpose();
    Eigen::PartialPivLU<Matrix> lu(A);
    double det = lu.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
      std::ostringstream os;
      os << "estimate_tau_beta: singular A at increment " << i;
      throw NumericError(os.str());
    }
    return (resid.transpose() * lu.inverse() * resid).value() / path.h;
  };

  return argmin_scan(
      path, range, [&](std::int64_t i) { return G(i, beta1) - G(i, beta2); }, keep_profile);
}

double compute_J(const DiffusionModel& model, const Vector& alpha0, const Vector& beta0,
                 const Vector& direction, const InvariantSamplerConfig& sampler,
                 std::int64_t n_mc) {
  if (direction.size() != model.beta_dim) {
    throw ConfigError("compute_J: direction dimension must equal beta_dim");
  }
  if (n_mc < 1) throw ConfigError("compute_J: n_mc must be >= 1");

  const int d = model.state_dim;
  auto gen = make_stream(sampler.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector x = Vector::Zero(d);
  Vector b(d);
  Matrix a(d, model.noise_dim);
  Vector dw(model.noise_dim);
  const double dt = sampler.step;
  const double sqrt_dt = std::sqrt(dt);

  auto euler_step = [&] {
    model.drift(x, beta0, b);
    model.diffusion(x, alpha0, a);
    for (int j = 0; j < model.noise_dim; ++j) dw[j] = sqrt_dt * normal(gen);
    x += dt * b + a * dw;
  };

  for (std::int64_t i = 0; i < sampler.burn_in_steps; ++i) euler_step();
  if (!x.allFinite()) throw NumericError("compute_J: invariant sampler diverged in burn-in");

  Matrix jac(d, model.beta_dim);
  double sum = 0.0;
  for (std::int64_t s = 0; s < n_mc; ++s) {
    for (std::int64_t t = 0; t < sampler.thin; ++t) euler_step();
    if (!x.allFinite()) throw NumericError("compute_J: invariant sampler diverged");
    model.drift_jac_beta(x, beta0, jac);
    model.diffusion(x, alpha0, a);
    Matrix A = a * a.transpose();
    Eigen::PartialPivLU<Matrix> lu(A);
    Vector v = jac * direction;  // e^T Jac^T A^{-1} Jac e = v^T A^{-1} v
    sum += v.dot(lu.solve(v));
  }
  return sum / static_cast<double>(n_mc);
}

double compute_J_ou_analytic(const Vector& alpha0, const Vector& beta0, const Vector& direction) {
  if (alpha0.size() != 1 || beta0.size() != 2 || direction.size() != 2) {
    throw ConfigError("compute_J_ou_analytic: expects OU-shaped parameters");
  }
  double alpha = alpha0[0];
  double beta = beta0[0];
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw ConfigError("compute_J_ou_analytic: alpha and beta must be positive");
  }
  return direction[0] * direction[0] / (2.0 * beta) +
         direction[1] * direction[1] * beta * beta / (alpha * alpha);
}

LimitArgminSample sample_limit_argmin(double J, std::int64_t reps, double v_max, double grid_step,
                                      std::uint64_t seed, int n_threads) {
  if (!(J > 0.0)) throw ConfigError("sample_limit_argmin: J must be positive");
  if (reps < 1) throw ConfigError("sample_limit_argmin: reps must be >= 1");
  if (!(grid_step > 0.0) || !(v_max > grid_step)) {
    throw ConfigError("sample_limit_argmin: need 0 < grid_step < v_max");
  }

  const auto n_grid = static_cast<std::int64_t>(std::round(v_max / grid_step));
  const double sqrt_j = std::sqrt(J);
  const double sqrt_step = std::sqrt(grid_step);

  LimitArgminSample out;
  out.values.resize(static_cast<std::size_t>(reps));
  std::vector<unsigned char> hit(static_cast<std::size_t>(reps), 0);

  parallel_for(reps, n_threads, [&](std::int64_t rep) {
    auto gen = make_stream(seed, static_cast<std::uint64_t>(rep));
    std::normal_distribution<double> normal(0.0, 1.0);
    double best_v = 0.0;
    double best_g = 0.0;  // G(0) = 0
    // Positive branch, then an independent negative branch.
    for (int sign : {+1, -1}) {
      double w = 0.0;
      for (std::int64_t j = 1; j <= n_grid; ++j) {
        w += sqrt_step * normal(gen);
        double v = sign * static_cast<double>(j) * grid_step;
        double g = -2.0 * sqrt_j * w + J * std::abs(v);
        if (g < best_g) {
          best_g = g;
          best_v = v;
        }
      }
    }
    out.values[static_cast<std::size_t>(rep)] = best_v;
    if (std::abs(std::abs(best_v) - v_max) < 0.5 * grid_step) {
      hit[static_cast<std::size_t>(rep)] = 1;
    }
  });

  std::int64_t hits = 0;
  for (auto h : hit) hits += h;
  out.boundary_fraction = static_cast<double>(hits) / static_cast<double>(reps);
  out.boundary_flag = out.boundary_fraction >= 0.01;
  if (out.boundary_fraction >= 0.05) {
    std::ostringstream os;
    os << "sample_limit_argmin: " << 100.0 * out.boundary_fraction
       << "% of draws hit the boundary; increase v_max";
    throw NumericError(os.str());
  }
  return out;
}

LimitArgminSample sample_limit_argmin(double J, std::uint64_t seed, int n_threads) {
  return sample_limit_argmin(J, 10000, 50.0 / J, 0.01 / J, seed, n_threads);
}

void write_profile_csv(const ChangePointEstimate& estimate, std::int64_t n,
                       const std::string& filename) {
  if (estimate.profile.empty()) {
    throw DataError("write_profile_csv: estimate holds no profile (keep_profile was false)");
  }
  std::ofstream os(filename, std::ios::binary);
  if (!os) throw DataError("cannot open '" + filename + "' for writing");
  os << "index,tau,contrast\n";
  char buf[64];
  for (std::size_t i = 0; i < estimate.profile.size(); ++i) {
    std::int64_t k = estimate.window.lo + static_cast<std::int64_t>(i);
    os << k << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(k) / static_cast<double>(n));
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", estimate.profile[i]);
    os << buf << "\n";
  }
}

}  // namespace sdecp
