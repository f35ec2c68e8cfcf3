#include <cmath>

#include "doctest.h"
#include "sdecp/changepoint.hpp"
#include "sdecp/estimate.hpp"
#include "sdecp/experiment.hpp"
#include "sdecp/rng.hpp"
#include "sdecp/simulate.hpp"

using namespace sdecp;

namespace {

Vector vec1(double a) { return Vector::Constant(1, a); }

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Exhaustive recomputation of Phi_n(k) for every split index.
std::int64_t brute_force_tau_alpha(const Path& path, const DiffusionModel& model,
                                   const Vector& a1, const Vector& a2) {
  const auto n = path.n();
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_k = 0;
  for (std::int64_t k = 0; k <= n; ++k) {
    double phi = 0.0;
    if (k >= 1) phi += alpha_contrast(path, model, {0, k}, a1);
    if (k < n) phi += alpha_contrast(path, model, {k, n}, a2);
    if (phi < best) {
      best = phi;
      best_k = k;
    }
  }
  return best_k;
}

std::int64_t brute_force_tau_beta_left(const Path& path, const DiffusionModel& model,
                                       std::int64_t m, const Vector& alpha, const Vector& b1,
                                       const Vector& b2) {
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_k = 0;
  for (std::int64_t k = 0; k <= m; ++k) {
    double psi = 0.0;
    if (k >= 1) psi += beta_contrast(path, model, {0, k}, b1, alpha);
    if (k < m) psi += beta_contrast(path, model, {k, m}, b2, alpha);
    if (psi < best) {
      best = psi;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace

TEST_CASE("tau_alpha matches exhaustive recomputation on random paths") {
  auto ou = make_ou_model();
  for (int trial = 0; trial < 12; ++trial) {
    ParamSchedule sched({{0.3 + 0.05 * trial, vec1(0.8), vec2(1.0, 2.0)},
                         {1.0, vec1(1.4), vec2(1.0, 2.0)}});
    Path p = simulate_ou_exact(sched, 2.0, 500, 0.05, derive_seed(101, trial));
    auto est = estimate_tau_alpha(p, ou, vec1(0.8), vec1(1.4));
    CHECK(est.index_hat == brute_force_tau_alpha(p, ou, vec1(0.8), vec1(1.4)));
    CHECK(est.tau_hat == doctest::Approx(static_cast<double>(est.index_hat) / 500.0));
  }
}

TEST_CASE("equal alpha estimates produce a flagged constant profile") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  Path p = simulate_ou_exact(sched, 2.0, 300, 0.05, 3);
  auto est = estimate_tau_alpha(p, ou, vec1(1.1), vec1(1.1));
  CHECK(est.index_hat == 0);
  CHECK(est.tie);
}

TEST_CASE("state rescaling shifts every F_i by a constant, argmin unchanged") {
  // X -> s X with alpha -> s alpha adds log s^2 to every F_i of both
  // regimes, so the difference profile and the argmin are untouched.
  auto ou = make_ou_model();
  ParamSchedule sched({{0.6, vec1(1.0), vec2(1.0, 2.0)}, {1.0, vec1(1.3), vec2(1.0, 2.0)}});
  Path p = simulate_ou_exact(sched, 2.0, 400, 0.05, 5);
  auto base = estimate_tau_alpha(p, ou, vec1(1.0), vec1(1.3), true);
  REQUIRE(base.profile.size() == 401);

  Path scaled = p;
  scaled.x *= 3.0;
  auto mapped = estimate_tau_alpha(scaled, ou, vec1(3.0), vec1(3.9), true);
  CHECK(mapped.index_hat == base.index_hat);
  for (std::size_t i = 0; i < base.profile.size(); ++i) {
    CHECK(mapped.profile[i] == doctest::Approx(base.profile[i]).epsilon(1e-9));
  }
}

TEST_CASE("tau_alpha accuracy on the benchmark change") {
  auto ou = make_ou_model();
  const std::int64_t n = 100000;
  const double h = std::pow(static_cast<double>(n), -0.52);
  ParamSchedule sched({{0.8, vec1(1.0), vec2(1.0, 2.0)}, {1.0, vec1(1.2), vec2(1.0, 2.0)}});
  std::vector<double> errs;
  for (int rep = 0; rep < 20; ++rep) {
    Path p = simulate_ou_exact(sched, 2.0, n, h, derive_seed(107, rep));
    auto a1 = estimate_alpha(p, ou, {0, n / 8});
    auto a2 = estimate_alpha(p, ou, {7 * n / 8, n});
    auto est = estimate_tau_alpha(p, ou, *a1.alpha_hat, *a2.alpha_hat);
    errs.push_back(std::abs(est.tau_hat - 0.8));
  }
  CHECK(mean_of(errs) <= 0.005);
}

TEST_CASE("exclusion window epsilon rule") {
  auto w = exclusion_window(1000000, 0.8, vec1(1.0), vec1(1.2));
  CHECK(w.epsilon1 == doctest::Approx(0.45));
  CHECK(w.tau_lower == doctest::Approx(0.8 - std::pow(1e6, -0.45)).epsilon(1e-12));
  CHECK(!w.clamped);

  double diff = std::pow(1e6, -0.3);
  auto w2 = exclusion_window(1000000, 0.5, vec1(1.0), vec1(1.0 + diff));
  CHECK(w2.epsilon1 == doctest::Approx(0.36).epsilon(1e-12));

  auto w3 = exclusion_window(1000, 0.999, vec1(1.0), vec1(1.5));
  CHECK(w3.clamped);
  CHECK(w3.tau_upper == doctest::Approx(1.0 - 1.0 / 1000.0));
  CHECK(w3.tau_lower < w3.tau_upper);

  CHECK_THROWS_AS(exclusion_window(1000, 0.5, vec1(1.0), vec1(1.0)), NumericError);
  CHECK_THROWS_AS(exclusion_window(5, 0.5, vec1(1.0), vec1(1.2)), ConfigError);
}

TEST_CASE("epsilon1 never decreases in the change magnitude") {
  double prev = 0.0;
  for (double diff : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 2.0}) {
    auto w = exclusion_window(100000, 0.5, vec1(1.0), vec1(1.0 + diff));
    CHECK(w.epsilon1 >= prev);
    prev = w.epsilon1;
  }
}

TEST_CASE("tau_beta matches exhaustive recomputation") {
  auto ou = make_ou_model();
  for (int trial = 0; trial < 10; ++trial) {
    ParamSchedule sched({{0.4, vec1(1.0), vec2(1.0, 1.2)}, {1.0, vec1(1.0), vec2(1.0, 2.0)}});
    Path p = simulate_ou_exact(sched, 2.0, 500, 0.05, derive_seed(211, trial));
    ExclusionWindow w;
    w.epsilon1 = 0.45;
    w.tau_lower = 0.8;
    w.tau_upper = 0.9;
    auto est = estimate_tau_beta(p, ou, WindowSide::left, w, vec1(1.0), vec2(1.0, 1.2),
                                 vec2(1.0, 2.0));
    CHECK(est.index_hat ==
          brute_force_tau_beta_left(p, ou, 400, vec1(1.0), vec2(1.0, 1.2), vec2(1.0, 2.0)));
    CHECK(est.window.lo == 0);
    CHECK(est.window.hi == 400);
  }
}

TEST_CASE("tau_beta right side scans the upper window") {
  auto ou = make_ou_model();
  ParamSchedule sched({{0.7, vec1(1.0), vec2(1.0, 2.0)}, {1.0, vec1(1.0), vec2(1.0, 1.0)}});
  Path p = simulate_ou_exact(sched, 2.0, 2000, 0.05, 17);
  ExclusionWindow w;
  w.tau_lower = 0.3;
  w.tau_upper = 0.4;
  auto est = estimate_tau_beta(p, ou, WindowSide::right, w, vec1(1.0), vec2(1.0, 2.0),
                               vec2(1.0, 1.0));
  CHECK(est.window.lo == 800);
  CHECK(est.window.hi == 2000);
  CHECK(est.index_hat >= 800);
  CHECK(std::abs(est.tau_hat - 0.7) < 0.05);
}

TEST_CASE("tau_beta accuracy, model 1 fixed-change benchmark") {
  auto ou = make_ou_model();
  const std::int64_t n = 100000;
  const double h = std::pow(static_cast<double>(n), -0.52);
  ParamSchedule sched({{0.4, vec1(1.0), vec2(1.0, 1.5)},
                       {0.8, vec1(1.0), vec2(1.0, 2.0)},
                       {1.0, vec1(1.2), vec2(1.0, 2.0)}});
  std::vector<double> errs;
  for (int rep = 0; rep < 15; ++rep) {
    Path p = simulate_ou_exact(sched, 2.0, n, h, derive_seed(223, rep));
    ExclusionWindow w = exclusion_window(n, 0.8, vec1(1.0), vec1(1.2));
    auto m = static_cast<std::int64_t>(std::floor(w.tau_lower * n));
    auto c = static_cast<std::int64_t>(std::floor(0.25 * m));
    auto b1 = estimate_beta(p, ou, {0, c}, vec1(1.0));
    auto b2 = estimate_beta(p, ou, {m - c, m}, vec1(1.0));
    auto est =
        estimate_tau_beta(p, ou, WindowSide::left, w, vec1(1.0), *b1.beta_hat, *b2.beta_hat);
    errs.push_back(std::abs(est.tau_hat - 0.4));
  }
  CHECK(mean_of(errs) <= 0.08);
}

TEST_CASE("tau_beta accuracy, model 2 fixed-change benchmark") {
  auto hyp = make_hyperbolic_model();
  const std::int64_t n = 100000;
  const double h = std::pow(static_cast<double>(n), -0.52);
  ParamSchedule sched({{0.4, vec1(1.05), vec2(1.0, 2.0)},
                       {0.7, vec1(1.0), vec2(1.0, 2.0)},
                       {1.0, vec1(1.0), vec2(0.5, 2.0)}});
  std::vector<double> errs;
  for (int rep = 0; rep < 10; ++rep) {
    Path p = simulate_path(hyp, sched, vec1(1.0), n, h, 8, derive_seed(227, rep));
    ExclusionWindow w = exclusion_window(n, 0.4, vec1(1.05), vec1(1.0));
    auto lo = static_cast<std::int64_t>(std::floor(w.tau_upper * n));
    auto width = n - lo;
    auto c = static_cast<std::int64_t>(std::floor(0.25 * width));
    auto b1 = estimate_beta(p, hyp, {lo, lo + c}, vec1(1.0));
    auto b2 = estimate_beta(p, hyp, {n - c, n}, vec1(1.0));
    auto est =
        estimate_tau_beta(p, hyp, WindowSide::right, w, vec1(1.0), *b1.beta_hat, *b2.beta_hat);
    errs.push_back(std::abs(est.tau_hat - 0.7));
  }
  CHECK(mean_of(errs) <= 0.1);
}

TEST_CASE("J for the ou model, analytic and monte carlo") {
  // mu = N(gamma, alpha^2/(2 beta)); pure-gamma direction gives beta^2/alpha^2
  // and pure-beta direction gives 1/(2 beta).
  CHECK(compute_J_ou_analytic(vec1(1.0), vec2(1.0, 2.0), vec2(0.0, 1.0)) == doctest::Approx(1.0));
  CHECK(compute_J_ou_analytic(vec1(1.0), vec2(1.0, 2.0), vec2(1.0, 0.0)) == doctest::Approx(0.5));
  CHECK(compute_J_ou_analytic(vec1(1.0), vec2(1.0, 2.0), vec2(0.0, -1.0)) ==
        doctest::Approx(1.0));

  auto ou = make_ou_model();
  InvariantSamplerConfig sampler;
  sampler.seed = 19;
  double j_gamma = compute_J(ou, vec1(1.0), vec2(1.0, 2.0), vec2(0.0, 1.0), sampler, 20000);
  CHECK(j_gamma == doctest::Approx(1.0).epsilon(0.03));
  double j_beta = compute_J(ou, vec1(1.0), vec2(1.0, 2.0), vec2(1.0, 0.0), sampler, 60000);
  CHECK(j_beta == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("limit argmin sample is symmetric and centered") {
  auto sample = sample_limit_argmin(1.0, 10000, 50.0, 0.01, 23, 2);
  CHECK(sample.boundary_fraction < 0.01);
  double med = median_of(sample.values);
  CHECK(std::abs(med) < 0.5);
  double mean = mean_of(sample.values);
  double stderr_mean = sd_of(sample.values) / std::sqrt(10000.0);
  CHECK(std::abs(mean) < 3.0 * stderr_mean);
}

TEST_CASE("limit argmin scales as 1/J") {
  auto base = sample_limit_argmin(1.0, 10000, 50.0, 0.01, 29, 2);
  auto scaled = sample_limit_argmin(2.0, 10000, 25.0, 0.005, 31, 2);
  std::vector<double> mapped;
  for (double v : scaled.values) mapped.push_back(2.0 * v);
  CHECK(ks_distance(base.values, mapped) < 0.03);
}

TEST_CASE("limit argmin is stable under grid refinement") {
  auto coarse = sample_limit_argmin(1.0, 8000, 40.0, 0.02, 37, 2);
  auto fine = sample_limit_argmin(1.0, 8000, 40.0, 0.01, 41, 2);
  CHECK(ks_distance(coarse.values, fine.values) < 0.02);
}

TEST_CASE("limit argmin boundary guard") {
  CHECK_THROWS_AS(sample_limit_argmin(1.0, 500, 0.5, 0.01, 43, 1), NumericError);
  CHECK_THROWS_AS(sample_limit_argmin(-1.0, 10, 50.0, 0.01, 1, 1), ConfigError);
}
