#include <cmath>
#include <random>

#include "doctest.h"
#include "sdecp/changepoint.hpp"
#include "sdecp/cusum.hpp"
#include "sdecp/estimate.hpp"
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

Matrix column(std::vector<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return m;
}

Path path_from_values(std::vector<double> xs, double h) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return Path(h, std::move(m));
}

// Independent O(m^2) recomputation of the CUSUM supremum.
CusumSup brute_force_cusum(const Matrix& values, double scale, const Matrix* weight) {
  const std::int64_t m = values.rows();
  CusumSup best{-1.0, 1};
  for (std::int64_t j = 1; j <= m; ++j) {
    Vector s = Vector::Zero(values.cols());
    for (std::int64_t i = 0; i < j; ++i) s += values.row(i);
    Vector total = Vector::Zero(values.cols());
    for (std::int64_t i = 0; i < m; ++i) total += values.row(i);
    Vector bridge = s - (static_cast<double>(j) / static_cast<double>(m)) * total;
    double v = scale * (weight ? (*weight * bridge).norm() : bridge.norm());
    if (v > best.sup) best = {v, j};
  }
  return best;
}

}  // namespace

TEST_CASE("cusum hand examples") {
  CHECK(cusum_sup(column({3.0, 3.0, 3.0, 3.0}), 1.0).sup == doctest::Approx(0.0));

  auto r = cusum_sup(column({0, 0, 0, 0, 2, 2, 2, 2}), 1.0 / std::sqrt(16.0));
  CHECK(r.sup == doctest::Approx(1.0));
  CHECK(r.argmax == 4);
}

TEST_CASE("the final bridge point is exactly zero") {
  auto gen = make_stream(3, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    v(i, 0) = normal(gen);
    v(i, 1) = normal(gen);
  }
  Vector total = v.colwise().sum();
  Vector last_bridge = total - 1.0 * total;
  CHECK(last_bridge.norm() == 0.0);
}

TEST_CASE("cusum is invariant under constant shifts") {
  auto gen = make_stream(5, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix v(200, 3);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(gen);
    Matrix shifted = v;
    Vector c(3);
    c << normal(gen) * 10, normal(gen) * 10, normal(gen) * 10;
    shifted.rowwise() += c.transpose();
    auto a = cusum_sup(v, 0.3);
    auto b = cusum_sup(shifted, 0.3);
    CHECK(b.sup == doctest::Approx(a.sup).epsilon(1e-9));
    CHECK(b.argmax == a.argmax);
  }
}

TEST_CASE("cusum equals the quadratic brute force") {
  auto gen = make_stream(7, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 400);
  for (int trial = 0; trial < 25; ++trial) {
    int m = len(gen);
    Matrix v(m, 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(gen);
    Matrix w = Matrix::Identity(2, 2);
    w(0, 1) = 0.3;
    auto fast = cusum_sup(v, 0.25, &w);
    auto slow = brute_force_cusum(v, 0.25, &w);
    CHECK(fast.sup == doctest::Approx(slow.sup).epsilon(1e-9));
    CHECK(fast.argmax == slow.argmax);
  }
}

TEST_CASE("xi sequence values") {
  auto ou = make_ou_model();

  // Increments exactly h * b: residuals all zero.
  auto sched = ParamSchedule::constant(vec1(0.0), vec2(1.0, 2.0));
  Path det = simulate_path(ou, sched, vec1(4.0), 60, 0.1, 1, 1);
  Vector xi = xi_sequence(det, ou, det.full_range(), vec1(1.0), vec2(1.0, 2.0));
  CHECK(xi.cwiseAbs().maxCoeff() < 1e-12);

  // d = 1, a = 2, residual 1 with zero drift at x = gamma: 1/2.
  Path p = path_from_values({2.0, 3.0, 3.0}, 1.0);
  Vector xi2 = xi_sequence(p, ou, {0, 1}, vec1(2.0), vec2(1.0, 2.0));
  CHECK(xi2[0] == doctest::Approx(0.5));
}

TEST_CASE("xi sums residual components through 1_d") {
  DiffusionModel m;
  m.name = "flat2d";
  m.state_dim = m.noise_dim = 2;
  m.alpha_dim = 1;
  m.beta_dim = 1;
  m.drift = [](const Vector&, const Vector&, Eigen::Ref<Vector> out) { out.setZero(); };
  m.diffusion = [](const Vector&, const Vector&, Eigen::Ref<Matrix> out) { out.setIdentity(); };
  m.drift_jac_beta = [](const Vector&, const Vector&, Eigen::Ref<Matrix> out) { out.setZero(); };
  m.alpha_space = ParamBox(vec1(0.5), vec1(2.0));
  m.beta_space = ParamBox(vec1(-1.0), vec1(1.0));

  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 2, 1, 2;
  Path p(1.0, x);
  Vector xi = xi_sequence(p, m, {0, 1}, vec1(1.0), vec1(0.0));
  CHECK(xi[0] == doctest::Approx(3.0));
}

TEST_CASE("xi rejects r != d") {
  DiffusionModel m;
  m.name = "wide";
  m.state_dim = 1;
  m.noise_dim = 2;
  m.alpha_dim = 1;
  m.beta_dim = 1;
  m.drift = [](const Vector&, const Vector&, Eigen::Ref<Vector> out) { out.setZero(); };
  m.diffusion = [](const Vector&, const Vector&, Eigen::Ref<Matrix> out) { out.setOnes(); };
  m.drift_jac_beta = [](const Vector&, const Vector&, Eigen::Ref<Matrix> out) { out.setZero(); };
  m.alpha_space = ParamBox(vec1(0.5), vec1(2.0));
  m.beta_space = ParamBox(vec1(-1.0), vec1(1.0));
  Path p = path_from_values({0.0, 1.0, 2.0}, 1.0);
  CHECK_THROWS_AS(xi_sequence(p, m, p.full_range(), vec1(1.0), vec1(0.0)), ConfigError);
  CHECK_THROWS_AS(
      t2_drift_range(p, m, p.full_range(), 2.0, vec1(1.0), vec1(0.0), 0.05, {}),
      ConfigError);
}

TEST_CASE("zeta residual mapping and alpha scaling") {
  auto ou = make_ou_model();
  // X = 3, (beta, gamma) = (1, 2), alpha = 1, residual 0.1:
  // Jacobian (-(x-gamma), beta) = (-1, 1), so zeta = (-0.1, 0.1).
  const double h = 1.0;
  double drift = -(3.0 - 2.0);  // b = -1
  Path p = path_from_values({3.0, 3.0 + h * drift + 0.1, 3.0}, h);
  Matrix zeta = zeta_sequence(p, ou, {0, 1}, vec1(1.0), vec2(1.0, 2.0));
  CHECK(zeta(0, 0) == doctest::Approx(-0.1));
  CHECK(zeta(0, 1) == doctest::Approx(0.1));

  // Scaling alpha by c scales zeta by 1/c^2.
  Matrix scaled = zeta_sequence(p, ou, {0, 1}, vec1(3.0), vec2(1.0, 2.0));
  CHECK(scaled(0, 0) == doctest::Approx(zeta(0, 0) / 9.0));
  CHECK(scaled(0, 1) == doctest::Approx(zeta(0, 1) / 9.0));

  // Perfect drift: zero vectors.
  auto sched = ParamSchedule::constant(vec1(0.0), vec2(1.0, 2.0));
  Path det = simulate_path(ou, sched, vec1(4.0), 40, 0.1, 1, 1);
  Matrix z = zeta_sequence(det, ou, det.full_range(), vec1(1.0), vec2(1.0, 2.0));
  CHECK(z.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fisher weight on a constant path is the rank-one gram matrix") {
  auto ou = make_ou_model();
  Path p = path_from_values(std::vector<double>(101, 3.0), 0.1);
  auto w = fisher_weight(p, ou, p.full_range(), vec1(1.0), vec2(1.5, 2.0));
  double dx = 3.0 - 2.0;
  CHECK(w.matrix(0, 0) == doctest::Approx(dx * dx));
  CHECK(w.matrix(0, 1) == doctest::Approx(-1.5 * dx));
  CHECK(w.matrix(1, 0) == doctest::Approx(-1.5 * dx));
  CHECK(w.matrix(1, 1) == doctest::Approx(1.5 * 1.5));
  CHECK(w.singular);
  CHECK(w.matrix == w.matrix.transpose());
  CHECK(w.min_eigenvalue > -1e-10);
}

TEST_CASE("fisher weight approaches the stationary gram matrix") {
  auto ou = make_ou_model();
  const double beta = 1.0, alpha = 1.0;
  auto sched = ParamSchedule::constant(vec1(alpha), vec2(beta, 2.0));
  Path p = simulate_ou_exact(sched, 2.0, 200000, 0.01, 83);
  auto w = fisher_weight(p, ou, p.full_range(), vec1(alpha), vec2(beta, 2.0));
  CHECK(!w.singular);
  CHECK(w.matrix(0, 0) == doctest::Approx(1.0 / (2.0 * beta)).epsilon(0.08));
  CHECK(w.matrix(1, 1) == doctest::Approx(beta * beta / (alpha * alpha)).epsilon(0.05));
  CHECK(std::abs(w.matrix(0, 1)) < 0.05);
}

TEST_CASE("weighted cusum is invariant under linear reparameterization") {
  auto gen = make_stream(11, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix zeta(500, 2);
  for (Eigen::Index i = 0; i < zeta.size(); ++i) zeta.data()[i] = normal(gen);
  Matrix info = Matrix::Zero(2, 2);
  for (Eigen::Index i = 0; i < zeta.rows(); ++i) {
    info += zeta.row(i).transpose() * zeta.row(i);
  }
  info /= static_cast<double>(zeta.rows());

  Matrix w = inv_sqrt_psd(info);
  auto base = cusum_sup(zeta, 0.1, &w);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix m(2, 2);
    m << 1.0 + normal(gen), normal(gen), normal(gen), 1.0 + normal(gen);
    if (std::abs(m.determinant()) < 0.1) continue;
    Matrix zm = zeta * m.transpose();
    Matrix conj = m * info * m.transpose();
    Matrix wm = inv_sqrt_psd(conj);
    auto mapped = cusum_sup(zm, 0.1, &wm);
    CHECK(mapped.sup == doctest::Approx(base.sup).epsilon(1e-8));
    CHECK(mapped.argmax == base.argmax);
  }
}

TEST_CASE("inv_sqrt_psd floors small eigenvalues") {
  Matrix m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;  // rank one
  CHECK_THROWS_AS(inv_sqrt_psd(m), NumericError);
  Matrix id = inv_sqrt_psd(Matrix::Identity(2, 2));
  CHECK(id.isIdentity(1e-12));
}

TEST_CASE("critical values from the builtin table") {
  CHECK(critical_value(1, 0.05, CriticalValueSource::table()) == 1.3617);
  CHECK(critical_value(2, 0.05, CriticalValueSource::table()) == 1.5736);
  CHECK_THROWS_AS(critical_value(0, 0.05, {}), ConfigError);
  CHECK_THROWS_AS(critical_value(1, 1.5, {}), ConfigError);
}

TEST_CASE("monte-carlo critical values agree with the table and are cached") {
  MonteCarloCvConfig mc;
  mc.grid = 2000;
  mc.reps = 4000;
  mc.threads = 2;
  double w1 = critical_value(1, 0.05, CriticalValueSource::monte_carlo(mc));
  CHECK(w1 == doctest::Approx(1.3617).epsilon(0.03));
  CHECK(critical_value(1, 0.05, CriticalValueSource::monte_carlo(mc)) == w1);

  // Median of the scalar bridge-sup law.
  double med = critical_value(1, 0.5, CriticalValueSource::monte_carlo(mc));
  CHECK(med == doctest::Approx(0.83).epsilon(0.04));
}

TEST_CASE("t_alpha on a constant-increment path is exactly zero") {
  auto ou = make_ou_model();
  std::vector<double> xs(2001);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 0.5 * static_cast<double>(i);
  Path p = path_from_values(xs, 1.0);
  auto res = t_alpha(p, ou, vec1(1.0), 0.05, {});
  CHECK(res.statistic == doctest::Approx(0.0));
  CHECK(!res.reject);
}

TEST_CASE("t_alpha detects a strong diffusion change on one path") {
  ParamSchedule sched({{0.8, vec1(1.0), vec2(1.0, 2.0)}, {1.0, vec1(1.2), vec2(1.0, 2.0)}});
  Path p = simulate_ou_exact(sched, 2.0, 100000, 0.0025, 87);
  auto ou = make_ou_model();
  auto alpha = estimate_alpha(p, ou, p.full_range());
  auto res = t_alpha(p, ou, *alpha.alpha_hat, 0.05, {});
  CHECK(res.reject);
  CHECK(res.statistic > 5.0);
  CHECK(std::abs(static_cast<double>(res.argmax_index) / 100000.0 - 0.8) < 0.05);
}

TEST_CASE("drift tests keep the null and flag a gamma change") {
  auto ou = make_ou_model();
  // Stationary window with no change: both tests should be quiet for this
  // seed; the size bands are asserted in the acceptance suite.
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  Path null_path = simulate_ou_exact(sched, 2.0, 50000, 0.005, 91);
  auto beta = estimate_beta(null_path, ou, {0, 40000}, vec1(1.0));
  auto t1 = t1_drift(null_path, ou, WindowSide::left, 0.8, vec1(1.0), *beta.beta_hat, 0.05, {});
  auto t2 = t2_drift(null_path, ou, WindowSide::left, 0.8, vec1(1.0), *beta.beta_hat, 0.05, {});
  CHECK(!t1.reject);
  CHECK(!t2.reject);
  CHECK(t1.dim == 1);
  CHECK(t2.dim == 2);
  CHECK(t2.critical_value == 1.5736);

  // Fixed gamma change inside the left window.
  ParamSchedule change({{0.4, vec1(1.0), vec2(1.0, 1.5)}, {1.0, vec1(1.0), vec2(1.0, 2.0)}});
  Path alt = simulate_ou_exact(change, 2.0, 50000, 0.005, 93);
  auto beta_alt = estimate_beta(alt, ou, {0, 40000}, vec1(1.0));
  auto t1_alt = t1_drift(alt, ou, WindowSide::left, 0.8, vec1(1.0), *beta_alt.beta_hat, 0.05, {});
  CHECK(t1_alt.reject);
  CHECK(t1_alt.statistic > t1.statistic);
}

TEST_CASE("window-side conventions and preconditions") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  Path p = simulate_ou_exact(sched, 2.0, 2000, 0.01, 95);
  auto beta = estimate_beta(p, ou, p.full_range(), vec1(1.0));

  auto left = t1_drift(p, ou, WindowSide::left, 0.6, vec1(1.0), *beta.beta_hat, 0.05, {});
  CHECK(left.window.lo == 0);
  CHECK(left.window.hi == 1200);
  auto right = t1_drift(p, ou, WindowSide::right, 0.6, vec1(1.0), *beta.beta_hat, 0.05, {});
  CHECK(right.window.lo == 1200);
  CHECK(right.window.hi == 2000);

  CHECK_THROWS_AS(t1_drift(p, ou, WindowSide::left, 0.01, vec1(1.0), *beta.beta_hat, 0.05, {}),
                  DataError);
}

TEST_CASE("same point statistic") {
  CHECK(same_point_statistic(vec2(1.0, 2.0), vec2(1.0, 2.0), 100.0) == 0.0);
  CHECK(same_point_statistic(vec2(1.3, 2.4), vec2(1.0, 2.0), 100.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(same_point_statistic(vec1(1.0), vec2(1.0, 2.0), 100.0), DataError);
}

TEST_CASE("reject flag is consistent with the critical value") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  for (std::uint64_t seed : {1, 2, 3}) {
    Path p = simulate_ou_exact(sched, 2.0, 5000, 0.01, 97 + seed);
    auto alpha = estimate_alpha(p, ou, p.full_range());
    auto res = t_alpha(p, ou, *alpha.alpha_hat, 0.05, {});
    CHECK(res.statistic >= 0.0);
    CHECK(res.reject == (res.statistic > res.critical_value));
  }
}

TEST_CASE("t2 flags a fixed drift change in the hyperbolic benchmark") {
  // Hyperbolic model, beta 1 -> 0.5 at tau = 0.7 in the right window, with
  // the diffusion change at tau = 0.4; desk-scale step rule n^{-0.52}.
  auto hyp = make_hyperbolic_model();
  const std::int64_t n = 100000;
  const double h = std::pow(static_cast<double>(n), -0.52);
  ParamSchedule sched({{0.4, vec1(1.05), vec2(1.0, 2.0)},
                       {0.7, vec1(1.0), vec2(1.0, 2.0)},
                       {1.0, vec1(1.0), vec2(0.5, 2.0)}});
  int rejected = 0;
  const int reps = 30;
  for (int rep = 0; rep < reps; ++rep) {
    Path p = simulate_path(hyp, sched, vec1(1.0), n, h, 8, derive_seed(313, rep));
    auto margin = static_cast<std::int64_t>(0.1 * n);
    auto a1 = estimate_alpha(p, hyp, {0, margin});
    auto a2 = estimate_alpha(p, hyp, {n - margin, n});
    ExclusionWindow w = exclusion_window(n, 0.4, *a1.alpha_hat, *a2.alpha_hat);
    auto lo = static_cast<std::int64_t>(std::floor(w.tau_upper * n));
    auto beta = estimate_beta(p, hyp, {lo, n}, *a2.alpha_hat);
    auto t2 = t2_drift(p, hyp, WindowSide::right, w.tau_upper, *a2.alpha_hat, *beta.beta_hat,
                       0.05, {});
    if (t2.reject) ++rejected;
  }
  CHECK(static_cast<double>(rejected) / reps >= 0.5);
}
