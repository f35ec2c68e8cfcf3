#include <cmath>

#include "doctest.h"
#include "sdecp/experiment.hpp"
#include "sdecp/model.hpp"
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

std::vector<double> terminal_values(const DiffusionModel& model, const ParamSchedule& sched,
                                    int n_paths, std::int64_t n, double h, int substeps,
                                    std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    Path path = simulate_path(model, sched, vec1(0.0), n, h, substeps, derive_seed(seed, p));
    out.push_back(path.x(n, 0));
  }
  return out;
}

}  // namespace

TEST_CASE("zero noise at the drift fixed point gives a constant path") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(0.0), vec2(1.0, 2.0));
  Path path = simulate_path(ou, sched, vec1(2.0), 100, 0.05, 4, 1);
  for (std::int64_t i = 0; i <= 100; ++i) CHECK(path.x(i, 0) == 2.0);
}

TEST_CASE("identical seeds give bitwise-identical paths") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  Path a = simulate_path(ou, sched, vec1(2.0), 500, 0.01, 8, 42);
  Path b = simulate_path(ou, sched, vec1(2.0), 500, 0.01, 8, 42);
  CHECK(a.x == b.x);
  Path c = simulate_path(ou, sched, vec1(2.0), 500, 0.01, 8, 43);
  CHECK(a.x != c.x);
}

TEST_CASE("euler path with substeps matches the exact ou transition in law") {
  // Terminal-value samples over 500 seeds; two-sample KS below 0.08.
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 0.0));
  const std::int64_t n = 10000;
  const double h = 1e-2;
  auto euler = terminal_values(ou, sched, 500, n, h, 32, 7);
  std::vector<double> exact;
  for (int p = 0; p < 500; ++p) {
    exact.push_back(simulate_ou_exact(sched, 0.0, n, h, derive_seed(1007, p)).x(n, 0));
  }
  CHECK(ks_distance(euler, exact) < 0.08);
}

TEST_CASE("doubling substeps tightens the euler law toward the exact one") {
  // Coarse step so the Euler bias dominates the KS noise floor.
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 0.0));
  const std::int64_t n = 150;
  const double h = 0.8;
  std::vector<double> exact;
  for (int p = 0; p < 2500; ++p) {
    exact.push_back(simulate_ou_exact(sched, 0.0, n, h, derive_seed(9001, p)).x(n, 0));
  }
  std::vector<double> ks;
  for (int substeps : {1, 2, 4, 8, 32}) {
    auto sample = terminal_values(ou, sched, 2500, n, h, substeps, 950 + substeps);
    ks.push_back(ks_distance(sample, exact));
  }
  CHECK(ks.front() > ks.back());
  double first_half = ks[0] + ks[1];
  double second_half = ks[3] + ks[4];
  CHECK(first_half > second_half);
}

TEST_CASE("exact ou sampler hits the stationary law") {
  // Long path, second half compared against N(gamma, alpha^2 / (2 beta)).
  const double beta = 2.0, gamma = 2.0, alpha = 1.0;
  auto sched = ParamSchedule::constant(vec1(alpha), vec2(beta, gamma));
  const std::int64_t n = 100000;
  const double h = 0.01;
  Path path = simulate_ou_exact(sched, 2.0, n, h, 5);

  double mean = 0.0;
  std::int64_t m = 0;
  for (std::int64_t i = n / 2; i <= n; ++i) {
    mean += path.x(i, 0);
    ++m;
  }
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (std::int64_t i = n / 2; i <= n; ++i) {
    var += (path.x(i, 0) - mean) * (path.x(i, 0) - mean);
  }
  var /= static_cast<double>(m - 1);

  // MC stderr of the mean with autocorrelation ~ sqrt(var * 2 / (beta T)).
  double T_half = static_cast<double>(n / 2) * h;
  double stderr_mean = std::sqrt(alpha * alpha / (beta * beta * T_half));
  CHECK(std::abs(mean - gamma) < 3.0 * stderr_mean);
  CHECK(var == doctest::Approx(alpha * alpha / (2.0 * beta)).epsilon(0.05));
}

TEST_CASE("exact ou sampler with zero alpha decays deterministically") {
  auto sched = ParamSchedule::constant(vec1(0.0), vec2(1.5, 2.0));
  const double h = 0.1;
  Path path = simulate_ou_exact(sched, 5.0, 10, h, 1);
  CHECK(path.x(1, 0) == doctest::Approx(2.0 + 3.0 * std::exp(-1.5 * h)).epsilon(1e-12));
  CHECK(path.x(10, 0) == doctest::Approx(2.0 + 3.0 * std::exp(-1.5 * 10 * h)).epsilon(1e-12));
  CHECK_THROWS_AS(simulate_ou_exact(ParamSchedule::constant(vec1(1.0), vec2(-1.0, 0.0)), 0.0, 10,
                                    0.1, 1),
                  ConfigError);
}

TEST_CASE("parameter switch lands exactly on the observation grid") {
  // alpha = 0 throughout; gamma jumps at fraction 0.6 of n = 10, i.e. the
  // drift changes from increment 7 onward.
  auto ou = make_ou_model();
  ParamSchedule sched({{0.6, vec1(0.0), vec2(100.0, 1.0)}, {1.0, vec1(0.0), vec2(100.0, 2.0)}});
  Path path = simulate_path(ou, sched, vec1(1.0), 10, 0.05, 64, 1);
  for (std::int64_t i = 0; i <= 6; ++i) CHECK(path.x(i, 0) == doctest::Approx(1.0));
  CHECK(path.x(10, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(path.x(6, 0) < 1.0 + 1e-9);
  CHECK(path.x(7, 0) > 1.5);  // strong mean reversion pulls to the new gamma
}

TEST_CASE("explosion reports the first bad index") {
  DiffusionModel m = make_ou_model();
  m.drift = [](const Vector& x, const Vector&, Eigen::Ref<Vector> out) {
    out[0] = x[0] * x[0] * x[0];  // super-linear growth explodes
  };
  auto sched = ParamSchedule::constant(vec1(0.1), vec2(1.0, 0.0));
  CHECK_THROWS_AS(simulate_path(m, sched, vec1(5.0), 200, 0.5, 1, 3), NumericError);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(ParamSchedule({{0.5, vec1(1.0), vec2(1.0, 2.0)}}), ConfigError);
  CHECK_THROWS_AS(ParamSchedule({{0.7, vec1(1.0), vec2(1.0, 2.0)},
                                 {0.7, vec1(1.0), vec2(1.0, 2.0)},
                                 {1.0, vec1(1.0), vec2(1.0, 2.0)}}),
                  ConfigError);
  auto ou = make_ou_model();
  ParamSchedule bad_dim({{1.0, vec2(1.0, 1.0), vec2(1.0, 2.0)}});
  CHECK_THROWS_AS(bad_dim.validate_against(ou), ConfigError);
}

TEST_CASE("bridge sup sample is nonnegative, finite and sorted") {
  auto sample = sample_brownian_bridge_sup(1, 500, 400, 11);
  CHECK(sample.size() == 400);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    CHECK(sample[i] >= 0.0);
    CHECK(std::isfinite(sample[i]));
    if (i > 0) CHECK(sample[i] >= sample[i - 1]);
  }
}

TEST_CASE("bridge is pinned to zero at both endpoints") {
  // With a single lattice point the only evaluation site is s = 1, where the
  // construction W(s) - s W(1) vanishes identically.
  auto sample = sample_brownian_bridge_sup(3, 1, 50, 13);
  for (double v : sample) CHECK(v == 0.0);
}

TEST_CASE("bridge sample does not depend on the thread count") {
  auto serial = sample_brownian_bridge_sup(2, 200, 300, 17, 1);
  auto parallel = sample_brownian_bridge_sup(2, 200, 300, 17, 4);
  CHECK(serial == parallel);
}

TEST_CASE("bridge sup quantiles match the tabulated critical values") {
  // Reduced replication count; the acceptance suite runs the full version.
  auto s1 = sample_brownian_bridge_sup(1, 2000, 4000, 19, 2);
  auto s2 = sample_brownian_bridge_sup(2, 2000, 4000, 19, 2);
  CHECK(s1[static_cast<std::size_t>(0.95 * 4000) - 1] == doctest::Approx(1.3617).epsilon(0.03));
  CHECK(s2[static_cast<std::size_t>(0.95 * 4000) - 1] == doctest::Approx(1.5736).epsilon(0.03));
}

TEST_CASE("csv round trip preserves the path bit-exactly") {
  auto ou = make_ou_model();
  auto sched = ParamSchedule::constant(vec1(1.0), vec2(1.0, 2.0));
  Path path = simulate_path(ou, sched, vec1(2.0), 300, 1e-3, 2, 23);
  std::string file = "roundtrip_test_path.csv";
  write_path_csv(path, file);
  Path back = read_path_csv(file);
  CHECK(back.h == doctest::Approx(path.h).epsilon(1e-12));
  CHECK(back.x == path.x);
  std::remove(file.c_str());
}
