#include "sdecp/cusum.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "sdecp/simulate.hpp"

namespace sdecp {

namespace {

const std::map<std::pair<int, double>, double>& builtin_cv_table() {
  static const std::map<std::pair<int, double>, double> table = {
      {{1, 0.05}, 1.3617},
      {{2, 0.05}, 1.5736},
  };
  return table;
}

double mc_critical_value(int k, double eps, const MonteCarloCvConfig& cfg) {
  using Key = std::tuple<int, double, std::int64_t, std::int64_t, std::uint64_t>;
  static std::map<Key, double> cache;
  static std::mutex mutex;
  Key key{k, eps, cfg.grid, cfg.reps, cfg.seed};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto sample = sample_brownian_bridge_sup(k, cfg.grid, cfg.reps, cfg.seed, cfg.threads);
  // Empirical upper-eps point: order statistic ceil((1-eps) * reps), 1-based.
  auto idx = static_cast<std::int64_t>(
      std::ceil((1.0 - eps) * static_cast<double>(cfg.reps)));
  idx = std::min(std::max<std::int64_t>(idx, 1), cfg.reps);
  double value = sample[static_cast<std::size_t>(idx - 1)];
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, value);
  return value;
}

}  // namespace

double critical_value(int k, double eps, const CriticalValueSource& source) {
  if (k < 1) throw ConfigError("critical_value: k must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("critical_value: eps must be in (0, 1)");
  if (source.kind == CriticalValueSource::Kind::table) {
    auto it = builtin_cv_table().find({k, eps});
    if (it != builtin_cv_table().end()) return it->second;
  }
  return mc_critical_value(k, eps, source.mc);
}

CusumSup cusum_sup(const Matrix& values, double scale, const Matrix* weight) {
  const std::int64_t m = values.rows();
  const Eigen::Index k = values.cols();
  if (m < 2) throw DataError("cusum_sup: need at least 2 elements");
  if (!(scale > 0.0)) throw ConfigError("cusum_sup: scale must be positive");
  if (weight && (weight->rows() != k || weight->cols() != k)) {
    throw ConfigError("cusum_sup: weight dimension mismatch");
  }

  Vector total = values.colwise().sum();
  Vector prefix = Vector::Zero(k);
  Vector bridge(k), mapped(k);
  CusumSup best{-1.0, 1};
  for (std::int64_t j = 1; j <= m; ++j) {
    prefix += values.row(j - 1);
    double frac = static_cast<double>(j) / static_cast<double>(m);
    bridge = prefix - frac * total;
    double norm = 0.0;
    if (weight) {
      mapped.noalias() = (*weight) * bridge;
      norm = mapped.norm();
    } else {
      norm = bridge.norm();
    }
    double value = scale * norm;
    if (value > best.sup) best = {value, j};
  }
  return best;
}

namespace {

// Shared residual walk: calls fn(i, A_inv or a_inv related quantities). Each
// statistic below keeps its own loop since the per-step algebra differs.
void check_range(const Path& path, IndexRange range, const char* who, std::int64_t min_len = 2) {
  if (range.lo < 0 || range.hi > path.n() || range.length() < min_len) {
    std::ostringstream os;
    os << who << ": invalid increment range (" << range.lo << ", " << range.hi << "]";
    throw DataError(os.str());
  }
}

Matrix invert_A(const Matrix& A, std::int64_t index, const char* who) {
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << who << ": singular A at increment " << index;
    throw NumericError(os.str());
  }
  return lu.inverse();
}

}  // namespace

TestResult t_alpha_range(const Path& path, const DiffusionModel& model, IndexRange range,
                         const Vector& alpha_hat, double level, const CriticalValueSource& cv) {
  check_range(path, range, "t_alpha");
  const std::int64_t m = range.length();
  const int d = model.state_dim;

  Matrix eta(m, 1);
  Matrix a(d, model.noise_dim);
  Vector x(d), dx(d);
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    dx = path.x.row(i) - path.x.row(i - 1);
    model.diffusion(x, alpha_hat, a);
    Matrix A = a * a.transpose();
    Matrix A_inv = invert_A(A, i, "t_alpha");
    eta(i - range.lo - 1, 0) = (dx.transpose() * A_inv * dx).value() / path.h;
  }

  double scale = 1.0 / std::sqrt(2.0 * d * static_cast<double>(m));
  CusumSup sup = cusum_sup(eta, scale);

  TestResult res;
  res.statistic = sup.sup;
  res.argmax_index = range.lo + sup.argmax;
  res.dim = 1;
  res.level = level;
  res.critical_value = critical_value(1, level, cv);
  res.reject = res.statistic > res.critical_value;
  res.window = range;
  return res;
}

TestResult t_alpha(const Path& path, const DiffusionModel& model, const Vector& alpha_hat,
                   double level, const CriticalValueSource& cv) {
  return t_alpha_range(path, model, path.full_range(), alpha_hat, level, cv);
}

Vector xi_sequence(const Path& path, const DiffusionModel& model, IndexRange range,
                   const Vector& alpha, const Vector& beta) {
  check_range(path, range, "xi_sequence", 1);
  if (!model.drift_tests_supported()) {
    throw ConfigError("xi_sequence: drift tests require r = d");
  }
  const int d = model.state_dim;
  const std::int64_t m = range.length();

  Vector xi(m);
  Matrix a(d, d);
  Vector x(d), b(d), resid(d);
  Vector ones = Vector::Ones(d);
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    model.drift(x, beta, b);
    model.diffusion(x, alpha, a);
    resid = (path.x.row(i) - path.x.row(i - 1)).transpose() - path.h * b;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) {
      std::ostringstream os;
      os << "xi_sequence: singular a at increment " << i;
      throw NumericError(os.str());
    }
    xi[i - range.lo - 1] = ones.dot(lu.solve(resid));
  }
  return xi;
}

Matrix zeta_sequence(const Path& path, const DiffusionModel& model, IndexRange range,
                     const Vector& alpha, const Vector& beta) {
  check_range(path, range, "zeta_sequence", 1);
  const int d = model.state_dim;
  const int q = model.beta_dim;
  const std::int64_t m = range.length();

  Matrix zeta(m, q);
  Matrix a(d, model.noise_dim), jac(d, q);
  Vector x(d), b(d), resid(d);
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    model.drift(x, beta, b);
    model.diffusion(x, alpha, a);
    model.drift_jac_beta(x, beta, jac);
    resid = (path.x.row(i) - path.x.row(i - 1)).transpose() - path.h * b;
    Matrix A = a * a.transpose();
    Matrix A_inv = invert_A(A, i, "zeta_sequence");
    zeta.row(i - range.lo - 1) = (jac.transpose() * A_inv * resid).transpose();
  }
  return zeta;
}

FisherWeight fisher_weight(const Path& path, const DiffusionModel& model, IndexRange range,
                           const Vector& alpha, const Vector& beta) {
  check_range(path, range, "fisher_weight", 1);
  const int d = model.state_dim;
  const int q = model.beta_dim;

  Matrix sum = Matrix::Zero(q, q);
  Matrix a(d, model.noise_dim), jac(d, q);
  Vector x(d);
  for (std::int64_t i = range.lo + 1; i <= range.hi; ++i) {
    x = path.x.row(i - 1);
    model.diffusion(x, alpha, a);
    model.drift_jac_beta(x, beta, jac);
    Matrix A = a * a.transpose();
    Matrix A_inv = invert_A(A, i, "fisher_weight");
    sum.noalias() += jac.transpose() * A_inv * jac;
  }
  FisherWeight w;
  w.matrix = ((sum + sum.transpose()) / (2.0 * static_cast<double>(range.length()))).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(w.matrix);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  w.min_eigenvalue = lo;
  w.condition = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
  w.singular = !(lo > 1e-12 * std::max(hi, 1.0)) || w.condition > 1e12;
  return w;
}

Matrix inv_sqrt_psd(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw NumericError("inv_sqrt_psd: eigendecomposition failed");
  Vector vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < floor) {
      std::ostringstream os;
      os << "inv_sqrt_psd: eigenvalue " << vals[i] << " below floor " << floor;
      throw NumericError(os.str());
    }
  }
  return es.eigenvectors() * vals.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

namespace {

IndexRange drift_window(const Path& path, WindowSide side, double boundary_fraction) {
  auto n = path.n();
  auto split = static_cast<std::int64_t>(std::floor(boundary_fraction * static_cast<double>(n)));
  IndexRange r = (side == WindowSide::left) ? IndexRange{0, split} : IndexRange{split, n};
  if (r.length() < 100) {
    std::ostringstream os;
    os << "drift test: window too short (" << r.length() << " increments, need >= 100)";
    throw DataError(os.str());
  }
  return r;
}

double drift_time_span(const Path& path, WindowSide side, double boundary_fraction) {
  double T = path.total_time();
  return (side == WindowSide::left) ? boundary_fraction * T : (1.0 - boundary_fraction) * T;
}

}  // namespace

TestResult t1_drift_range(const Path& path, const DiffusionModel& model, IndexRange range,
                          double time_span, const Vector& alpha, const Vector& beta, double level,
                          const CriticalValueSource& cv) {
  if (!(time_span > 0.0)) throw ConfigError("t1_drift: non-positive time span");
  Vector xi = xi_sequence(path, model, range, alpha, beta);
  double scale = 1.0 / std::sqrt(static_cast<double>(model.state_dim) * time_span);
  CusumSup sup = cusum_sup(xi, scale);

  TestResult res;
  res.statistic = sup.sup;
  res.argmax_index = range.lo + sup.argmax;
  res.dim = 1;
  res.level = level;
  res.critical_value = critical_value(1, level, cv);
  res.reject = res.statistic > res.critical_value;
  res.window = range;
  return res;
}

TestResult t1_drift(const Path& path, const DiffusionModel& model, WindowSide side,
                    double boundary_fraction, const Vector& alpha, const Vector& beta,
                    double level, const CriticalValueSource& cv) {
  IndexRange range = drift_window(path, side, boundary_fraction);
  return t1_drift_range(path, model, range, drift_time_span(path, side, boundary_fraction), alpha,
                        beta, level, cv);
}

TestResult t2_drift_range(const Path& path, const DiffusionModel& model, IndexRange range,
                          double time_span, const Vector& alpha, const Vector& beta, double level,
                          const CriticalValueSource& cv) {
  if (!(time_span > 0.0)) throw ConfigError("t2_drift: non-positive time span");
  if (!model.drift_tests_supported()) {
    throw ConfigError("t2_drift: drift tests require r = d");
  }
  Matrix zeta = zeta_sequence(path, model, range, alpha, beta);
  FisherWeight w = fisher_weight(path, model, range, alpha, beta);
  if (w.singular) {
    std::ostringstream os;
    os << "t2_drift: singular weight matrix (condition " << w.condition << ")";
    throw NumericError(os.str());
  }
  Matrix w_inv_sqrt = inv_sqrt_psd(w.matrix);
  double scale = 1.0 / std::sqrt(time_span);
  CusumSup sup = cusum_sup(zeta, scale, &w_inv_sqrt);

  TestResult res;
  res.statistic = sup.sup;
  res.argmax_index = range.lo + sup.argmax;
  res.dim = model.beta_dim;
  res.level = level;
  res.critical_value = critical_value(model.beta_dim, level, cv);
  res.reject = res.statistic > res.critical_value;
  res.window = range;
  return res;
}

TestResult t2_drift(const Path& path, const DiffusionModel& model, WindowSide side,
                    double boundary_fraction, const Vector& alpha, const Vector& beta,
                    double level, const CriticalValueSource& cv) {
  IndexRange range = drift_window(path, side, boundary_fraction);
  return t2_drift_range(path, model, range, drift_time_span(path, side, boundary_fraction), alpha,
                        beta, level, cv);
}

double same_point_statistic(const Vector& beta1, const Vector& beta2, double total_time) {
  if (beta1.size() != beta2.size()) {
    throw DataError("same_point_statistic: dimension mismatch");
  }
  if (!(total_time > 0.0)) throw ConfigError("same_point_statistic: T must be positive");
  return std::sqrt(total_time) * (beta1 - beta2).norm();
}

}  // namespace sdecp
