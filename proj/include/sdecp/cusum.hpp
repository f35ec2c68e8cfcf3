#pragma once

#include <cstdint>
#include <optional>

#include "sdecp/model.hpp"
#include "sdecp/path.hpp"

namespace sdecp {

// How critical values w_k(eps) are obtained. Table mode uses the builtin
// entries and falls back to Monte Carlo (cached) for pairs not tabulated.
struct MonteCarloCvConfig {
  std::int64_t grid = 10000;
  std::int64_t reps = 10000;
  std::uint64_t seed = 20240811;
  int threads = 1;
};

struct CriticalValueSource {
  enum class Kind { table, monte_carlo };
  Kind kind = Kind::table;
  MonteCarloCvConfig mc;

  static CriticalValueSource table() { return {}; }
  static CriticalValueSource monte_carlo(MonteCarloCvConfig cfg) {
    return {Kind::monte_carlo, cfg};
  }
};

// Upper-eps point of sup ||B_k^0||. Monte-Carlo results are memoized under a
// lock keyed by (k, eps, grid, reps, seed), so repeated lookups are cheap and
// thread-safe.
double critical_value(int k, double eps, const CriticalValueSource& source);

struct TestResult {
  double statistic = 0.0;
  std::int64_t argmax_index = 0;  // increment index within the scanned range
  int dim = 1;                    // k of the reference Brownian bridge
  double critical_value = 0.0;
  double level = 0.0;
  bool reject = false;
  IndexRange window;
};

struct CusumSup {
  double sup = 0.0;
  std::int64_t argmax = 0;  // 1-based position within the sequence
};

// max over 1 <= j <= m of scale * ||W (S_j - (j/m) S_m)|| for the prefix sums
// S_j of the rows of `values` (m x k), with optional fixed linear map W.
// Single O(m) pass; ties resolve to the smallest index.
CusumSup cusum_sup(const Matrix& values, double scale, const Matrix* weight = nullptr);

// Diffusion-parameter test: CUSUM of eta_i = tr(A^{-1}(X_{t_{i-1}}, alpha)
// (DX_i)^2 / h) over `range`, scaled by 1/sqrt(2 d m). Null law sup |B_1^0|.
TestResult t_alpha_range(const Path& path, const DiffusionModel& model, IndexRange range,
                         const Vector& alpha_hat, double level, const CriticalValueSource& cv);
TestResult t_alpha(const Path& path, const DiffusionModel& model, const Vector& alpha_hat,
                   double level, const CriticalValueSource& cv);

// xi_i = 1_d^T a^{-1}(X_{t_{i-1}}, alpha)(DX_i - h b(X_{t_{i-1}}, beta)).
// Requires r = d.
Vector xi_sequence(const Path& path, const DiffusionModel& model, IndexRange range,
                   const Vector& alpha, const Vector& beta);

// zeta_i = (d_beta b)^T A^{-1} (DX_i - h b), one q-vector per increment.
Matrix zeta_sequence(const Path& path, const DiffusionModel& model, IndexRange range,
                     const Vector& alpha, const Vector& beta);

struct FisherWeight {
  Matrix matrix;  // (1/m) sum (d_beta b)^T A^{-1} (d_beta b), symmetric PSD
  double min_eigenvalue = 0.0;
  double condition = 0.0;
  bool singular = false;  // condition > 1e12 or eigenvalue below floor
};

FisherWeight fisher_weight(const Path& path, const DiffusionModel& model, IndexRange range,
                           const Vector& alpha, const Vector& beta);

// Symmetric inverse square root via eigendecomposition; throws NumericError
// when an eigenvalue falls below `floor`.
Matrix inv_sqrt_psd(const Matrix& m, double floor = 1e-12);

enum class WindowSide { left, right };

// Unweighted drift test over an explicit range with scale
// 1/sqrt(d * time_span); null law sup |B_1^0|.
TestResult t1_drift_range(const Path& path, const DiffusionModel& model, IndexRange range,
                          double time_span, const Vector& alpha, const Vector& beta, double level,
                          const CriticalValueSource& cv);

// T_{1,n}^{(1)} (side = left, boundary = tau_lower) over (0, [n tau_lower]],
// or T_{1,n}^{(2)} (side = right, boundary = tau_upper) over ([n tau_upper], n].
TestResult t1_drift(const Path& path, const DiffusionModel& model, WindowSide side,
                    double boundary_fraction, const Vector& alpha, const Vector& beta,
                    double level, const CriticalValueSource& cv);

// Weighted drift test: CUSUM of I^{-1/2}-mapped zeta partial sums with scale
// 1/sqrt(time_span); null law sup ||B_q^0||.
TestResult t2_drift_range(const Path& path, const DiffusionModel& model, IndexRange range,
                          double time_span, const Vector& alpha, const Vector& beta, double level,
                          const CriticalValueSource& cv);

TestResult t2_drift(const Path& path, const DiffusionModel& model, WindowSide side,
                    double boundary_fraction, const Vector& alpha, const Vector& beta,
                    double level, const CriticalValueSource& cv);

// sqrt(T) ||beta1 - beta2||, the same-point-change diagnostic.
double same_point_statistic(const Vector& beta1, const Vector& beta2, double total_time);

}  // namespace sdecp
