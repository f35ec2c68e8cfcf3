#include "sdecp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdecp/parallel.hpp"
#include "sdecp/rng.hpp"

namespace sdecp {

ParamSchedule::ParamSchedule(std::vector<ScheduleSegment> segs) : segments(std::move(segs)) {
  if (segments.empty()) throw ConfigError("ParamSchedule: no segments");
  double prev = 0.0;
  for (const auto& s : segments) {
    if (!(s.fraction_end > prev)) {
      throw ConfigError("ParamSchedule: fractions must be strictly increasing");
    }
    prev = s.fraction_end;
  }
  if (segments.back().fraction_end != 1.0) {
    throw ConfigError("ParamSchedule: last segment must end at fraction 1");
  }
}

ParamSchedule ParamSchedule::constant(Vector alpha, Vector beta) {
  return ParamSchedule({{1.0, std::move(alpha), std::move(beta)}});
}

const ScheduleSegment& ParamSchedule::segment_for(std::int64_t increment, std::int64_t n) const {
  for (const auto& s : segments) {
    auto end_index = static_cast<std::int64_t>(std::floor(s.fraction_end * static_cast<double>(n)));
    if (increment <= end_index) return s;
  }
  return segments.back();
}

void ParamSchedule::validate_dims_against(const DiffusionModel& model) const {
  for (const auto& s : segments) {
    if (s.alpha.size() != model.alpha_dim || s.beta.size() != model.beta_dim) {
      throw ConfigError("ParamSchedule: parameter dimensions do not match the model");
    }
  }
}

void ParamSchedule::validate_against(const DiffusionModel& model) const {
  validate_dims_against(model);
  for (const auto& s : segments) {
    if (!model.alpha_space.contains(s.alpha, 1e-12) || !model.beta_space.contains(s.beta, 1e-12)) {
      throw ConfigError("ParamSchedule: parameters outside the model's boxes");
    }
  }
}

Path simulate_path(const DiffusionModel& model, const ParamSchedule& schedule, const Vector& x0,
                   std::int64_t n, double h, int substeps, std::uint64_t seed) {
  if (substeps < 1) throw ConfigError("simulate_path: substeps must be >= 1");
  if (n < 2) throw ConfigError("simulate_path: n must be >= 2");
  if (!(h > 0.0)) throw ConfigError("simulate_path: h must be positive");
  if (x0.size() != model.state_dim) throw ConfigError("simulate_path: x0 dimension mismatch");
  schedule.validate_dims_against(model);

  Eigen::MatrixXd out(n + 1, model.state_dim);
  out.row(0) = x0;

  auto gen = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double dt = h / substeps;
  const double sqrt_dt = std::sqrt(dt);
  Vector x = x0;
  Vector b(model.state_dim);
  Matrix a(model.state_dim, model.noise_dim);
  Vector dw(model.noise_dim);

  for (std::int64_t i = 1; i <= n; ++i) {
    const ScheduleSegment& seg = schedule.segment_for(i, n);
    for (int s = 0; s < substeps; ++s) {
      model.drift(x, seg.beta, b);
      model.diffusion(x, seg.alpha, a);
      for (int j = 0; j < model.noise_dim; ++j) dw[j] = sqrt_dt * normal(gen);
      x += dt * b + a * dw;
    }
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "simulate_path: non-finite state at observation index " << i;
      throw NumericError(os.str());
    }
    out.row(i) = x;
  }
  return Path(h, std::move(out));
}

Path simulate_ou_exact(const ParamSchedule& schedule, double x0, std::int64_t n, double h,
                       std::uint64_t seed) {
  if (n < 2) throw ConfigError("simulate_ou_exact: n must be >= 2");
  if (!(h > 0.0)) throw ConfigError("simulate_ou_exact: h must be positive");
  for (const auto& s : schedule.segments) {
    if (s.alpha.size() != 1 || s.beta.size() != 2) {
      throw ConfigError("simulate_ou_exact: schedule parameters are not OU parameters");
    }
    if (!(s.beta[0] > 0.0)) throw ConfigError("simulate_ou_exact: beta must be positive");
  }

  Eigen::MatrixXd out(n + 1, 1);
  out(0, 0) = x0;

  auto gen = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Transition constants per segment, recomputed on segment switches only.
  const ScheduleSegment* cur = nullptr;
  double decay = 0.0, noise_sd = 0.0, gamma = 0.0;
  double x = x0;
  for (std::int64_t i = 1; i <= n; ++i) {
    const ScheduleSegment& seg = schedule.segment_for(i, n);
    if (&seg != cur) {
      cur = &seg;
      double beta = seg.beta[0];
      gamma = seg.beta[1];
      decay = std::exp(-beta * h);
      noise_sd = seg.alpha[0] * std::sqrt((1.0 - std::exp(-2.0 * beta * h)) / (2.0 * beta));
    }
    x = gamma + (x - gamma) * decay + noise_sd * normal(gen);
    out(i, 0) = x;
  }
  return Path(h, std::move(out));
}

std::vector<double> sample_brownian_bridge_sup(int dim, std::int64_t n_grid, std::int64_t n_reps,
                                               std::uint64_t seed, int n_threads) {
  if (dim < 1) throw ConfigError("sample_brownian_bridge_sup: dim must be >= 1");
  if (n_grid < 1 || n_reps < 1) {
    throw ConfigError("sample_brownian_bridge_sup: n_grid and n_reps must be >= 1");
  }

  std::vector<double> sample(static_cast<std::size_t>(n_reps));
  const double sqrt_step = std::sqrt(1.0 / static_cast<double>(n_grid));

  parallel_for(n_reps, n_threads, [&](std::int64_t rep) {
    auto gen = make_stream(seed, static_cast<std::uint64_t>(rep));
    std::normal_distribution<double> normal(0.0, 1.0);
    // One pass storing the walk, then bridge against the endpoint.
    Eigen::MatrixXd w(dim, n_grid);
    for (std::int64_t j = 0; j < n_grid; ++j) {
      for (int c = 0; c < dim; ++c) {
        double prev = (j == 0) ? 0.0 : w(c, j - 1);
        w(c, j) = prev + sqrt_step * normal(gen);
      }
    }
    double sup = 0.0;  // bridge is exactly 0 at s = 0 and s = 1
    for (std::int64_t j = 0; j < n_grid; ++j) {
      double s = static_cast<double>(j + 1) / static_cast<double>(n_grid);
      double norm2 = 0.0;
      for (int c = 0; c < dim; ++c) {
        double v = w(c, j) - s * w(c, n_grid - 1);
        norm2 += v * v;
      }
      sup = std::max(sup, norm2);
    }
    sample[static_cast<std::size_t>(rep)] = std::sqrt(sup);
  });

  std::sort(sample.begin(), sample.end());
  return sample;
}

}  // namespace sdecp
