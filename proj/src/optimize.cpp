#include "sdecp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sdecp/rng.hpp"

namespace sdecp {

namespace {

struct SimplexPoint {
  Vector x;
  double f;
};

double safe_eval(const std::function<double(const Vector&)>& f, const Vector& x) {
  double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

// One Nelder-Mead run from x0; returns best point found and whether the
// convergence criteria fired within the budget.
SimplexPoint nelder_mead(const std::function<double(const Vector&)>& f, const ParamBox& box,
                         const Vector& x0, const OptimizerConfig& cfg, bool* converged,
                         int* iterations) {
  const Eigen::Index dim = box.dim();
  const Vector width = box.upper - box.lower;

  std::vector<SimplexPoint> simplex;
  simplex.reserve(dim + 1);
  simplex.push_back({box.project(x0), 0.0});
  simplex[0].f = safe_eval(f, simplex[0].x);
  for (Eigen::Index j = 0; j < dim; ++j) {
    Vector xj = simplex[0].x;
    double step = 0.05 * width[j];
    xj[j] += (xj[j] + step <= box.upper[j]) ? step : -step;
    simplex.push_back({box.project(xj), 0.0});
    simplex.back().f = safe_eval(f, simplex.back().x);
  }

  auto order = [&] {
    std::sort(simplex.begin(), simplex.end(),
              [](const SimplexPoint& a, const SimplexPoint& b) { return a.f < b.f; });
  };
  order();

  *converged = false;
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    double f_spread = simplex.back().f - simplex.front().f;
    double diam = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        diam = std::max(diam, std::abs(simplex[i].x[j] - simplex[0].x[j]) / width[j]);
      }
    }
    if (f_spread <= cfg.f_tolerance * (1.0 + std::abs(simplex.front().f)) &&
        diam <= cfg.x_tolerance) {
      *converged = true;
      break;
    }

    Vector centroid = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) centroid += simplex[i].x;
    centroid /= static_cast<double>(dim);

    auto eval_at = [&](double coef) {
      Vector x = box.project(centroid + coef * (centroid - simplex.back().x));
      return SimplexPoint{x, safe_eval(f, x)};
    };

    SimplexPoint reflected = eval_at(1.0);
    if (reflected.f < simplex.front().f) {
      SimplexPoint expanded = eval_at(2.0);
      simplex.back() = (expanded.f < reflected.f) ? expanded : reflected;
    } else if (reflected.f < simplex[dim - 1].f) {
      simplex.back() = reflected;
    } else {
      SimplexPoint contracted = eval_at(reflected.f < simplex.back().f ? 0.5 : -0.5);
      if (contracted.f < std::min(reflected.f, simplex.back().f)) {
        simplex.back() = contracted;
      } else {
        // Shrink toward the best vertex.
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i].x = box.project(simplex[0].x + 0.5 * (simplex[i].x - simplex[0].x));
          simplex[i].f = safe_eval(f, simplex[i].x);
        }
      }
    }
    order();
  }
  *iterations = iter;
  return simplex.front();
}

// Coordinate-wise parabolic refinement; cleans up the last digits that the
// simplex leaves on smooth objectives.
SimplexPoint polish(const std::function<double(const Vector&)>& f, const ParamBox& box,
                    SimplexPoint best) {
  const Eigen::Index dim = box.dim();
  const Vector width = box.upper - box.lower;
  for (int round = 0; round < 3; ++round) {
    double delta_scale = std::pow(10.0, -4 - round);
    for (Eigen::Index j = 0; j < dim; ++j) {
      double delta = delta_scale * width[j];
      Vector xp = best.x, xm = best.x;
      xp[j] = std::min(best.x[j] + delta, box.upper[j]);
      xm[j] = std::max(best.x[j] - delta, box.lower[j]);
      if (xp[j] == xm[j]) continue;
      double fp = safe_eval(f, xp);
      double fm = safe_eval(f, xm);
      // Parabola through (xm, best, xp); vertex may fall outside [xm, xp].
      double denom = fp - 2.0 * best.f + fm;
      if (denom > 0.0) {
        double t = 0.5 * (fm - fp) / denom;  // offset in units of delta
        Vector xv = best.x;
        xv[j] = std::clamp(best.x[j] + t * delta, box.lower[j], box.upper[j]);
        double fv = safe_eval(f, xv);
        if (fv < best.f) best = {xv, fv};
      }
      if (fp < best.f) best = {xp, fp};
      if (fm < best.f) best = {xm, fm};
    }
  }
  return best;
}

}  // namespace

OptimizerResult minimize_box(const std::function<double(const Vector&)>& f, const ParamBox& box,
                             const OptimizerConfig& cfg) {
  const Eigen::Index dim = box.dim();
  auto gen = make_stream(cfg.seed, 0x6f7074ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  OptimizerResult result;
  result.value = std::numeric_limits<double>::max();

  int starts = std::max(1, cfg.multistarts);
  for (int s = 0; s < starts; ++s) {
    Vector x0(dim);
    if (s == 0) {
      x0 = 0.5 * (box.lower + box.upper);
    } else {
      for (Eigen::Index j = 0; j < dim; ++j) {
        x0[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * unif(gen);
      }
    }
    bool conv = false;
    int iters = 0;
    SimplexPoint best = nelder_mead(f, box, x0, cfg, &conv, &iters);
    result.iterations += iters;
    if (best.f < result.value) {
      result.x = best.x;
      result.value = best.f;
      result.converged = conv;
    }
  }

  // Restart once from the incumbent, then polish.
  bool conv = false;
  int iters = 0;
  SimplexPoint best = nelder_mead(f, box, result.x, cfg, &conv, &iters);
  result.iterations += iters;
  if (best.f <= result.value) {
    result.x = best.x;
    result.value = best.f;
    result.converged = result.converged || conv;
  }
  SimplexPoint polished = polish(f, box, {result.x, result.value});
  result.x = polished.x;
  result.value = polished.f;
  return result;
}

}  // namespace sdecp
