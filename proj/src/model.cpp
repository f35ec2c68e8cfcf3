#include "sdecp/model.hpp"

#include <cmath>
#include <sstream>

#include "sdecp/rng.hpp"

namespace sdecp {

ParamBox::ParamBox(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw ConfigError("ParamBox: lower/upper dimension mismatch");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw ConfigError("ParamBox: lower must be strictly below upper in every coordinate");
    }
  }
}

bool ParamBox::contains(const Vector& p, double tol) const {
  if (p.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] < lower[i] - tol || p[i] > upper[i] + tol) return false;
  }
  return true;
}

Vector ParamBox::project(const Vector& p, bool* clamped) const {
  if (p.size() != lower.size()) {
    throw ConfigError("ParamBox::project: dimension mismatch");
  }
  Vector q = p.cwiseMax(lower).cwiseMin(upper);
  if (clamped) *clamped = (q != p);
  return q;
}

bool ParamBox::on_boundary(const Vector& p, double rel_tol) const {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double w = upper[i] - lower[i];
    if (p[i] - lower[i] <= rel_tol * w || upper[i] - p[i] <= rel_tol * w) return true;
  }
  return false;
}

namespace {

void check_x_dim(const DiffusionModel& m, const Vector& x) {
  if (x.size() != m.state_dim) {
    std::ostringstream os;
    os << m.name << ": state dimension mismatch (got " << x.size() << ", expected "
       << m.state_dim << ")";
    throw DataError(os.str());
  }
}

void check_param(const ParamBox& box, const Vector& p, const char* which) {
  if (p.size() != box.dim()) {
    throw ConfigError(std::string(which) + ": parameter dimension mismatch");
  }
  if (!box.contains(p, 1e-12)) {
    throw ConfigError(std::string(which) + ": parameter outside its box");
  }
}

}  // namespace

Vector eval_drift(const DiffusionModel& model, const Vector& x, const Vector& beta) {
  check_x_dim(model, x);
  check_param(model.beta_space, beta, "eval_drift");
  Vector out(model.state_dim);
  model.drift(x, beta, out);
  return out;
}

Matrix eval_diffusion(const DiffusionModel& model, const Vector& x, const Vector& alpha) {
  check_x_dim(model, x);
  check_param(model.alpha_space, alpha, "eval_diffusion");
  Matrix out(model.state_dim, model.noise_dim);
  model.diffusion(x, alpha, out);
  return out;
}

Matrix eval_A(const DiffusionModel& model, const Vector& x, const Vector& alpha) {
  Matrix a = eval_diffusion(model, x, alpha);
  Matrix A = a * a.transpose();
  // Exact symmetry regardless of rounding in the product.
  return ((A + A.transpose()) / 2.0).eval();
}

Matrix eval_drift_jac(const DiffusionModel& model, const Vector& x, const Vector& beta) {
  check_x_dim(model, x);
  check_param(model.beta_space, beta, "eval_drift_jac");
  Matrix out(model.state_dim, model.beta_dim);
  model.drift_jac_beta(x, beta, out);
  return out;
}

DiffusionModel make_ou_model() {
  DiffusionModel m;
  m.name = "ou";
  m.state_dim = 1;
  m.noise_dim = 1;
  m.alpha_dim = 1;
  m.beta_dim = 2;
  m.drift = [](const Vector& x, const Vector& b, Eigen::Ref<Vector> out) {
    out[0] = -b[0] * (x[0] - b[1]);
  };
  m.diffusion = [](const Vector&, const Vector& a, Eigen::Ref<Matrix> out) {
    out(0, 0) = a[0];
  };
  m.drift_jac_beta = [](const Vector& x, const Vector& b, Eigen::Ref<Matrix> out) {
    out(0, 0) = -(x[0] - b[1]);
    out(0, 1) = b[0];
  };
  m.alpha_space = ParamBox(Vector::Constant(1, 1e-3), Vector::Constant(1, 50.0));
  Vector blo(2), bhi(2);
  blo << 1e-3, -50.0;
  bhi << 50.0, 50.0;
  m.beta_space = ParamBox(blo, bhi);
  m.scalar_constant_diffusion = true;
  // Drift is linear in (u, v) = (beta, beta*gamma): DX/h ~ -u X + v. Blocks
  // are weighted by 1/alpha^2, constant within each regime.
  m.beta_lsq_blocks = [](const Matrix& x, double h,
                         const std::vector<DiffusionModel::Block>& blocks) -> Vector {
    double sxx = 0, sx = 0, sxy = 0, sy = 0, sw = 0;
    for (const auto& [r, alpha] : blocks) {
      double w = 1.0 / (alpha[0] * alpha[0]);
      for (std::int64_t i = r.lo + 1; i <= r.hi; ++i) {
        double xi = x(i - 1, 0);
        double yi = (x(i, 0) - x(i - 1, 0)) / h;
        sxx += w * xi * xi;
        sx += w * xi;
        sxy += w * xi * yi;
        sy += w * yi;
        sw += w;
      }
    }
    double det = sw * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw NumericError("ou beta_lsq: degenerate design");
    // Regression y = c0 + c1 x; u = -c1, v = c0.
    double c1 = (sw * sxy - sx * sy) / det;
    double c0 = (sy - c1 * sx) / sw;
    double u = -c1;
    Vector beta(2);
    beta[0] = u;
    beta[1] = (std::abs(u) > 1e-12) ? c0 / u : 0.0;
    return beta;
  };
  m.beta_lsq = [blocks = m.beta_lsq_blocks](const Matrix& x, double h, IndexRange r,
                                            const Vector& alpha) -> Vector {
    return blocks(x, h, {{r, alpha}});
  };
  return m;
}

DiffusionModel make_hyperbolic_model() {
  DiffusionModel m;
  m.name = "hyperbolic";
  m.state_dim = 1;
  m.noise_dim = 1;
  m.alpha_dim = 1;
  m.beta_dim = 2;
  m.drift = [](const Vector& x, const Vector& b, Eigen::Ref<Vector> out) {
    out[0] = b[0] - b[1] * x[0] / std::sqrt(1.0 + x[0] * x[0]);
  };
  m.diffusion = [](const Vector&, const Vector& a, Eigen::Ref<Matrix> out) {
    out(0, 0) = a[0];
  };
  m.drift_jac_beta = [](const Vector& x, const Vector&, Eigen::Ref<Matrix> out) {
    out(0, 0) = 1.0;
    out(0, 1) = -x[0] / std::sqrt(1.0 + x[0] * x[0]);
  };
  m.alpha_space = ParamBox(Vector::Constant(1, 1e-3), Vector::Constant(1, 50.0));
  // max |beta| < min gamma over the box keeps every admissible point ergodic.
  Vector blo(2), bhi(2);
  blo << -1.9, 1.95;
  bhi << 1.9, 20.0;
  m.beta_space = ParamBox(blo, bhi);
  m.scalar_constant_diffusion = true;
  // Drift is linear in (beta, gamma) with regressors (1, -x/sqrt(1+x^2)).
  m.beta_lsq_blocks = [](const Matrix& x, double h,
                         const std::vector<DiffusionModel::Block>& blocks) -> Vector {
    double suu = 0, su = 0, suy = 0, sy = 0, sw = 0;
    for (const auto& [r, alpha] : blocks) {
      double w = 1.0 / (alpha[0] * alpha[0]);
      for (std::int64_t i = r.lo + 1; i <= r.hi; ++i) {
        double u = -x(i - 1, 0) / std::sqrt(1.0 + x(i - 1, 0) * x(i - 1, 0));
        double yi = (x(i, 0) - x(i - 1, 0)) / h;
        suu += w * u * u;
        su += w * u;
        suy += w * u * yi;
        sy += w * yi;
        sw += w;
      }
    }
    double det = sw * suu - su * su;
    if (std::abs(det) < 1e-300) throw NumericError("hyperbolic beta_lsq: degenerate design");
    double c1 = (sw * suy - su * sy) / det;
    double c0 = (sy - c1 * su) / sw;
    Vector beta(2);
    beta[0] = c0;
    beta[1] = c1;
    return beta;
  };
  m.beta_lsq = [blocks = m.beta_lsq_blocks](const Matrix& x, double h, IndexRange r,
                                            const Vector& alpha) -> Vector {
    return blocks(x, h, {{r, alpha}});
  };
  return m;
}

DiffusionModel model_by_name(const std::string& name) {
  if (name == "ou") return make_ou_model();
  if (name == "hyperbolic") return make_hyperbolic_model();
  throw ConfigError("unknown model '" + name + "' (builtins: ou, hyperbolic)");
}

DerivativeCheckReport check_derivatives(const DiffusionModel& model, int n_probes,
                                        std::uint64_t seed, double state_box_halfwidth,
                                        double rel_tol) {
  DerivativeCheckReport rep;
  rep.probes = n_probes;
  rep.jacobian_ok = true;
  rep.A_spd_ok = true;
  rep.min_A_det = std::numeric_limits<double>::infinity();

  auto gen = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_in = [&](double lo, double hi) { return lo + (hi - lo) * unif(gen); };

  Vector x(model.state_dim), beta(model.beta_dim), alpha(model.alpha_dim);
  Vector bp(model.beta_dim), bm(model.beta_dim);
  Vector fp(model.state_dim), fm(model.state_dim);
  Matrix jac(model.state_dim, model.beta_dim);
  Matrix a(model.state_dim, model.noise_dim);

  for (int probe = 0; probe < n_probes; ++probe) {
    for (int i = 0; i < model.state_dim; ++i) {
      x[i] = draw_in(-state_box_halfwidth, state_box_halfwidth);
    }
    for (int i = 0; i < model.beta_dim; ++i) {
      // Stay slightly interior so central differences remain inside the box.
      double lo = model.beta_space.lower[i], hi = model.beta_space.upper[i];
      double pad = 0.02 * (hi - lo);
      beta[i] = draw_in(lo + pad, hi - pad);
    }
    for (int i = 0; i < model.alpha_dim; ++i) {
      double lo = model.alpha_space.lower[i], hi = model.alpha_space.upper[i];
      double pad = 0.02 * (hi - lo);
      alpha[i] = draw_in(lo + pad, hi - pad);
    }

    model.drift_jac_beta(x, beta, jac);
    for (int j = 0; j < model.beta_dim; ++j) {
      double step = 1e-5 * std::max(1.0, std::abs(beta[j]));
      bp = beta;
      bm = beta;
      bp[j] += step;
      bm[j] -= step;
      model.drift(x, bp, fp);
      model.drift(x, bm, fm);
      if (!fp.allFinite() || !fm.allFinite()) {
        throw NumericError("check_derivatives: non-finite drift output at a probe");
      }
      for (int i = 0; i < model.state_dim; ++i) {
        double fd = (fp[i] - fm[i]) / (2.0 * step);
        double scale = std::max({std::abs(fd), std::abs(jac(i, j)), 1.0});
        double rel = std::abs(fd - jac(i, j)) / scale;
        if (rel > rep.max_rel_error) rep.max_rel_error = rel;
      }
    }

    model.diffusion(x, alpha, a);
    if (!a.allFinite()) {
      throw NumericError("check_derivatives: non-finite diffusion output at a probe");
    }
    Matrix A = a * a.transpose();
    double det = A.determinant();
    rep.min_A_det = std::min(rep.min_A_det, det);
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    if (es.eigenvalues().minCoeff() <= 0.0) rep.A_spd_ok = false;
  }

  rep.jacobian_ok = rep.max_rel_error <= rel_tol;
  if (!rep.jacobian_ok) {
    std::ostringstream os;
    os << "max relative Jacobian error " << rep.max_rel_error << " exceeds " << rel_tol;
    rep.detail = os.str();
  } else if (!rep.A_spd_ok) {
    rep.detail = "A(x, alpha) not positive definite at some probe";
  }
  return rep;
}

}  // namespace sdecp
