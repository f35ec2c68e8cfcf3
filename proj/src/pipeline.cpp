#include "sdecp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "sdecp/rng.hpp"
#include "sdecp/simulate.hpp"

namespace sdecp {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("PipelineConfig: level must be in (0, 1)");
  double prev = 0.5;
  for (double c : expansion_fractions) {
    if (!(c > 0.0 && c < 0.5)) {
      throw ConfigError("PipelineConfig: expansion fractions must lie in (0, 0.5)");
    }
    if (!(c < prev)) {
      throw ConfigError("PipelineConfig: expansion fractions must be strictly decreasing");
    }
    prev = c;
  }
  if (expansion_fractions.empty()) throw ConfigError("PipelineConfig: no expansion fractions");
  if (same_point_bootstrap_reps < 0) {
    throw ConfigError("PipelineConfig: bootstrap reps must be >= 0");
  }
}

std::string branch_name(Branch b) {
  switch (b) {
    case Branch::no_diffusion_change: return "no-diffusion-change";
    case Branch::diffusion_unlocalizable: return "diffusion-unlocalizable";
    case Branch::no_change: return "no-change";
    case Branch::same_point_suspected: return "same-point-suspected";
    case Branch::drift_change_left: return "drift-change-left";
    case Branch::drift_change_right: return "drift-change-right";
    case Branch::drift_unlocalizable: return "drift-unlocalizable";
  }
  return "?";
}

namespace {

SideTests run_side_tests(const Path& path, const DiffusionModel& model, WindowSide side,
                         const ExclusionWindow& window, const Vector& alpha, const Vector& beta,
                         const PipelineConfig& cfg, Warnings& warnings) {
  SideTests out;
  double boundary = (side == WindowSide::left) ? window.tau_lower : window.tau_upper;
  auto n = path.n();
  auto split = static_cast<std::int64_t>(std::floor(boundary * static_cast<double>(n)));
  std::int64_t len = (side == WindowSide::left) ? split : n - split;
  if (len < 100) {
    warnings.push_back(std::string("drift window too short on the ") +
                       (side == WindowSide::left ? "left" : "right") + " side; tests skipped");
    return out;
  }
  out.tested = true;
  if (cfg.drift_test != DriftTestChoice::t2) {
    out.t1 = t1_drift(path, model, side, boundary, alpha, beta, cfg.level, cfg.cv);
    out.rejected = out.rejected || out.t1->reject;
    out.exceedance = std::max(out.exceedance, out.t1->statistic - out.t1->critical_value);
  }
  if (cfg.drift_test != DriftTestChoice::t1) {
    out.t2 = t2_drift(path, model, side, boundary, alpha, beta, cfg.level, cfg.cv);
    out.rejected = out.rejected || out.t2->reject;
    out.exceedance = std::max(out.exceedance, out.t2->statistic - out.t2->critical_value);
  }
  return out;
}

// Drift fit over the whole path with the two-regime diffusion weights; used
// only as the bootstrap generator's common beta.
Vector pooled_beta(const Path& path, const DiffusionModel& model, std::int64_t split,
                   const Vector& alpha1, const Vector& alpha2, const PipelineConfig& cfg) {
  IndexRange left{0, split};
  IndexRange right{split, path.n()};
  if (left.length() < model.beta_dim + 1) {
    return *estimate_beta(path, model, right, alpha2, cfg.optimizer).beta_hat;
  }
  if (right.length() < model.beta_dim + 1) {
    return *estimate_beta(path, model, left, alpha1, cfg.optimizer).beta_hat;
  }
  if (model.beta_lsq_blocks) {
    Vector fit = model.beta_lsq_blocks(path.x, path.h, {{left, alpha1}, {right, alpha2}});
    return model.beta_space.project(fit);
  }
  auto objective = [&](const Vector& beta) {
    return beta_contrast(path, model, left, beta, alpha1) +
           beta_contrast(path, model, right, beta, alpha2);
  };
  OptimizerResult opt = minimize_box(objective, model.beta_space, cfg.optimizer);
  return opt.x;
}

// No-change parametric bootstrap for the same-point statistic: simulate the
// fitted two-regime diffusion with one common drift parameter, rerun the
// margin estimation and window construction, and record the statistic.
SamePointDiagnostic same_point_bootstrap(const Path& path, const DiffusionModel& model,
                                         const PipelineConfig& cfg, const DecisionReport& rep,
                                         double statistic, Warnings& warnings) {
  SamePointDiagnostic diag;
  diag.statistic = statistic;
  diag.bootstrap_reps = cfg.same_point_bootstrap_reps;
  if (cfg.same_point_bootstrap_reps == 0) return diag;

  const auto n = path.n();
  const double tau = rep.tau_alpha->tau_hat;
  const Vector a1 = *rep.alpha1->alpha_hat;
  const Vector a2 = *rep.alpha2->alpha_hat;
  Vector beta_bar = pooled_beta(path, model, rep.tau_alpha->index_hat, a1, a2, cfg);
  bool clamped = false;
  beta_bar = model.beta_space.project(beta_bar, &clamped);

  ParamSchedule schedule;
  if (tau > 0.0 && tau < 1.0) {
    schedule = ParamSchedule({{tau, a1, beta_bar}, {1.0, a2, beta_bar}});
  } else {
    schedule = ParamSchedule::constant(tau <= 0.0 ? a2 : a1, beta_bar);
  }

  const double c = rep.alpha_split_used;
  const auto margin = static_cast<std::int64_t>(std::floor(c * static_cast<double>(n)));
  const bool exact_ou = (model.name == "ou");
  const Vector x0 = path.x.row(0);

  std::vector<double> stats;
  stats.reserve(cfg.same_point_bootstrap_reps);
  for (int b = 0; b < cfg.same_point_bootstrap_reps; ++b) {
    std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(b));
    Path sim = exact_ou
                   ? simulate_ou_exact(schedule, x0[0], n, path.h, rep_seed)
                   : simulate_path(model, schedule, x0, n, path.h, cfg.substeps, rep_seed);
    try {
      IntervalEstimate ba1 = estimate_alpha(sim, model, {0, margin}, cfg.optimizer);
      IntervalEstimate ba2 = estimate_alpha(sim, model, {n - margin, n}, cfg.optimizer);
      ChangePointEstimate bt = estimate_tau_alpha(sim, model, *ba1.alpha_hat, *ba2.alpha_hat);
      ExclusionWindow bw =
          exclusion_window(n, bt.tau_hat, *ba1.alpha_hat, *ba2.alpha_hat, cfg.epsilon1_cap,
                           cfg.epsilon1_slope0, cfg.epsilon1_slope1);
      auto lo = static_cast<std::int64_t>(std::floor(bw.tau_lower * static_cast<double>(n)));
      auto hi = static_cast<std::int64_t>(std::floor(bw.tau_upper * static_cast<double>(n)));
      if (lo < model.beta_dim + 1 || n - hi < model.beta_dim + 1) continue;
      IntervalEstimate bb1 = estimate_beta(sim, model, {0, lo}, *ba1.alpha_hat, cfg.optimizer);
      IntervalEstimate bb2 = estimate_beta(sim, model, {hi, n}, *ba2.alpha_hat, cfg.optimizer);
      stats.push_back(
          same_point_statistic(*bb1.beta_hat, *bb2.beta_hat, sim.total_time()));
    } catch (const std::exception&) {
      // A degenerate bootstrap draw drops out of the reference sample.
    }
  }
  if (stats.size() < static_cast<std::size_t>(cfg.same_point_bootstrap_reps) / 2) {
    warnings.push_back("same-point bootstrap: more than half the replications failed");
  }
  if (stats.empty()) return diag;
  std::sort(stats.begin(), stats.end());
  auto idx = static_cast<std::int64_t>(std::ceil(0.95 * static_cast<double>(stats.size())));
  idx = std::min<std::int64_t>(std::max<std::int64_t>(idx, 1),
                               static_cast<std::int64_t>(stats.size()));
  diag.reference_quantile = stats[static_cast<std::size_t>(idx - 1)];
  diag.suspected = statistic > diag.reference_quantile;
  return diag;
}

}  // namespace

DecisionReport run_pipeline(const Path& path, const DiffusionModel& model,
                            const PipelineConfig& config) {
  config.validate();
  if (path.n() < 1000) {
    throw DataError("run_pipeline: insufficient data (need n >= 1000 observations)");
  }
  if (path.dim() != model.state_dim) {
    throw DataError("run_pipeline: path dimension does not match the model");
  }

  DecisionReport rep;
  rep.n = path.n();
  rep.h = path.h;
  rep.total_time = path.total_time();
  rep.level = config.level;

  // (1) Diffusion-parameter test on [0, T].
  IntervalEstimate alpha_full = estimate_alpha(path, model, path.full_range(), config.optimizer);
  rep.diffusion_test =
      t_alpha(path, model, *alpha_full.alpha_hat, config.level, config.cv);
  if (!rep.diffusion_test.reject) {
    rep.branch = Branch::no_diffusion_change;
    rep.note =
        "diffusion test did not reject; the no-diffusion-change procedure is prior work and out "
        "of scope here";
    return rep;
  }

  // (2)-(3) Localize a change-free margin pair and estimate alpha on it.
  ExpansionDeps deps;
  deps.level = config.level;
  deps.cv = config.cv;
  deps.optimizer = config.optimizer;
  deps.fractions = config.expansion_fractions;
  auto expansion = expand_and_estimate(path, model, path.full_range(), ExpandRole::alpha, deps);
  if (!expansion) {
    rep.branch = Branch::diffusion_unlocalizable;
    rep.note = "diffusion change detected on [0, T] but no expansion split rejected";
    rep.warnings.push_back("diffusion change detected but unlocalizable");
    return rep;
  }
  rep.alpha1 = expansion->first;
  rep.alpha2 = expansion->second;
  rep.alpha_split_used = expansion->split_used;

  // (4) Diffusion change point.
  rep.tau_alpha =
      estimate_tau_alpha(path, model, *rep.alpha1->alpha_hat, *rep.alpha2->alpha_hat);
  if (rep.tau_alpha->tie) rep.warnings.push_back("tau_alpha profile has ties");

  // (5) Exclusion window.
  rep.window = exclusion_window(path.n(), rep.tau_alpha->tau_hat, *rep.alpha1->alpha_hat,
                                *rep.alpha2->alpha_hat, config.epsilon1_cap,
                                config.epsilon1_slope0, config.epsilon1_slope1);
  if (rep.window->clamped) rep.warnings.push_back("exclusion window clamped at the boundary");
  if (rep.window->floored) rep.warnings.push_back("epsilon1 floored at 0.01");

  // (6) Drift tests on (0, [n tau_lower]] and ([n tau_upper], n], with the
  // side's own alpha and beta estimates.
  const auto n = path.n();
  auto lo = static_cast<std::int64_t>(std::floor(rep.window->tau_lower * static_cast<double>(n)));
  auto hi = static_cast<std::int64_t>(std::floor(rep.window->tau_upper * static_cast<double>(n)));
  IndexRange left_range{0, lo};
  IndexRange right_range{hi, n};

  if (left_range.length() >= model.beta_dim + 1) {
    rep.beta_check_left =
        estimate_beta(path, model, left_range, *rep.alpha1->alpha_hat, config.optimizer);
    rep.left = run_side_tests(path, model, WindowSide::left, *rep.window, *rep.alpha1->alpha_hat,
                              *rep.beta_check_left->beta_hat, config, rep.warnings);
  } else {
    rep.warnings.push_back("left window too short for estimation; tests skipped");
  }
  if (right_range.length() >= model.beta_dim + 1) {
    rep.beta_check_right =
        estimate_beta(path, model, right_range, *rep.alpha2->alpha_hat, config.optimizer);
    rep.right = run_side_tests(path, model, WindowSide::right, *rep.window,
                               *rep.alpha2->alpha_hat, *rep.beta_check_right->beta_hat, config,
                               rep.warnings);
  } else {
    rep.warnings.push_back("right window too short for estimation; tests skipped");
  }

  // (7) Branch on the drift-test outcome.
  if (!rep.left.rejected && !rep.right.rejected) {
    if (!rep.beta_check_left || !rep.beta_check_right) {
      rep.branch = Branch::no_change;
      rep.note = "a window was too short for the same-point diagnostic";
      return rep;
    }
    double stat = same_point_statistic(*rep.beta_check_left->beta_hat,
                                       *rep.beta_check_right->beta_hat, path.total_time());
    rep.same_point =
        same_point_bootstrap(path, model, config, rep, stat, rep.warnings);
    rep.branch =
        rep.same_point->suspected ? Branch::same_point_suspected : Branch::no_change;
    return rep;
  }

  WindowSide side;
  if (rep.left.rejected && rep.right.rejected) {
    side = (rep.left.exceedance >= rep.right.exceedance) ? WindowSide::left : WindowSide::right;
    rep.warnings.push_back(
        "both drift windows rejected; localized the side with the larger exceedance");
  } else {
    side = rep.left.rejected ? WindowSide::left : WindowSide::right;
  }

  IndexRange window_range = (side == WindowSide::left) ? left_range : right_range;
  const Vector& side_alpha =
      (side == WindowSide::left) ? *rep.alpha1->alpha_hat : *rep.alpha2->alpha_hat;
  deps.alpha_fixed = side_alpha;
  deps.drift_test = config.drift_test;
  deps.min_margin_time = config.min_drift_margin_time;
  if (!expansion_has_usable_split(window_range.length(), path.h, deps)) {
    rep.branch = Branch::drift_unlocalizable;
    rep.note = "a drift test rejected but the window is too short to localize the change";
    rep.warnings.push_back("drift change detected but unlocalizable (window too short)");
    return rep;
  }
  auto beta_expansion = expand_and_estimate(path, model, window_range, ExpandRole::beta, deps);
  if (!beta_expansion) {
    rep.branch = Branch::drift_unlocalizable;
    rep.note = "a drift test rejected but no expansion split localized the change";
    rep.warnings.push_back("drift change detected but unlocalizable");
    return rep;
  }

  DriftChange change;
  change.side = side;
  change.beta1 = beta_expansion->first;
  change.beta2 = beta_expansion->second;
  change.split_used = beta_expansion->split_used;
  change.tau = estimate_tau_beta(path, model, side, *rep.window, side_alpha,
                                 *change.beta1.beta_hat, *change.beta2.beta_hat);
  rep.drift_change = change;
  rep.branch =
      (side == WindowSide::left) ? Branch::drift_change_left : Branch::drift_change_right;
  return rep;
}

namespace {

json to_json(const TestResult& r) {
  return json{{"statistic", r.statistic},
              {"argmax_index", r.argmax_index},
              {"dim", r.dim},
              {"critical_value", r.critical_value},
              {"level", r.level},
              {"reject", r.reject},
              {"window", {r.window.lo, r.window.hi}}};
}

json to_json(const IntervalEstimate& e) {
  json j{{"interval", {e.interval.lo, e.interval.hi}},
         {"contrast_value", e.contrast_value},
         {"converged", e.converged},
         {"clamped", e.clamped},
         {"boundary", e.boundary}};
  if (e.alpha_hat) j["alpha_hat"] = std::vector<double>(e.alpha_hat->begin(), e.alpha_hat->end());
  if (e.beta_hat) j["beta_hat"] = std::vector<double>(e.beta_hat->begin(), e.beta_hat->end());
  if (!e.warnings.empty()) j["warnings"] = e.warnings;
  return j;
}

json to_json(const ChangePointEstimate& c) {
  return json{{"tau_hat", c.tau_hat},
              {"index_hat", c.index_hat},
              {"window", {c.window.lo, c.window.hi}},
              {"tie", c.tie}};
}

json to_json(const SideTests& s) {
  json j{{"tested", s.tested}, {"rejected", s.rejected}};
  if (s.t1) j["t1"] = to_json(*s.t1);
  if (s.t2) j["t2"] = to_json(*s.t2);
  return j;
}

}  // namespace

std::string test_result_to_json(const TestResult& result) { return to_json(result).dump(2); }

std::string report_to_json(const DecisionReport& rep) {
  json j;
  j["n"] = rep.n;
  j["h"] = rep.h;
  j["total_time"] = rep.total_time;
  j["level"] = rep.level;
  j["branch"] = branch_name(rep.branch);
  j["diffusion_test"] = to_json(rep.diffusion_test);
  if (rep.alpha1) j["alpha1"] = to_json(*rep.alpha1);
  if (rep.alpha2) j["alpha2"] = to_json(*rep.alpha2);
  if (rep.alpha1) j["alpha_split_used"] = rep.alpha_split_used;
  if (rep.tau_alpha) j["tau_alpha"] = to_json(*rep.tau_alpha);
  if (rep.window) {
    j["exclusion_window"] = json{{"epsilon1", rep.window->epsilon1},
                                 {"tau_lower", rep.window->tau_lower},
                                 {"tau_upper", rep.window->tau_upper},
                                 {"clamped", rep.window->clamped},
                                 {"floored", rep.window->floored}};
  }
  if (rep.left.tested || rep.right.tested) {
    j["drift_tests"] = json{{"left", to_json(rep.left)}, {"right", to_json(rep.right)}};
  }
  if (rep.beta_check_left) j["beta_check_left"] = to_json(*rep.beta_check_left);
  if (rep.beta_check_right) j["beta_check_right"] = to_json(*rep.beta_check_right);
  if (rep.drift_change) {
    j["drift_change"] = json{
        {"side", rep.drift_change->side == WindowSide::left ? "left" : "right"},
        {"beta1", to_json(rep.drift_change->beta1)},
        {"beta2", to_json(rep.drift_change->beta2)},
        {"split_used", rep.drift_change->split_used},
        {"tau_beta", to_json(rep.drift_change->tau)}};
  }
  if (rep.same_point) {
    j["same_point"] = json{{"statistic", rep.same_point->statistic},
                           {"bootstrap_reps", rep.same_point->bootstrap_reps},
                           {"reference_quantile", rep.same_point->reference_quantile},
                           {"suspected", rep.same_point->suspected},
                           {"heuristic", true}};
  }
  if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
  if (!rep.note.empty()) j["note"] = rep.note;
  return j.dump(2);
}

std::string report_to_text(const DecisionReport& rep) {
  std::ostringstream os;
  os << "n = " << rep.n << ", h = " << rep.h << ", T = " << rep.total_time
     << ", level = " << rep.level << "\n";
  os << "diffusion test: statistic " << rep.diffusion_test.statistic << " vs "
     << rep.diffusion_test.critical_value
     << (rep.diffusion_test.reject ? " -> reject" : " -> keep") << "\n";
  auto print_vec = [&](const Vector& v) {
    os << "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
  };
  if (rep.alpha1 && rep.alpha2) {
    os << "alpha1 = ";
    print_vec(*rep.alpha1->alpha_hat);
    os << " on (" << rep.alpha1->interval.lo << ", " << rep.alpha1->interval.hi << "], alpha2 = ";
    print_vec(*rep.alpha2->alpha_hat);
    os << " on (" << rep.alpha2->interval.lo << ", " << rep.alpha2->interval.hi
       << "], split c = " << rep.alpha_split_used << "\n";
  }
  if (rep.tau_alpha) os << "tau_alpha = " << rep.tau_alpha->tau_hat << "\n";
  if (rep.window) {
    os << "exclusion window: epsilon1 = " << rep.window->epsilon1 << ", ["
       << rep.window->tau_lower << ", " << rep.window->tau_upper << "]\n";
  }
  auto print_side = [&](const char* name, const SideTests& s) {
    if (!s.tested) return;
    os << name << " window tests:";
    if (s.t1) os << " T1 = " << s.t1->statistic << (s.t1->reject ? " (reject)" : "");
    if (s.t2) os << " T2 = " << s.t2->statistic << (s.t2->reject ? " (reject)" : "");
    os << "\n";
  };
  print_side("left", rep.left);
  print_side("right", rep.right);
  if (rep.drift_change) {
    os << "drift change on the " << (rep.drift_change->side == WindowSide::left ? "left" : "right")
       << ": beta1 = ";
    print_vec(*rep.drift_change->beta1.beta_hat);
    os << ", beta2 = ";
    print_vec(*rep.drift_change->beta2.beta_hat);
    os << ", tau_beta = " << rep.drift_change->tau.tau_hat << "\n";
  }
  if (rep.same_point) {
    os << "same-point statistic = " << rep.same_point->statistic;
    if (rep.same_point->bootstrap_reps > 0) {
      os << " vs bootstrap 95% reference " << rep.same_point->reference_quantile << " (heuristic)";
    }
    os << "\n";
  }
  os << "branch: " << branch_name(rep.branch) << "\n";
  for (const auto& w : rep.warnings) os << "warning: " << w << "\n";
  if (!rep.note.empty()) os << "note: " << rep.note << "\n";
  return os.str();
}

}  // namespace sdecp
