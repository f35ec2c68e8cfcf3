#include "sdecp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdecp/parallel.hpp"
#include "sdecp/rng.hpp"

namespace sdecp {

double DriftChangeSpec::magnitude(std::int64_t n) const {
  return mode == Mode::shrinking ? std::pow(static_cast<double>(n), -exponent) : delta;
}

Warnings ExperimentSpec::validate() const {
  Warnings w;
  if (replications < 1) throw ConfigError("ExperimentSpec: replications must be >= 1");
  if (n < 1000) throw ConfigError("ExperimentSpec: n must be >= 1000");
  if (situation < 1 || situation > 3) {
    throw ConfigError("ExperimentSpec: situation must be 1, 2 or 3");
  }
  if (model_name != "ou" && model_name != "hyperbolic") {
    throw ConfigError("ExperimentSpec: model must be 'ou' or 'hyperbolic'");
  }
  if (!(h_exponent > 0.5 && h_exponent < 1.0)) {
    std::ostringstream os;
    os << "h exponent " << h_exponent
       << " outside (0.5, 1): nh -> infinity and nh^2 -> 0 are not both guaranteed";
    w.push_back(os.str());
  }
  if (substeps < 1) throw ConfigError("ExperimentSpec: substeps must be >= 1");
  pipeline.validate();
  return w;
}

ResolvedExperiment resolve_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ResolvedExperiment exp;
  exp.spec = spec;
  exp.model = model_by_name(spec.model_name);
  exp.h = std::pow(static_cast<double>(spec.n), -spec.h_exponent);

  const double theta = spec.drift_change.magnitude(spec.n);
  exp.theta_beta = (spec.situation == 1) ? 0.0 : theta;

  if (spec.model_name == "ou") {
    exp.x0 = Vector::Constant(1, 2.0);
    exp.tau_alpha_true = 0.8;
    exp.alpha1_true = Vector::Constant(1, 1.0);
    exp.alpha2_true = Vector::Constant(1, 1.2);
    Vector beta_base(2);
    beta_base << 1.0, 2.0;
    exp.beta2_true = beta_base;
    Vector beta_pre(2);
    beta_pre << 1.0, 2.0 - theta;  // gamma change of size theta
    switch (spec.situation) {
      case 1:
        exp.beta1_true = beta_base;
        exp.schedule = ParamSchedule(
            {{0.8, exp.alpha1_true, beta_base}, {1.0, exp.alpha2_true, beta_base}});
        break;
      case 2:
        exp.beta1_true = beta_pre;
        exp.tau_beta_true = 0.4;
        exp.schedule = ParamSchedule({{0.4, exp.alpha1_true, beta_pre},
                                      {0.8, exp.alpha1_true, beta_base},
                                      {1.0, exp.alpha2_true, beta_base}});
        break;
      case 3:
        exp.beta1_true = beta_pre;
        exp.tau_beta_true = 0.8;
        exp.schedule = ParamSchedule(
            {{0.8, exp.alpha1_true, beta_pre}, {1.0, exp.alpha2_true, beta_base}});
        break;
    }
  } else {
    exp.x0 = Vector::Constant(1, 1.0);
    exp.tau_alpha_true = 0.4;
    double alpha_delta = spec.alpha_change_delta
                             ? *spec.alpha_change_delta
                             : std::pow(static_cast<double>(spec.n), -0.36);
    exp.alpha1_true = Vector::Constant(1, 1.0 + alpha_delta);
    exp.alpha2_true = Vector::Constant(1, 1.0);
    Vector beta_base(2), beta_post(2);
    beta_base << 1.0, 2.0;
    beta_post << 1.0 - theta, 2.0;  // beta-component change of size theta
    exp.beta1_true = beta_base;
    exp.beta2_true = (spec.situation == 1) ? beta_base : beta_post;
    switch (spec.situation) {
      case 1:
        exp.schedule = ParamSchedule(
            {{0.4, exp.alpha1_true, beta_base}, {1.0, exp.alpha2_true, beta_base}});
        break;
      case 2:
        exp.tau_beta_true = 0.7;
        exp.schedule = ParamSchedule({{0.4, exp.alpha1_true, beta_base},
                                      {0.7, exp.alpha2_true, beta_base},
                                      {1.0, exp.alpha2_true, beta_post}});
        break;
      case 3:
        exp.tau_beta_true = 0.4;
        exp.schedule = ParamSchedule(
            {{0.4, exp.alpha1_true, beta_base}, {1.0, exp.alpha2_true, beta_post}});
        break;
    }
  }
  exp.schedule.validate_against(exp.model);
  return exp;
}

Path simulate_replication(const ResolvedExperiment& exp, int rep) {
  std::uint64_t rep_seed = derive_seed(exp.spec.seed, static_cast<std::uint64_t>(rep));
  if (exp.spec.model_name == "ou" && exp.spec.use_exact_ou) {
    return simulate_ou_exact(exp.schedule, exp.x0[0], exp.spec.n, exp.h, rep_seed);
  }
  return simulate_path(exp.model, exp.schedule, exp.x0, exp.spec.n, exp.h, exp.spec.substeps,
                       rep_seed);
}

namespace {

// Localizes the drift change even when no split's test rejected, falling
// back to the widest split's margins; mirrors how the benchmark tables are
// produced unconditionally at desk scale.
void force_beta_localization(const Path& path, const DiffusionModel& model,
                             const PipelineConfig& cfg, RepRecord& rec) {
  const DecisionReport& rep = rec.report;
  if (!rep.window || !rep.alpha1 || !rep.alpha2) return;
  if (rec.report.drift_change) {
    rec.tau_beta_forced = rec.report.drift_change->tau.tau_hat;
    return;
  }
  // Default to the side that holds the true drift change in situation-2
  // benchmarks: whichever side has the larger exceedance, left on ties.
  WindowSide side = (rep.right.exceedance > rep.left.exceedance) ? WindowSide::right
                                                                 : WindowSide::left;
  const auto n = path.n();
  auto lo = static_cast<std::int64_t>(std::floor(rep.window->tau_lower * static_cast<double>(n)));
  auto hi = static_cast<std::int64_t>(std::floor(rep.window->tau_upper * static_cast<double>(n)));
  IndexRange range = (side == WindowSide::left) ? IndexRange{0, lo} : IndexRange{hi, n};
  const Vector& alpha =
      (side == WindowSide::left) ? *rep.alpha1->alpha_hat : *rep.alpha2->alpha_hat;

  ExpansionDeps deps;
  deps.level = cfg.level;
  deps.cv = cfg.cv;
  deps.optimizer = cfg.optimizer;
  deps.fractions = cfg.expansion_fractions;
  deps.drift_test = cfg.drift_test;
  deps.alpha_fixed = alpha;
  deps.min_margin_time = cfg.min_drift_margin_time;
  std::optional<ExpansionResult> expansion;
  if (expansion_has_usable_split(range.length(), path.h, deps)) {
    expansion = expand_and_estimate(path, model, range, ExpandRole::beta, deps);
  }

  Vector beta1, beta2;
  if (expansion) {
    beta1 = *expansion->first.beta_hat;
    beta2 = *expansion->second.beta_hat;
  } else {
    rec.forced_fallback = true;
    double c = cfg.expansion_fractions.front();
    auto margin = static_cast<std::int64_t>(std::floor(c * static_cast<double>(range.length())));
    if (margin < model.beta_dim + 1) return;
    beta1 = *estimate_beta(path, model, {range.lo, range.lo + margin}, alpha, cfg.optimizer)
                 .beta_hat;
    beta2 = *estimate_beta(path, model, {range.hi - margin, range.hi}, alpha, cfg.optimizer)
                 .beta_hat;
  }
  rec.tau_beta_forced =
      estimate_tau_beta(path, model, side, *rep.window, alpha, beta1, beta2).tau_hat;
}

}  // namespace

ExperimentResult run_experiment(const ResolvedExperiment& exp, bool force_localization) {
  ExperimentResult result;
  result.setup = exp;
  result.records.resize(static_cast<std::size_t>(exp.spec.replications));

  int threads = exp.spec.threads > 0 ? exp.spec.threads : default_thread_count();
  parallel_for(exp.spec.replications, threads, [&](std::int64_t r) {
    RepRecord& rec = result.records[static_cast<std::size_t>(r)];
    rec.rep = static_cast<int>(r);
    try {
      Path path = simulate_replication(exp, static_cast<int>(r));
      PipelineConfig cfg = exp.spec.pipeline;
      cfg.seed = derive_seed(exp.spec.seed ^ 0xb007u, static_cast<std::uint64_t>(r));
      rec.report = run_pipeline(path, exp.model, cfg);
      if (rec.report.beta_check_left && rec.report.beta_check_right) {
        rec.same_point_stat =
            same_point_statistic(*rec.report.beta_check_left->beta_hat,
                                 *rec.report.beta_check_right->beta_hat, path.total_time());
      }
      if (force_localization) force_beta_localization(path, exp.model, cfg, rec);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });
  return result;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  std::size_t mid = xs.size() / 2;
  return (xs.size() % 2 == 1) ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    ks = std::max(ks, std::abs(fa - fb));
  }
  return ks;
}

}  // namespace sdecp
