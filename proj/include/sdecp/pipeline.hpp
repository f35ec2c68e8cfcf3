#pragma once

#include <optional>
#include <string>

#include "sdecp/changepoint.hpp"
#include "sdecp/estimate.hpp"

namespace sdecp {

struct PipelineConfig {
  double level = 0.05;
  DriftTestChoice drift_test = DriftTestChoice::both;
  std::vector<double> expansion_fractions = {0.25, 0.125, 0.0625, 0.01};
  double epsilon1_cap = 0.45;
  double epsilon1_slope0 = 0.9;
  double epsilon1_slope1 = 1.8;
  int same_point_bootstrap_reps = 200;  // 0 disables the bootstrap reference
  // Minimum time span of an expansion margin used for drift estimation;
  // shorter margins give sqrt(T)-rate estimates too noisy to localize with.
  double min_drift_margin_time = 30.0;
  CriticalValueSource cv;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;  // bootstrap replication streams
  int substeps = 16;       // bootstrap simulation for non-OU models

  void validate() const;
};

enum class Branch {
  no_diffusion_change,       // step (1) did not reject; prior-work territory
  diffusion_unlocalizable,   // step (1) rejected but no expansion split did
  no_change,                 // drift tests quiet, same-point statistic small
  same_point_suspected,      // drift tests quiet, statistic above reference
  drift_change_left,
  drift_change_right,
  drift_unlocalizable,       // a drift test rejected but no split localized it
};

std::string branch_name(Branch b);

struct SideTests {
  std::optional<TestResult> t1;
  std::optional<TestResult> t2;
  bool tested = false;
  bool rejected = false;
  // Largest statistic - critical_value over the tests that ran.
  double exceedance = -std::numeric_limits<double>::infinity();
};

struct SamePointDiagnostic {
  double statistic = 0.0;
  int bootstrap_reps = 0;
  double reference_quantile = 0.0;  // 95% no-change parametric bootstrap
  bool suspected = false;           // heuristic: statistic > reference
};

struct DriftChange {
  WindowSide side = WindowSide::left;
  IntervalEstimate beta1;
  IntervalEstimate beta2;
  double split_used = 0.0;
  ChangePointEstimate tau;
};

// Structured trace of the full procedure. Exactly one branch; every estimate
// carries its source interval.
struct DecisionReport {
  std::int64_t n = 0;
  double h = 0.0;
  double total_time = 0.0;
  double level = 0.0;
  Branch branch = Branch::no_diffusion_change;

  TestResult diffusion_test;
  std::optional<IntervalEstimate> alpha1;
  std::optional<IntervalEstimate> alpha2;
  double alpha_split_used = 0.0;
  std::optional<ChangePointEstimate> tau_alpha;
  std::optional<ExclusionWindow> window;

  SideTests left;
  SideTests right;
  std::optional<IntervalEstimate> beta_check_left;   // beta on (0, [n tau_lower]]
  std::optional<IntervalEstimate> beta_check_right;  // beta on ([n tau_upper], n]

  std::optional<DriftChange> drift_change;
  std::optional<SamePointDiagnostic> same_point;

  Warnings warnings;
  std::string note;
};

// Runs the full procedure: diffusion test, margin estimation, diffusion
// change point, exclusion window, drift tests on both windows, then either
// the same-point diagnostic or drift change-point localization.
DecisionReport run_pipeline(const Path& path, const DiffusionModel& model,
                            const PipelineConfig& config);

std::string report_to_json(const DecisionReport& report);
std::string report_to_text(const DecisionReport& report);
std::string test_result_to_json(const TestResult& result);

}  // namespace sdecp
