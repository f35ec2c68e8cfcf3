#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdecp/changepoint.hpp"
#include "sdecp/experiment.hpp"
#include "sdecp/parallel.hpp"
#include "sdecp/pipeline.hpp"
#include "sdecp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdecp;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return j;
}

template <typename T>
void assign_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

DriftTestChoice parse_drift_test(const std::string& s) {
  if (s == "t1") return DriftTestChoice::t1;
  if (s == "t2") return DriftTestChoice::t2;
  if (s == "both") return DriftTestChoice::both;
  throw ConfigError("drift_test must be 't1', 't2' or 'both'");
}

PipelineConfig parse_pipeline_config(const json& j, int threads) {
  PipelineConfig cfg;
  assign_if(j, "level", cfg.level);
  if (j.contains("drift_test")) cfg.drift_test = parse_drift_test(j.at("drift_test"));
  assign_if(j, "expansion_fractions", cfg.expansion_fractions);
  if (j.contains("epsilon1")) {
    const json& e = j.at("epsilon1");
    assign_if(e, "cap", cfg.epsilon1_cap);
    assign_if(e, "slope0", cfg.epsilon1_slope0);
    assign_if(e, "slope1", cfg.epsilon1_slope1);
  }
  assign_if(j, "same_point_bootstrap_reps", cfg.same_point_bootstrap_reps);
  assign_if(j, "min_drift_margin_time", cfg.min_drift_margin_time);
  assign_if(j, "seed", cfg.seed);
  assign_if(j, "substeps", cfg.substeps);
  if (j.contains("critical_values")) {
    const json& c = j.at("critical_values");
    std::string source = "table";
    assign_if(c, "source", source);
    if (source == "mc") {
      cfg.cv.kind = CriticalValueSource::Kind::monte_carlo;
    } else if (source != "table") {
      throw ConfigError("critical_values.source must be 'table' or 'mc'");
    }
    assign_if(c, "grid", cfg.cv.mc.grid);
    assign_if(c, "reps", cfg.cv.mc.reps);
    assign_if(c, "seed", cfg.cv.mc.seed);
  }
  cfg.cv.mc.threads = threads;
  cfg.validate();
  return cfg;
}

ExperimentSpec parse_experiment_spec(const json& j) {
  ExperimentSpec spec;
  assign_if(j, "model", spec.model_name);
  assign_if(j, "situation", spec.situation);
  assign_if(j, "n", spec.n);
  assign_if(j, "h_exponent", spec.h_exponent);
  if (j.contains("drift_change")) {
    const json& d = j.at("drift_change");
    std::string mode = "shrinking";
    assign_if(d, "mode", mode);
    if (mode == "fixed") {
      spec.drift_change.mode = DriftChangeSpec::Mode::fixed;
    } else if (mode != "shrinking") {
      throw ConfigError("drift_change.mode must be 'shrinking' or 'fixed'");
    }
    assign_if(d, "exponent", spec.drift_change.exponent);
    assign_if(d, "delta", spec.drift_change.delta);
  }
  if (j.contains("alpha_change_delta")) {
    spec.alpha_change_delta = j.at("alpha_change_delta").get<double>();
  }
  assign_if(j, "replications", spec.replications);
  assign_if(j, "seed", spec.seed);
  assign_if(j, "threads", spec.threads);
  assign_if(j, "substeps", spec.substeps);
  assign_if(j, "use_exact_ou", spec.use_exact_ou);
  int threads = spec.threads > 0 ? spec.threads : default_thread_count();
  if (j.contains("pipeline")) {
    spec.pipeline = parse_pipeline_config(j.at("pipeline"), threads);
  } else {
    spec.pipeline.cv.mc.threads = threads;
  }
  return spec;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory '" + dir + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  return os;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json schedule_to_json(const ParamSchedule& s) {
  json segs = json::array();
  for (const auto& seg : s.segments) {
    segs.push_back(json{{"fraction_end", seg.fraction_end},
                        {"alpha", std::vector<double>(seg.alpha.begin(), seg.alpha.end())},
                        {"beta", std::vector<double>(seg.beta.begin(), seg.beta.end())}});
  }
  return segs;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& config_path, const std::string& out_dir_flag,
                 std::int64_t reps_flag, std::uint64_t seed_flag, bool have_seed) {
  json j = load_json_file(config_path);
  ExperimentSpec spec = parse_experiment_spec(j);
  if (reps_flag > 0) spec.replications = static_cast<int>(reps_flag);
  if (have_seed) spec.seed = seed_flag;
  std::string out_dir = out_dir_flag;
  if (out_dir.empty()) assign_if(j, "output_dir", out_dir);
  if (out_dir.empty()) throw ConfigError("simulate: output directory required (-o)");
  for (const auto& w : spec.validate()) std::cerr << "warning: " << w << "\n";

  ResolvedExperiment exp = resolve_experiment(spec);
  ensure_dir(out_dir);

  json manifest;
  manifest["model"] = spec.model_name;
  manifest["situation"] = spec.situation;
  manifest["n"] = spec.n;
  manifest["h"] = exp.h;
  manifest["h_exponent"] = spec.h_exponent;
  manifest["seed"] = spec.seed;
  manifest["substeps"] = spec.substeps;
  manifest["exact_ou"] = (spec.model_name == "ou" && spec.use_exact_ou);
  manifest["x0"] = exp.x0[0];
  manifest["schedule"] = schedule_to_json(exp.schedule);
  manifest["truth"] = json{{"tau_alpha", exp.tau_alpha_true},
                           {"alpha1", exp.alpha1_true[0]},
                           {"alpha2", exp.alpha2_true[0]},
                           {"theta_beta", exp.theta_beta}};
  if (exp.tau_beta_true) manifest["truth"]["tau_beta"] = *exp.tau_beta_true;

  json files = json::array();
  for (int r = 0; r < spec.replications; ++r) {
    Path path = simulate_replication(exp, r);
    char name[64];
    std::snprintf(name, sizeof(name), "path_%04d.csv", r);
    write_path_csv(path, out_dir + "/" + name);
    files.push_back(name);
  }
  manifest["files"] = files;
  open_out(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
  std::cout << "wrote " << spec.replications << " path(s) to " << out_dir << "\n";
  return 0;
}

// ----------------------------------------------------------------- analyze

int cmd_analyze(const std::string& csv_path, const std::string& model_name,
                const std::string& config_path, const std::string& out_prefix, int threads,
                const std::string& profile_file) {
  PipelineConfig cfg;
  if (!config_path.empty()) {
    cfg = parse_pipeline_config(load_json_file(config_path), threads);
  } else {
    cfg.cv.mc.threads = threads;
  }
  DiffusionModel model = model_by_name(model_name);
  Path path = read_path_csv(csv_path);
  DecisionReport report = run_pipeline(path, model, cfg);

  if (!profile_file.empty()) {
    if (report.alpha1 && report.alpha2) {
      auto profiled = estimate_tau_alpha(path, model, *report.alpha1->alpha_hat,
                                         *report.alpha2->alpha_hat, true);
      write_profile_csv(profiled, path.n(), profile_file);
      std::cout << "wrote tau_alpha contrast profile to " << profile_file << "\n";
    } else {
      std::cerr << "warning: no alpha estimates, profile not written\n";
    }
  }

  std::string text = report_to_text(report);
  std::cout << text;
  if (!out_prefix.empty()) {
    open_out(out_prefix + ".json") << report_to_json(report) << "\n";
    open_out(out_prefix + ".txt") << text;
    std::cout << "wrote " << out_prefix << ".json and " << out_prefix << ".txt\n";
  } else {
    std::cout << report_to_json(report) << "\n";
  }
  return 0;
}

// -------------------------------------------------------------- experiment

struct Column {
  std::string name;
  std::function<std::string(const RepRecord&)> get;
};

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

void write_histogram(const std::string& path, const std::vector<double>& xs, int bins = 40) {
  auto os = open_out(path);
  os << "bin_lo,bin_hi,count,density\n";
  if (xs.empty()) return;
  double lo = *std::min_element(xs.begin(), xs.end());
  double hi = *std::max_element(xs.begin(), xs.end());
  if (hi <= lo) hi = lo + 1.0;
  double width = (hi - lo) / bins;
  std::vector<std::int64_t> count(bins, 0);
  for (double x : xs) {
    int b = std::min(bins - 1, static_cast<int>((x - lo) / width));
    count[b]++;
  }
  for (int b = 0; b < bins; ++b) {
    double density = static_cast<double>(count[b]) / (static_cast<double>(xs.size()) * width);
    os << fmt(lo + b * width) << ',' << fmt(lo + (b + 1) * width) << ',' << count[b] << ','
       << fmt(density) << "\n";
  }
}

void write_edf(const std::string& path, std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  auto os = open_out(path);
  os << "value,cdf\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    os << fmt(xs[i]) << ',' << fmt(static_cast<double>(i + 1) / static_cast<double>(xs.size()))
       << "\n";
  }
}

void write_plot_script(const std::string& dir, bool with_tau_beta) {
  auto os = open_out(dir + "/plot_tests.py");
  os << "import csv\n"
        "import matplotlib.pyplot as plt\n"
        "\n"
        "def read(path):\n"
        "    with open(path) as f:\n"
        "        rows = list(csv.DictReader(f))\n"
        "    return rows\n"
        "\n"
        "def edf_plot(ax, stat_col, ref_file, title):\n"
        "    rows = read('replications.csv')\n"
        "    xs = sorted(float(r[stat_col]) for r in rows if r[stat_col])\n"
        "    ys = [(i + 1) / len(xs) for i in range(len(xs))]\n"
        "    ref = read(ref_file)\n"
        "    ax.step(xs, ys, color='black', label='empirical')\n"
        "    ax.plot([float(r['value']) for r in ref], [float(r['cdf']) for r in ref],\n"
        "            color='red', label='reference')\n"
        "    ax.set_title(title)\n"
        "    ax.legend()\n"
        "\n"
        "fig, axes = plt.subplots(2, 2, figsize=(10, 8))\n"
        "edf_plot(axes[0][0], 't1_left', 'ref_edf_bridge1.csv', 'T1 left vs sup|B1|')\n"
        "edf_plot(axes[0][1], 't1_right', 'ref_edf_bridge1.csv', 'T1 right vs sup|B1|')\n"
        "edf_plot(axes[1][0], 't2_left', 'ref_edf_bridge2.csv', 'T2 left vs sup||B2||')\n"
        "edf_plot(axes[1][1], 't2_right', 'ref_edf_bridge2.csv', 'T2 right vs sup||B2||')\n"
        "fig.tight_layout()\n"
        "fig.savefig('tests_edf.png', dpi=120)\n"
        "print('wrote tests_edf.png')\n";
  if (!with_tau_beta) return;
  auto os2 = open_out(dir + "/plot_tau_beta.py");
  os2 << "import csv\n"
         "import matplotlib.pyplot as plt\n"
         "\n"
         "def read(path):\n"
         "    with open(path) as f:\n"
         "        return list(csv.DictReader(f))\n"
         "\n"
         "rows = read('replications.csv')\n"
         "xs = sorted(float(r['tau_beta_scaled']) for r in rows if r['tau_beta_scaled'])\n"
         "ys = [(i + 1) / len(xs) for i in range(len(xs))]\n"
         "ref = read('ref_limit_argmin.csv')\n"
         "fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))\n"
         "a.hist(xs, bins=40, density=True, color='gray')\n"
         "a.hist([float(r['value']) for r in ref], bins=80, density=True,\n"
         "       histtype='step', color='red')\n"
         "a.set_title('T theta^2 (tau_beta - tau*)')\n"
         "b.step(xs, ys, color='black', label='empirical')\n"
         "b.plot([float(r['value']) for r in ref], [float(r['cdf']) for r in ref],\n"
         "       color='red', label='limit law')\n"
         "b.legend()\n"
         "fig.tight_layout()\n"
         "fig.savefig('tau_beta_limit.png', dpi=120)\n"
         "print('wrote tau_beta_limit.png')\n";
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir_flag,
                   std::int64_t reps_flag, std::uint64_t seed_flag, bool have_seed,
                   int threads_flag) {
  json j = load_json_file(config_path);
  ExperimentSpec spec = parse_experiment_spec(j);
  if (reps_flag > 0) spec.replications = static_cast<int>(reps_flag);
  if (have_seed) spec.seed = seed_flag;
  if (threads_flag > 0) spec.threads = threads_flag;
  std::string out_dir = out_dir_flag;
  if (out_dir.empty()) assign_if(j, "output_dir", out_dir);
  if (out_dir.empty()) throw ConfigError("experiment: output directory required (-o)");
  for (const auto& w : spec.validate()) std::cerr << "warning: " << w << "\n";
  if (spec.replications == 1) std::cerr << "warning: single replication, sd columns empty\n";

  ResolvedExperiment exp = resolve_experiment(spec);
  ensure_dir(out_dir);
  ExperimentResult result = run_experiment(exp, spec.situation == 2);

  const double T = exp.total_time();
  const double theta = exp.theta_beta;
  auto tau_beta_of = [&](const RepRecord& r) -> std::optional<double> {
    if (r.report.drift_change) return r.report.drift_change->tau.tau_hat;
    return r.tau_beta_forced;
  };
  auto tau_beta_scaled = [&](const RepRecord& r) -> std::optional<double> {
    auto t = tau_beta_of(r);
    if (!t || !exp.tau_beta_true || theta <= 0.0) return std::nullopt;
    return T * theta * theta * (*t - *exp.tau_beta_true);
  };

  auto stat_of = [](const std::optional<TestResult>& t) -> std::string {
    return t ? fmt(t->statistic) : "";
  };
  auto reject_of = [](const std::optional<TestResult>& t) -> std::string {
    return t ? (t->reject ? "1" : "0") : "";
  };

  std::vector<Column> columns = {
      {"rep", [](const RepRecord& r) { return std::to_string(r.rep); }},
      {"ok", [](const RepRecord& r) { return r.ok ? "1" : "0"; }},
      {"branch",
       [](const RepRecord& r) { return r.ok ? branch_name(r.report.branch) : r.error; }},
      {"t_alpha", [](const RepRecord& r) {
         return r.ok ? fmt(r.report.diffusion_test.statistic) : "";
       }},
      {"t_alpha_reject", [](const RepRecord& r) {
         return r.ok ? (r.report.diffusion_test.reject ? "1" : "0") : "";
       }},
      {"alpha1", [](const RepRecord& r) {
         return r.ok && r.report.alpha1 ? fmt((*r.report.alpha1->alpha_hat)[0]) : "";
       }},
      {"alpha2", [](const RepRecord& r) {
         return r.ok && r.report.alpha2 ? fmt((*r.report.alpha2->alpha_hat)[0]) : "";
       }},
      {"tau_alpha", [](const RepRecord& r) {
         return r.ok && r.report.tau_alpha ? fmt(r.report.tau_alpha->tau_hat) : "";
       }},
      {"epsilon1", [](const RepRecord& r) {
         return r.ok && r.report.window ? fmt(r.report.window->epsilon1) : "";
       }},
      {"t1_left", [&](const RepRecord& r) { return r.ok ? stat_of(r.report.left.t1) : ""; }},
      {"t1_left_reject",
       [&](const RepRecord& r) { return r.ok ? reject_of(r.report.left.t1) : ""; }},
      {"t2_left", [&](const RepRecord& r) { return r.ok ? stat_of(r.report.left.t2) : ""; }},
      {"t2_left_reject",
       [&](const RepRecord& r) { return r.ok ? reject_of(r.report.left.t2) : ""; }},
      {"t1_right", [&](const RepRecord& r) { return r.ok ? stat_of(r.report.right.t1) : ""; }},
      {"t1_right_reject",
       [&](const RepRecord& r) { return r.ok ? reject_of(r.report.right.t1) : ""; }},
      {"t2_right", [&](const RepRecord& r) { return r.ok ? stat_of(r.report.right.t2) : ""; }},
      {"t2_right_reject",
       [&](const RepRecord& r) { return r.ok ? reject_of(r.report.right.t2) : ""; }},
      {"same_point", [](const RepRecord& r) { return opt_fmt(r.same_point_stat); }},
      {"beta_split", [](const RepRecord& r) {
         return r.ok && r.report.drift_change ? fmt(r.report.drift_change->split_used) : "";
       }},
      {"tau_beta", [&](const RepRecord& r) { return opt_fmt(tau_beta_of(r)); }},
      {"tau_beta_scaled", [&](const RepRecord& r) { return opt_fmt(tau_beta_scaled(r)); }},
      {"forced_fallback", [](const RepRecord& r) { return r.forced_fallback ? "1" : "0"; }},
  };

  {
    auto os = open_out(out_dir + "/replications.csv");
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c].name;
    os << "\n";
    for (const auto& rec : result.records) {
      for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c].get(rec);
      os << "\n";
    }
  }

  // Aggregates over successful replications.
  auto collect = [&](const std::function<std::optional<double>(const RepRecord&)>& get) {
    std::vector<double> xs;
    for (const auto& r : result.records) {
      if (!r.ok) continue;
      if (auto v = get(r)) xs.push_back(*v);
    }
    return xs;
  };
  std::size_t failures = 0;
  for (const auto& r : result.records) {
    if (!r.ok) ++failures;
  }

  {
    auto os = open_out(out_dir + "/aggregates.csv");
    os << "metric,count,mean,sd\n";
    auto emit = [&](const std::string& name, const std::vector<double>& xs) {
      os << name << ',' << xs.size() << ',' << (xs.empty() ? "" : fmt(mean_of(xs))) << ','
         << (xs.size() < 2 ? "" : fmt(sd_of(xs))) << "\n";
    };
    emit("alpha1", collect([](const RepRecord& r) -> std::optional<double> {
           if (!r.report.alpha1) return std::nullopt;
           return (*r.report.alpha1->alpha_hat)[0];
         }));
    emit("alpha2", collect([](const RepRecord& r) -> std::optional<double> {
           if (!r.report.alpha2) return std::nullopt;
           return (*r.report.alpha2->alpha_hat)[0];
         }));
    emit("tau_alpha", collect([](const RepRecord& r) -> std::optional<double> {
           if (!r.report.tau_alpha) return std::nullopt;
           return r.report.tau_alpha->tau_hat;
         }));
    emit("same_point", collect([](const RepRecord& r) { return r.same_point_stat; }));
    emit("tau_beta", collect(tau_beta_of));
    auto rejections = [&](const char* name,
                          const std::function<const std::optional<TestResult>*(const RepRecord&)>&
                              pick) {
      std::vector<double> xs;
      for (const auto& r : result.records) {
        if (!r.ok) continue;
        const auto* t = pick(r);
        if (t && t->has_value()) xs.push_back((*t)->reject ? 1.0 : 0.0);
      }
      emit(name, xs);
    };
    rejections("t1_left_rejected",
               [](const RepRecord& r) { return &r.report.left.t1; });
    rejections("t2_left_rejected",
               [](const RepRecord& r) { return &r.report.left.t2; });
    rejections("t1_right_rejected",
               [](const RepRecord& r) { return &r.report.right.t1; });
    rejections("t2_right_rejected",
               [](const RepRecord& r) { return &r.report.right.t2; });
    os << "failures," << failures << ",,\n";
  }

  // Histogram + reference data for the figure analogs.
  auto stat_values = [&](const std::function<const std::optional<TestResult>*(const RepRecord&)>&
                             pick) {
    std::vector<double> xs;
    for (const auto& r : result.records) {
      if (!r.ok) continue;
      const auto* t = pick(r);
      if (t && t->has_value()) xs.push_back((*t)->statistic);
    }
    return xs;
  };
  write_histogram(out_dir + "/hist_t1_left.csv",
                  stat_values([](const RepRecord& r) { return &r.report.left.t1; }));
  write_histogram(out_dir + "/hist_t1_right.csv",
                  stat_values([](const RepRecord& r) { return &r.report.right.t1; }));
  write_histogram(out_dir + "/hist_t2_left.csv",
                  stat_values([](const RepRecord& r) { return &r.report.left.t2; }));
  write_histogram(out_dir + "/hist_t2_right.csv",
                  stat_values([](const RepRecord& r) { return &r.report.right.t2; }));
  write_histogram(out_dir + "/hist_same_point.csv",
                  collect([](const RepRecord& r) { return r.same_point_stat; }));

  int threads = spec.threads > 0 ? spec.threads : default_thread_count();
  write_edf(out_dir + "/ref_edf_bridge1.csv",
            sample_brownian_bridge_sup(1, 10000, 10000, spec.pipeline.cv.mc.seed, threads));
  write_edf(out_dir + "/ref_edf_bridge2.csv",
            sample_brownian_bridge_sup(2, 10000, 10000, spec.pipeline.cv.mc.seed, threads));

  bool with_tau_beta = spec.situation == 2 && theta > 0.0;
  if (with_tau_beta) {
    write_histogram(out_dir + "/hist_tau_beta_scaled.csv", collect(tau_beta_scaled));
    Vector direction = (exp.beta1_true - exp.beta2_true) / theta;
    double J;
    if (spec.model_name == "ou") {
      // Left-window regime governs tau_beta in the model-1 benchmark.
      J = compute_J_ou_analytic(exp.alpha1_true, exp.beta2_true, direction);
    } else {
      const Vector& alpha_ref = *exp.tau_beta_true < exp.tau_alpha_true ? exp.alpha1_true
                                                                        : exp.alpha2_true;
      J = compute_J(exp.model, alpha_ref, exp.beta2_true, direction, {}, 20000);
    }
    write_edf(out_dir + "/ref_limit_argmin.csv",
              sample_limit_argmin(J, derive_seed(spec.seed, 77), threads).values);
  }
  write_plot_script(out_dir, with_tau_beta);

  // Resolved spec for reproducibility.
  json out_spec;
  out_spec["model"] = spec.model_name;
  out_spec["situation"] = spec.situation;
  out_spec["n"] = spec.n;
  out_spec["h"] = exp.h;
  out_spec["replications"] = spec.replications;
  out_spec["seed"] = spec.seed;
  out_spec["theta_beta"] = theta;
  out_spec["schedule"] = schedule_to_json(exp.schedule);
  open_out(out_dir + "/spec.json") << out_spec.dump(2) << "\n";

  std::cout << "experiment complete: " << result.records.size() - failures << "/"
            << result.records.size() << " replications ok; results in " << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------- critical-values

int cmd_critical_values(std::vector<int> ks, std::vector<double> epss, std::int64_t grid,
                        std::int64_t reps, std::uint64_t seed, int threads,
                        const std::string& out_file) {
  if (ks.empty()) ks = {1, 2};
  if (epss.empty()) epss = {0.05};
  std::ostringstream table;
  table << "k,eps,value,stderr\n";
  for (int k : ks) {
    auto sample = sample_brownian_bridge_sup(k, grid, reps, seed, threads);
    for (double eps : epss) {
      if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must be in (0, 1)");
      auto idx = static_cast<std::int64_t>(std::ceil((1.0 - eps) * static_cast<double>(reps)));
      idx = std::min(std::max<std::int64_t>(idx, 1), reps);
      double value = sample[static_cast<std::size_t>(idx - 1)];

      // Ten independent sub-samples give the quantile a stderr.
      int n_batches = 10;
      std::vector<double> batch_q;
      std::int64_t per = reps / n_batches;
      if (per >= 10) {
        for (int b = 0; b < n_batches; ++b) {
          auto part = sample_brownian_bridge_sup(k, grid, per, derive_seed(seed, 1000 + b),
                                                 threads);
          auto bi = static_cast<std::int64_t>(std::ceil((1.0 - eps) * static_cast<double>(per)));
          bi = std::min(std::max<std::int64_t>(bi, 1), per);
          batch_q.push_back(part[static_cast<std::size_t>(bi - 1)]);
        }
      }
      double se = batch_q.size() >= 2 ? sd_of(batch_q) / std::sqrt(10.0) : 0.0;
      table << k << ',' << eps << ',' << fmt(value) << ',' << fmt(se) << "\n";
    }
  }
  std::cout << table.str();
  if (!out_file.empty()) {
    open_out(out_file) << table.str();
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- limit-law

int cmd_limit_law(double J, std::int64_t reps, double v_max, double grid_step,
                  std::uint64_t seed, int threads, const std::string& out_file) {
  if (!(J > 0.0)) throw ConfigError("limit-law: J must be positive");
  if (v_max <= 0.0) v_max = 50.0 / J;
  if (grid_step <= 0.0) grid_step = 0.01 / J;
  auto sample = sample_limit_argmin(J, reps, v_max, grid_step, seed, threads);
  std::vector<double> sorted = sample.values;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    auto idx = static_cast<std::size_t>(p * (sorted.size() - 1));
    return sorted[idx];
  };
  std::cout << "J = " << J << ", reps = " << reps << ", boundary fraction = "
            << sample.boundary_fraction << "\n";
  std::cout << "quantiles: 5% " << q(0.05) << ", 25% " << q(0.25) << ", 50% " << q(0.5)
            << ", 75% " << q(0.75) << ", 95% " << q(0.95) << "\n";
  if (!out_file.empty()) {
    auto os = open_out(out_file);
    os << "value,cdf\n";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      os << fmt(sorted[i]) << ',' << fmt(static_cast<double>(i + 1) / sorted.size()) << "\n";
    }
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point inference for ergodic diffusions observed at high frequency"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_prefix, csv_path, model_name = "ou", out_file;
  std::string profile_file;
  std::int64_t reps_flag = 0;
  std::uint64_t seed_flag = 0;
  bool have_seed = false;
  int threads = default_thread_count();

  auto* sim = app.add_subcommand("simulate", "generate benchmark paths as CSV");
  sim->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  sim->add_option("-o,--out", out_dir, "output directory");
  sim->add_option("-r,--replications", reps_flag, "override replication count");
  sim->add_option("-s,--seed", seed_flag, "override base seed")->each([&](const std::string&) {
    have_seed = true;
  });

  auto* ana = app.add_subcommand("analyze", "run the decision pipeline on a path CSV");
  ana->add_option("csv", csv_path, "input path CSV (t,x1,...,xd)")->required();
  ana->add_option("-m,--model", model_name, "builtin model name (ou, hyperbolic)");
  ana->add_option("-c,--config", config_path, "pipeline config (JSON)");
  ana->add_option("-o,--out", out_prefix, "output prefix for .json/.txt reports");
  ana->add_option("-t,--threads", threads, "worker threads");
  ana->add_option("--tau-profile", profile_file, "dump the tau_alpha contrast profile CSV");

  auto* exp = app.add_subcommand("experiment", "replicate a benchmark and tabulate results");
  exp->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  exp->add_option("-o,--out", out_dir, "output directory");
  exp->add_option("-r,--replications", reps_flag, "override replication count");
  exp->add_option("-s,--seed", seed_flag, "override base seed")->each([&](const std::string&) {
    have_seed = true;
  });
  exp->add_option("-t,--threads", threads, "worker threads");

  auto* cv = app.add_subcommand("critical-values", "tabulate w_k(eps) by Monte Carlo");
  std::vector<int> ks;
  std::vector<double> epss;
  std::int64_t grid = 10000, mc_reps = 10000;
  std::uint64_t cv_seed = 20240811;
  cv->add_option("-k", ks, "bridge dimensions (default 1 2)");
  cv->add_option("-e,--eps", epss, "levels (default 0.05)");
  cv->add_option("--grid", grid, "lattice points per bridge");
  cv->add_option("--reps", mc_reps, "Monte Carlo replications");
  cv->add_option("-s,--seed", cv_seed, "seed");
  cv->add_option("-t,--threads", threads, "worker threads");
  cv->add_option("-o,--out", out_file, "output CSV");

  auto* ll = app.add_subcommand("limit-law", "sample the change-point limit law argmin");
  double J = 1.0, v_max = 0.0, grid_step = 0.0;
  std::int64_t ll_reps = 10000;
  std::uint64_t ll_seed = 7002;
  ll->add_option("-J", J, "quadratic-form constant")->required();
  ll->add_option("--reps", ll_reps, "replications");
  ll->add_option("--vmax", v_max, "grid half-width (default 50/J)");
  ll->add_option("--step", grid_step, "grid step (default 0.01/J)");
  ll->add_option("-s,--seed", ll_seed, "seed");
  ll->add_option("-t,--threads", threads, "worker threads");
  ll->add_option("-o,--out", out_file, "output CSV of the sorted sample");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, reps_flag, seed_flag, have_seed);
    if (ana->parsed()) {
      return cmd_analyze(csv_path, model_name, config_path, out_prefix, threads, profile_file);
    }
    if (exp->parsed()) {
      return cmd_experiment(config_path, out_dir, reps_flag, seed_flag, have_seed, threads);
    }
    if (cv->parsed()) {
      return cmd_critical_values(ks, epss, grid, mc_reps, cv_seed, threads, out_file);
    }
    if (ll->parsed()) {
      return cmd_limit_law(J, ll_reps, v_max, grid_step, ll_seed, threads, out_file);
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
