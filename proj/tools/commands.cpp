#include "commands.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ics/domain.hpp"
#include "ics/inference_mcmc.hpp"
#include "ics/inference_ml.hpp"
#include "ics/power.hpp"
#include "ics/report.hpp"
#include "ics/simulate.hpp"

namespace ics::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  // global
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 0;
  bool strict = false;

  // model selection
  std::string family = "joint";
  std::string delta_grouping = "coarse";
  bool rho_zero = false;
  bool delta_equal = false;

  // simulate
  std::string preset = "table1";
  int replicate_factor = 1;
  int specimens = 62;
  int fields = 5;
  std::string tissue = "ECTO";
  std::string truth_path;

  // fit
  std::string fields_path;
  std::string vessels_path;
  std::string method = "ml";
  int nodes = 20;
  long burn_in = 50000;
  long keep = 50000;
  long thin = 20;
  int chains = 4;
  bool sensitivity = false;
  bool compare_independent = false;
  double fixed_precision = 1e-6;
  double gamma_shape = 1e-3;
  double gamma_rate = 1e-3;

  // power
  std::vector<double> means{2.6, 5.0, 10.0};
  double sd = 7.5;
  int n = 25;
  double alpha = 0.05;
  double target = 0.0;
  long mc_replicates = 0;

  // recover
  int replicates = 2;
};

const std::vector<std::string> kFamilies{"pla_lmm", "lvd_pois", "lvd_negbin", "va_lmm",
                                         "circ_het", "va_conditional", "joint"};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path prepare_out_dir(const Options& o) {
  fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

ModelSpec model_spec(const Options& o) {
  ModelSpec spec;
  spec.family = parse_family(o.family).value();
  spec.delta_grouping = o.delta_grouping == "fine" ? DeltaGrouping::Fine : DeltaGrouping::Coarse;
  spec.rho_zero = o.rho_zero;
  spec.delta_equal = o.delta_equal;
  spec.validate();
  return spec;
}

PriorSpec prior_spec(const Options& o) {
  PriorSpec p;
  p.fixed_precision = o.fixed_precision;
  p.gamma_shape = o.gamma_shape;
  p.gamma_rate = o.gamma_rate;
  p.validate();
  return p;
}

ChainConfig chain_config(const Options& o, std::uint64_t seed) {
  ChainConfig c;
  c.burn_in = o.burn_in;
  c.keep_iterations = o.keep;
  c.thin = o.thin;
  c.n_chains = o.chains;
  c.seed = seed;
  c.validate();
  return c;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

TrueParams truth_for(const Options& o, const ModelSpec& spec) {
  TrueParams truth = default_truth(spec.family);
  truth.spec = spec;
  if (!o.truth_path.empty()) {
    const Json j = read_json(o.truth_path);
    // Accept either a bare parameter object or a truth.json written by simulate.
    truth.theta = params_from_json(spec, j.contains("truth") ? j["truth"] : j);
  }
  if (static_cast<int>(truth.theta.delta.size()) != spec.delta_count())
    truth.theta.delta.resize(static_cast<std::size_t>(spec.delta_count()), 1.0);
  truth.validate();
  return truth;
}

DesignPreset design_for(const Options& o) {
  if (o.preset == "table1") return DesignPreset::table1(o.replicate_factor);
  const auto t = parse_tissue(o.tissue);
  if (!t) throw InputError("unknown tissue code " + o.tissue);
  return DesignPreset::balanced(o.specimens, o.fields, *t);
}

Dataset load_input(const Options& o) {
  const fs::path fields = o.fields_path.empty() ? fs::path(o.out_dir) / "fields.csv" : fs::path(o.fields_path);
  const fs::path vessels =
      o.vessels_path.empty() ? fs::path(o.out_dir) / "vessels.csv" : fs::path(o.vessels_path);
  for (const auto& p : {fields, vessels})
    if (!fs::exists(p)) throw InputError("input file not found: " + p.string());
  return load_dataset(fields, vessels);
}

/// Resolved configuration as TOML text, excluding settings that cannot
/// change results (thread count, output location, the config path itself).
std::string resolved_config(const CLI::App& app, const std::string& command) {
  std::istringstream in(app.config_to_str(true, false));
  std::string line, out;
  while (std::getline(in, line)) {
    const auto key = line.substr(0, line.find('='));
    const auto trimmed = key.substr(0, key.find_last_not_of(' ') + 1);
    if (trimmed == "threads" || trimmed == "out-dir" || trimmed == "config") continue;
    const auto dot = trimmed.find('.');
    if (dot != std::string::npos && trimmed.substr(0, dot) != command) continue;
    out += line + "\n";
  }
  return out;
}

Json provenance(const CLI::App& app, const std::string& command, const Options& o) {
  Json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["config"] = resolved_config(app, command);
  return j;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CLI::App& app, const Options& o, std::ostream& out) {
  const ModelSpec spec = model_spec(o);
  const TrueParams truth = truth_for(o, spec);
  const DesignPreset design = design_for(o);
  const Dataset d = simulate_dataset(spec, truth, design, o.seed);
  const fs::path dir = prepare_out_dir(o);
  write_dataset(d, dir / "fields.csv", dir / "vessels.csv");
  Json j = provenance(app, "simulate", o);
  j["spec"] = spec_json(spec);
  j["truth"] = params_json(spec, truth.theta);
  j["design"] = {{"preset", o.preset},
                 {"replicate_factor", o.replicate_factor},
                 {"specimens", d.specimens.size()},
                 {"fields", d.field_count()},
                 {"vessels", d.vessel_count()}};
  write_text(dir / "truth.json", dump(j));
  out << "wrote " << d.specimens.size() << " specimens, " << d.field_count() << " fields, "
      << d.vessel_count() << " vessels to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_summarize(const CLI::App& app, const Options& o, std::ostream& out) {
  const Dataset d = load_input(o);
  const SummaryTable t = summarize(d);
  const fs::path dir = prepare_out_dir(o);
  const std::string csv = format_summary_csv(t);
  write_text(dir / "summary.csv", csv);
  Json j = provenance(app, "summarize", o);
  j["rows"] = summary_json(t);
  write_text(dir / "summary.json", dump(j));
  out << csv;
  return kExitOk;
}

int cmd_fit_ml(const CLI::App& app, const Options& o, const ModelSpec& spec, const ModelData& data,
               std::ostream& out, std::ostream& err) {
  MLOptions mo;
  mo.quadrature.nodes = o.nodes;
  Json j = provenance(app, "fit", o);
  j["method"] = "ml";
  MLFit fit;
  if (spec.family == Family::LVD_NEGBIN) {
    const auto rep = compare_overdispersion(data, mo);
    fit = rep.negbin;
    j["fit"] = ml_fit_json(fit);
    j["comparison"] = overdispersion_json(rep);
  } else if (spec.family == Family::CIRC_HET && !spec.delta_equal) {
    const auto rep = delta_equality_test(data, spec.delta_grouping, mo);
    fit = rep.general;
    j["fit"] = ml_fit_json(fit);
    j["delta_test"] = delta_test_json(rep);
  } else {
    fit = fit_ml(spec, data, mo);
    j["fit"] = ml_fit_json(fit);
  }
  const fs::path dir = prepare_out_dir(o);
  const fs::path path = dir / ("fit_" + o.family + "_ml.json");
  write_text(path, dump(j));
  out << "max log-likelihood " << fit.max_loglik << (fit.converged ? " (converged)" : " (NOT converged)")
      << "; wrote " << path.string() << "\n";
  if (o.strict && !fit.converged) {
    err << "strict: optimizer did not converge: " << fit.message << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_fit_mcmc(const CLI::App& app, const Options& o, const ModelSpec& spec,
                 const ModelData& data, std::ostream& out, std::ostream& err) {
  const PriorSpec priors = prior_spec(o);
  const ChainConfig config = chain_config(o, o.seed);
  const ChainResult chains = run_mcmc(spec, priors, data, config);
  const FitResult fit = summarize_posterior(chains);
  const DiagnosticsReport diag = diagnose(chains);

  Json j = provenance(app, "fit", o);
  j["method"] = "mcmc";
  j["priors"] = priors_json(priors);
  j["chains"] = chain_config_json(config);
  j["fit"] = fit_result_json(fit);
  j["acceptance"] = acceptance_json(chains);
  j["diagnostics"] = diagnostics_json(diag);
  if (o.sensitivity) {
    Json runs = Json::array();
    for (const auto& r : prior_sensitivity(spec, priors, data, config, fit)) {
      Json e;
      e["factor"] = r.factor;
      e["max_shift_sd"] = number_or_null(r.max_shift_sd);
      e["fit"] = fit_result_json(r.fit);
      runs.push_back(e);
    }
    j["prior_sensitivity"] = runs;
  }
  if (o.compare_independent && spec.family == Family::JOINT && !spec.rho_zero) {
    ModelSpec ind = spec;
    ind.rho_zero = true;
    const FitResult other = summarize_posterior(run_mcmc(ind, priors, data, config));
    PairedFit paired{fit, other, {}};
    for (const auto& p : other.params) {
      const auto& q = fit.at(p.name);
      paired.differences.push_back({p.name, q.median, p.median, q.median - p.median,
                                    std::hypot(q.mcse_median, p.mcse_median)});
    }
    j["independent"] = paired_fit_json(paired);
  }

  const fs::path dir = prepare_out_dir(o);
  const std::string stem = o.family + (spec.rho_zero ? "_rho0" : "");
  write_text(dir / ("summary_" + stem + ".json"), dump(j));
  write_text(dir / ("draws_" + stem + ".csv"), format_draws_csv(chains));
  write_text(dir / ("diagnostics_" + stem + ".txt"), diag.text());
  out << "kept " << fit.draws_per_chain << " draws x " << fit.n_chains << " chains; "
      << diag.flags.size() << " convergence flag(s); wrote " << (dir / ("summary_" + stem + ".json")).string()
      << "\n";
  if (o.strict && !diag.ok()) {
    err << "strict: convergence flags raised\n" << diag.text();
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_fit(const CLI::App& app, const Options& o, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = model_spec(o);
  const Dataset d = load_input(o);
  const ModelData data = ModelData::build(d);
  if (o.method == "ml") return cmd_fit_ml(app, o, spec, data, out, err);
  return cmd_fit_mcmc(app, o, spec, data, out, err);
}

int cmd_power(const CLI::App& app, const Options& o, std::ostream& out) {
  PowerScenario s{o.means, o.sd, o.n, o.alpha};
  s.validate();
  Json j = provenance(app, "power", o);
  j["difference_parameter"] = difference_parameter(s);
  j["noncentrality"] = noncentrality(s);
  j["power"] = anova_power(s);
  std::string header = "groups,n_per_group,within_sd,alpha,difference_parameter,noncentrality,power";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%d,%.6g,%.6g,%.6f,%.6f,%.6f", s.group_means.size(),
                s.n_per_group, s.within_sd, s.alpha, difference_parameter(s), noncentrality(s),
                anova_power(s));
  std::string row = buf;
  if (o.target > 0.0) {
    const int n = required_n(s, o.target);
    j["target_power"] = o.target;
    j["required_n"] = n;
    header += ",target_power,required_n";
    std::snprintf(buf, sizeof buf, ",%.6g,%d", o.target, n);
    row += buf;
  }
  if (o.mc_replicates > 0) {
    const auto mc = monte_carlo_power(s, o.mc_replicates, o.seed);
    j["monte_carlo"] = {{"power", mc.power}, {"standard_error", mc.standard_error},
                        {"replicates", mc.replicates}};
    header += ",mc_power,mc_se";
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f", mc.power, mc.standard_error);
    row += buf;
  }
  out << header << "\n" << row << "\n";
  if (app.count("--out-dir") > 0) {
    const fs::path dir = prepare_out_dir(o);
    write_text(dir / "power.json", dump(j));
  }
  return kExitOk;
}

struct ReplicateOutcome {
  std::vector<double> estimate, lower, upper;
  bool ok = false;
  std::string error;
  // contrast with the conditional model (joint truth only)
  double gamma = std::nan(""), gamma_lower = std::nan(""), gamma_upper = std::nan("");
  std::array<double, 3> beta_conditional{}, beta_joint{};
};

int cmd_recover(const CLI::App& app, const Options& o, std::ostream& out) {
  const ModelSpec spec = model_spec(o);
  const TrueParams truth = truth_for(o, spec);
  const DesignPreset design = design_for(o);
  const PriorSpec priors = prior_spec(o);
  if (o.replicates < 1) throw InputError("recover: --replicates must be positive");
  const auto names = parameter_names(spec);
  const auto true_values = pack(spec, truth.theta);
  const bool contrast = spec.family == Family::JOINT;

  std::vector<ReplicateOutcome> reps(static_cast<std::size_t>(o.replicates));
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < o.replicates; ++r) {
    auto& rep = reps[r];
    try {
      Rng seeds = make_substream(o.seed, Stream::Replicate, static_cast<std::uint64_t>(r));
      const std::uint64_t sim_seed = seeds();
      const std::uint64_t chain_seed = seeds();
      const ModelData data = ModelData::build(simulate_dataset(spec, truth, design, sim_seed));
      if (o.method == "ml") {
        MLOptions mo;
        mo.quadrature.nodes = o.nodes;
        const MLFit fit = fit_ml(spec, data, mo);
        rep.estimate = fit.estimates;
        rep.lower = fit.ci_lower;
        rep.upper = fit.ci_upper;
      } else {
        const FitResult fit = summarize_posterior(run_mcmc(spec, priors, data, chain_config(o, chain_seed)));
        for (const auto& p : fit.params) {
          rep.estimate.push_back(p.median);
          rep.lower.push_back(p.lower);
          rep.upper.push_back(p.upper);
        }
      }
      if (contrast) {
        const MLFit cond = fit_ml(ModelSpec{Family::VA_CONDITIONAL}, data);
        const int ig = 4;  // alpha, beta x3, gamma
        rep.gamma = cond.estimates[ig];
        rep.gamma_lower = cond.ci_lower[ig];
        rep.gamma_upper = cond.ci_upper[ig];
        for (int g = 0; g < 3; ++g) {
          rep.beta_conditional[g] = cond.estimates[1 + g];
          rep.beta_joint[g] = rep.estimate[1 + g];
        }
      }
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.error = e.what();
    }
  }
  for (std::size_t r = 0; r < reps.size(); ++r)
    if (!reps[r].ok) throw NumericalError("replicate " + std::to_string(r) + ": " + reps[r].error);

  const fs::path dir = prepare_out_dir(o);
  std::string csv = "parameter,truth,mean_estimate,bias,rmse,coverage,replicates\n";
  Json params = Json::array();
  char buf[512];
  for (std::size_t k = 0; k < names.size(); ++k) {
    double sum = 0.0, sq = 0.0;
    int covered = 0, with_interval = 0;
    for (const auto& rep : reps) {
      const double e = rep.estimate[k] - true_values[k];
      sum += rep.estimate[k];
      sq += e * e;
      if (std::isfinite(rep.lower[k]) && std::isfinite(rep.upper[k])) {
        ++with_interval;
        covered += rep.lower[k] <= true_values[k] && true_values[k] <= rep.upper[k];
      }
    }
    const double n = static_cast<double>(reps.size());
    const double mean_est = sum / n;
    const double coverage = with_interval ? static_cast<double>(covered) / with_interval : std::nan("");
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%.6g,%zu\n", names[k].c_str(),
                  true_values[k], mean_est, mean_est - true_values[k], std::sqrt(sq / n), coverage,
                  reps.size());
    csv += buf;
    params.push_back({{"parameter", names[k]},
                      {"truth", true_values[k]},
                      {"mean_estimate", mean_est},
                      {"bias", mean_est - true_values[k]},
                      {"rmse", std::sqrt(sq / n)},
                      {"coverage", number_or_null(coverage)},
                      {"replicates", reps.size()}});
  }
  write_text(dir / "recover_parameters.csv", csv);

  Json j = provenance(app, "recover", o);
  j["spec"] = spec_json(spec);
  j["truth"] = params_json(spec, truth.theta);
  j["method"] = o.method;
  j["interval_type"] = o.method == "ml" ? "wald_unconstrained_scale" : "equal_tailed_95_empirical_quantiles";
  j["parameters"] = params;

  if (contrast) {
    std::string ccsv =
        "replicate,gamma_hat,gamma_lower,gamma_upper,beta_TZ_conditional,beta_TZ_joint,"
        "beta_CIN_conditional,beta_CIN_joint,beta_CARC_conditional,beta_CARC_joint\n";
    int positive = 0;
    double gsum = 0.0;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      const auto& rep = reps[r];
      positive += rep.gamma > 0.0;
      gsum += rep.gamma;
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r,
                    rep.gamma, rep.gamma_lower, rep.gamma_upper, rep.beta_conditional[0],
                    rep.beta_joint[0], rep.beta_conditional[1], rep.beta_joint[1],
                    rep.beta_conditional[2], rep.beta_joint[2]);
      ccsv += buf;
    }
    write_text(dir / "recover_contrast.csv", ccsv);
    j["contrast"] = {{"conditional_family", "va_conditional"},
                     {"gamma_mean", gsum / reps.size()},
                     {"gamma_positive_fraction", static_cast<double>(positive) / reps.size()}};
  }
  write_text(dir / "recover.json", dump(j));
  out << csv;
  return kExitOk;
}

void add_model_options(CLI::App* sub, Options& o) {
  sub->add_option("--family", o.family, "model family")
      ->check(CLI::IsMember(kFamilies))
      ->capture_default_str();
  sub->add_option("--delta-grouping", o.delta_grouping, "circularity multiplier grouping")
      ->check(CLI::IsMember({"coarse", "fine"}))
      ->capture_default_str();
  sub->add_flag("--rho-zero", o.rho_zero, "joint model with rho fixed at 0");
  sub->add_flag("--delta-equal", o.delta_equal, "circularity model with all multipliers 1");
}

void add_design_options(CLI::App* sub, Options& o) {
  sub->add_option("--preset", o.preset, "design preset")
      ->check(CLI::IsMember({"table1", "balanced"}))
      ->capture_default_str();
  sub->add_option("--replicate-factor", o.replicate_factor, "copies of the table1 layout")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--specimens", o.specimens, "balanced: specimens")->capture_default_str();
  sub->add_option("--fields", o.fields, "balanced: fields per specimen")->capture_default_str();
  sub->add_option("--tissue", o.tissue, "balanced: tissue code")->capture_default_str();
  sub->add_option("--truth", o.truth_path, "JSON file with generating parameters");
}

void add_chain_options(CLI::App* sub, Options& o) {
  sub->add_option("--burn-in", o.burn_in, "burn-in iterations per chain")->capture_default_str();
  sub->add_option("--keep", o.keep, "post burn-in iterations per chain")->capture_default_str();
  sub->add_option("--thin", o.thin, "thinning factor")->capture_default_str();
  sub->add_option("--chains", o.chains, "number of chains")->capture_default_str();
  sub->add_option("--fixed-precision", o.fixed_precision, "prior precision of fixed effects")
      ->capture_default_str();
  sub->add_option("--gamma-shape", o.gamma_shape, "Gamma prior shape on precisions")
      ->capture_default_str();
  sub->add_option("--gamma-rate", o.gamma_rate, "Gamma prior rate on precisions")
      ->capture_default_str();
  sub->add_option("--nodes", o.nodes, "Gauss-Hermite nodes per dimension (ml)")
      ->check(CLI::Range(1, 200))
      ->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"hierarchical and joint models for clustered vessel data"};
  app.set_config("--config", "", "TOML configuration file");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  app.add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--strict", o.strict, "exit 1 when convergence checks fail");

  auto* sim = app.add_subcommand("simulate", "simulate a dataset with known parameters");
  add_model_options(sim, o);
  add_design_options(sim, o);

  auto* fit = app.add_subcommand("fit", "fit a model by ML or MCMC");
  add_model_options(fit, o);
  fit->add_option("--fields-csv", o.fields_path, "fields file (default <out-dir>/fields.csv)");
  fit->add_option("--vessels-csv", o.vessels_path, "vessels file (default <out-dir>/vessels.csv)");
  fit->add_option("--method", o.method, "ml or mcmc")
      ->check(CLI::IsMember({"ml", "mcmc"}))
      ->capture_default_str();
  add_chain_options(fit, o);
  fit->add_flag("--prior-sensitivity", o.sensitivity, "rerun with prior variances x10 and /10");
  fit->add_flag("--compare-independent", o.compare_independent,
                "joint mcmc: also fit with rho = 0 and report differences");

  auto* sum = app.add_subcommand("summarize", "group means and SDs of the outcomes");
  sum->add_option("--fields-csv", o.fields_path, "fields file (default <out-dir>/fields.csv)");
  sum->add_option("--vessels-csv", o.vessels_path, "vessels file (default <out-dir>/vessels.csv)");

  auto* pow = app.add_subcommand("power", "one-way ANOVA power and sample size");
  pow->add_option("--means", o.means, "group means")->delimiter(',')->capture_default_str();
  pow->add_option("--sd", o.sd, "common within-group SD")->capture_default_str();
  pow->add_option("--n", o.n, "observations per group")->capture_default_str();
  pow->add_option("--alpha", o.alpha, "significance level")->capture_default_str();
  pow->add_option("--target", o.target, "target power for the sample-size search (0 = skip)")->capture_default_str();
  pow->add_option("--mc-replicates", o.mc_replicates, "Monte Carlo check replicates")->capture_default_str();

  auto* rec = app.add_subcommand("recover", "repeated simulate-and-fit recovery study");
  add_model_options(rec, o);
  add_design_options(rec, o);
  add_chain_options(rec, o);
  rec->add_option("--replicates", o.replicates, "number of replicates")->capture_default_str();
  rec->add_option("--method", o.method, "ml or mcmc")
      ->check(CLI::IsMember({"ml", "mcmc"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (o.threads > 0) omp_set_num_threads(o.threads);

  try {
    if (*sim) return cmd_simulate(app, o, out);
    if (*fit) return cmd_fit(app, o, out, err);
    if (*sum) return cmd_summarize(app, o, out);
    if (*pow) return cmd_power(app, o, out);
    if (*rec) return cmd_recover(app, o, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace ics::cli
