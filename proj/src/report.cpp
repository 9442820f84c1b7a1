#include "ics/report.hpp"

#include <cmath>

namespace ics {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

namespace {

Json optional_number(const std::optional<double>& v) {
  return v ? number_or_null(*v) : Json(nullptr);
}

Json mean_sd_json(const MeanSd& m) {
  Json j;
  j["n"] = m.n;
  j["mean"] = number_or_null(m.mean);
  j["sd"] = optional_number(m.sd);
  return j;
}

}  // namespace

Json spec_json(const ModelSpec& spec) {
  Json j;
  j["family"] = std::string(family_name(spec.family));
  j["delta_grouping"] = spec.delta_grouping == DeltaGrouping::Coarse ? "coarse" : "fine";
  j["rho_zero"] = spec.rho_zero;
  j["delta_equal"] = spec.delta_equal;
  return j;
}

ModelSpec spec_from_json(const Json& j) {
  ModelSpec spec;
  const auto fam = parse_family(j.at("family").get<std::string>());
  if (!fam) throw InputError("unknown family " + j.at("family").get<std::string>());
  spec.family = *fam;
  const std::string g = j.value("delta_grouping", std::string("coarse"));
  if (g != "coarse" && g != "fine") throw InputError("unknown delta grouping " + g);
  spec.delta_grouping = g == "fine" ? DeltaGrouping::Fine : DeltaGrouping::Coarse;
  spec.rho_zero = j.value("rho_zero", false);
  spec.delta_equal = j.value("delta_equal", false);
  spec.validate();
  return spec;
}

Json params_json(const ModelSpec& spec, const ParamVector& p) {
  Json j = Json::object();
  for_each_param(spec, p, [&](const std::string& name, Support, const double& v) {
    j[name] = number_or_null(v);
  });
  return j;
}

ParamVector params_from_json(const ModelSpec& spec, const Json& j) {
  ParamVector p = default_params(spec);
  for_each_param(spec, p, [&](const std::string& name, Support, double& v) {
    if (j.contains(name)) {
      if (!j[name].is_number()) throw InputError("parameter " + name + " must be a number");
      v = j[name].get<double>();
    }
  });
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const auto& n : parameter_names(spec)) known = known || n == it.key();
    if (!known)
      throw InputError("parameter " + it.key() + " is not used by family " +
                       std::string(family_name(spec.family)));
  }
  return p;
}

Json priors_json(const PriorSpec& p) {
  Json j;
  j["fixed_precision"] = p.fixed_precision;
  j["gamma_shape"] = p.gamma_shape;
  j["gamma_rate"] = p.gamma_rate;
  j["lambda_bound"] = p.lambda_bound;
  j["rho_bound"] = p.rho_bound;
  return j;
}

Json chain_config_json(const ChainConfig& c) {
  Json j;
  j["burn_in"] = c.burn_in;
  j["keep_iterations"] = c.keep_iterations;
  j["thin"] = c.thin;
  j["n_chains"] = c.n_chains;
  j["seed"] = c.seed;
  j["target_scalar"] = c.target_scalar;
  j["target_block"] = c.target_block;
  j["init_spread"] = c.init_spread;
  return j;
}

Json ml_fit_json(const MLFit& fit) {
  Json j;
  j["spec"] = spec_json(fit.spec);
  j["max_loglik"] = number_or_null(fit.max_loglik);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["gradient_sup_norm"] = number_or_null(fit.gradient_sup_norm);
  j["message"] = fit.message;
  j["interval_type"] = "wald_unconstrained_scale";
  Json est = Json::object();
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    Json e;
    e["estimate"] = number_or_null(fit.estimates[k]);
    e["se"] = number_or_null(fit.standard_errors[k]);
    e["ci_lower"] = number_or_null(fit.ci_lower[k]);
    e["ci_upper"] = number_or_null(fit.ci_upper[k]);
    e["free"] = static_cast<bool>(fit.free[k]);
    est[fit.names[k]] = e;
  }
  j["estimates"] = est;
  Json eff = Json::array();
  for (const auto& row : effect_table(fit.theta_hat, fit.spec)) {
    Json e;
    e["parameter"] = row.parameter;
    e["group"] = row.group;
    e["coefficient"] = number_or_null(row.coefficient);
    e["ratio"] = optional_number(row.ratio);
    e["phrase"] = row.phrase;
    eff.push_back(e);
  }
  j["effects"] = eff;
  if (fit.spec.family == Family::PLA_LMM)
    j["icc"] = number_or_null(icc(fit.theta_hat.tau2, fit.theta_hat.sigma2));
  return j;
}

Json lrt_json(const LrtResult& r) {
  Json j;
  j["statistic"] = number_or_null(r.statistic);
  j["df"] = r.df;
  j["p_value"] = number_or_null(r.p_value);
  j["clamped"] = r.clamped;
  return j;
}

Json overdispersion_json(const OverdispersionReport& r) {
  Json j;
  j["poisson_loglik"] = number_or_null(r.poisson.max_loglik);
  j["negbin_loglik"] = number_or_null(r.negbin.max_loglik);
  j["delta_loglik"] = number_or_null(r.delta_loglik);
  j["dispersion"] = number_or_null(r.dispersion);
  j["dispersion_se"] = number_or_null(r.dispersion_se);
  j["poisson_converged"] = r.poisson.converged;
  j["negbin_converged"] = r.negbin.converged;
  return j;
}

Json delta_test_json(const DeltaTestReport& r) {
  Json j;
  j["general_loglik"] = number_or_null(r.general.max_loglik);
  j["constrained_loglik"] = number_or_null(r.constrained.max_loglik);
  j["lrt"] = lrt_json(r.test);
  j["note"] = "chi-square reference; multipliers on the boundary would call for a mixture";
  return j;
}

Json fit_result_json(const FitResult& fit) {
  Json j;
  j["spec"] = spec_json(fit.spec);
  j["n_chains"] = fit.n_chains;
  j["draws_per_chain"] = fit.draws_per_chain;
  j["initialization_only"] = fit.initialization_only;
  j["interval_type"] = "equal_tailed_95_empirical_quantiles";
  Json ps = Json::object();
  for (const auto& p : fit.params) {
    Json e;
    e["median"] = number_or_null(p.median);
    e["lower"] = number_or_null(p.lower);
    e["upper"] = number_or_null(p.upper);
    e["mean"] = number_or_null(p.mean);
    e["sd"] = number_or_null(p.sd);
    e["ess"] = number_or_null(p.ess);
    e["rhat"] = number_or_null(p.rhat);
    e["mcse_median"] = number_or_null(p.mcse_median);
    e["free"] = p.free;
    e["degenerate"] = p.degenerate;
    ps[p.name] = e;
  }
  j["parameters"] = ps;
  Json eff = Json::array();
  for (const auto& e : fit.effects) {
    Json r;
    r["parameter"] = e.parameter;
    r["group"] = e.group;
    r["median"] = number_or_null(e.median);
    r["lower"] = number_or_null(e.lower);
    r["upper"] = number_or_null(e.upper);
    r["ratio_median"] = optional_number(e.ratio_median);
    r["ratio_lower"] = optional_number(e.ratio_lower);
    r["ratio_upper"] = optional_number(e.ratio_upper);
    r["phrase"] = e.phrase;
    eff.push_back(r);
  }
  j["effects"] = eff;
  return j;
}

Json acceptance_json(const ChainResult& c) {
  Json j = Json::array();
  for (const auto& m : c.acceptance) {
    Json e = Json::object();
    for (const auto& [k, v] : m) e[k] = number_or_null(v);
    j.push_back(e);
  }
  return j;
}

Json diagnostics_json(const DiagnosticsReport& d) {
  Json j;
  j["rhat_threshold"] = d.rhat_threshold;
  j["ess_threshold"] = d.ess_threshold;
  j["ok"] = d.ok();
  Json flags = Json::array();
  for (const auto& f : d.flags) {
    Json e;
    e["parameter"] = f.name;
    e["rhat"] = number_or_null(f.rhat);
    e["ess"] = number_or_null(f.ess);
    e["reason"] = f.reason;
    flags.push_back(e);
  }
  j["flags"] = flags;
  return j;
}

Json paired_fit_json(const PairedFit& p) {
  Json j;
  j["joint"] = fit_result_json(p.joint);
  j["independent"] = fit_result_json(p.independent);
  Json diffs = Json::array();
  for (const auto& d : p.differences) {
    Json e;
    e["parameter"] = d.name;
    e["joint_median"] = number_or_null(d.joint_median);
    e["independent_median"] = number_or_null(d.independent_median);
    e["difference"] = number_or_null(d.difference);
    e["mcse"] = number_or_null(d.mcse);
    diffs.push_back(e);
  }
  j["differences"] = diffs;
  return j;
}

Json summary_json(const SummaryTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json e;
    e["group"] = r.group;
    e["level"] = r.level;
    e["n_fields"] = r.n_fields;
    e["n_vessels"] = r.n_vessels;
    e["lvd"] = mean_sd_json(r.lvd);
    e["pla"] = mean_sd_json(r.pla);
    e["area"] = mean_sd_json(r.area);
    e["circularity"] = mean_sd_json(r.circularity);
    rows.push_back(e);
  }
  return rows;
}

}  // namespace ics
