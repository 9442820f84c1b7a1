#include "ics/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace ics {

namespace {

std::string padded_id(char prefix, std::size_t index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, index);
  return buf;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SpecimenDraw {
  Specimen specimen;
  double a = 0.0;
  double a_count = 0.0;
  std::vector<double> b;
};

// Draw order within a specimen is fixed: block field counts, specimen-level
// normals, then per field (field normals, count, per-vessel normals).
SpecimenDraw draw_specimen(const ModelSpec& spec, const TrueParams& truth,
                           const SpecimenTemplate& tmpl, std::size_t index,
                           std::uint64_t seed) {
  static const TrueParams pla_default = default_truth(Family::PLA_LMM);
  static const TrueParams lvd_default = default_truth(Family::LVD_POIS);
  static const TrueParams va_default = default_truth(Family::VA_LMM);
  static const TrueParams circ_default = default_truth(Family::CIRC_HET);

  Rng rng = make_substream(seed, Stream::Specimen, index);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  std::vector<TissueType> tissues;
  for (const auto& block : tmpl.blocks) {
    std::uniform_int_distribution<int> count(block.min_fields, block.max_fields);
    const int n = count(rng);
    for (int k = 0; k < n; ++k) tissues.push_back(block.tissue);
  }

  const Family fam = spec.family;
  const ParamVector& th = truth.theta;
  const ParamVector& pla_th = fam == Family::PLA_LMM ? th : pla_default.theta;
  const ParamVector& circ_th = fam == Family::CIRC_HET ? th : circ_default.theta;
  const ModelSpec& circ_spec = fam == Family::CIRC_HET ? spec : circ_default.spec;
  const bool count_primary =
      fam == Family::LVD_POIS || fam == Family::LVD_NEGBIN || fam == Family::JOINT;
  const bool area_primary =
      fam == Family::VA_LMM || fam == Family::VA_CONDITIONAL || fam == Family::JOINT;
  const ParamVector& lvd_th = count_primary && fam != Family::JOINT ? th : lvd_default.theta;
  const ParamVector& va_th = area_primary && fam != Family::JOINT ? th : va_default.theta;

  const double z_pla = std_normal(rng);
  const double z_count = std_normal(rng);
  const double z_area = std_normal(rng);
  const double z_circ = std_normal(rng);
  const double z_joint = std_normal(rng);

  const double a_pla = std::sqrt(pla_th.tau2) * z_pla;
  const double a_circ = std::sqrt(circ_th.tau2) * z_circ;
  double a_count = std::sqrt(lvd_th.tau2) * z_count;
  double a_area = std::sqrt(va_th.tau2) * z_area;
  double joint_a = 0.0, joint_n = 0.0;
  if (fam == Family::JOINT) {
    const double rho = spec.rho_zero ? 0.0 : th.rho;
    joint_a = z_area;
    joint_n = rho * z_area + std::sqrt(1.0 - rho * rho) * z_joint;
    a_area = th.lambda_a * joint_a;
    a_count = th.lambda_n * joint_n;
  }

  SpecimenDraw out;
  out.specimen.specimen_id = padded_id('S', index + 1, 3);
  switch (fam) {
    case Family::PLA_LMM:
      out.a = a_pla;
      break;
    case Family::LVD_POIS:
    case Family::LVD_NEGBIN:
      out.a = a_count;
      break;
    case Family::CIRC_HET:
      out.a = a_circ;
      break;
    case Family::VA_LMM:
    case Family::VA_CONDITIONAL:
      out.a = a_area;
      break;
    case Family::JOINT:
      out.a = joint_a;
      out.a_count = joint_n;
      break;
  }

  for (std::size_t j = 0; j < tissues.size(); ++j) {
    const TissueType tissue = tissues[j];
    const int g = static_cast<int>(coarse(tissue));
    Field field;
    field.field_id = padded_id('F', j + 1, 2);
    field.tissue = tissue;

    const double z_b_area = std_normal(rng);
    const double z_b_circ = std_normal(rng);
    const double z_pla_err = std_normal(rng);

    field.pla = pla_th.alpha + group_effect(pla_th.beta, g) + a_pla +
                std::sqrt(pla_th.sigma2) * z_pla_err;

    double eta = 0.0;
    if (fam == Family::JOINT) eta = th.alpha_n + group_effect(th.beta_n, g) + a_count;
    else eta = lvd_th.alpha + group_effect(lvd_th.beta, g) + a_count;
    double mu = std::exp(eta);
    if (fam == Family::LVD_NEGBIN) {
      std::gamma_distribution<double> mix(th.dispersion, mu / th.dispersion);
      mu = mix(rng);
    }
    int n = 1;
    if (mu > 0.0) n += std::poisson_distribution<int>(mu)(rng);

    const double b_area = std::sqrt(fam == Family::JOINT ? th.nu2 : va_th.nu2) * z_b_area;
    double area_mean = 0.0;
    double area_sigma = 0.0;
    if (fam == Family::JOINT) {
      area_mean = th.alpha + group_effect(th.beta, g) + a_area + b_area;
      area_sigma = std::sqrt(th.sigma2);
    } else {
      area_mean = va_th.alpha + group_effect(va_th.beta, g) + a_area + b_area;
      if (fam == Family::VA_CONDITIONAL) area_mean += va_th.gamma / n;
      area_sigma = std::sqrt(va_th.sigma2);
    }

    double circ_field_var = circ_th.nu2;
    if (!circ_spec.delta_equal) {
      const int slot = delta_slot(circ_spec, tissue);
      if (slot >= 0) circ_field_var *= circ_th.delta[slot];
    }
    const double b_circ = std::sqrt(circ_field_var) * z_b_circ;
    const double circ_mean = circ_th.alpha + group_effect(circ_th.beta, g) + a_circ + b_circ;
    const double circ_sigma = std::sqrt(circ_th.sigma2);

    if (fam == Family::CIRC_HET) out.b.push_back(b_circ);
    else if (area_primary) out.b.push_back(b_area);

    for (int k = 0; k < n; ++k) {
      const double z_area_err = std_normal(rng);
      const double z_circ_err = std_normal(rng);
      Vessel v;
      v.vessel_id = padded_id('V', static_cast<std::size_t>(k + 1), 2);
      v.area = std::exp(area_mean + area_sigma * z_area_err);
      v.circularity = logistic(circ_mean + circ_sigma * z_circ_err);
      field.vessels.push_back(std::move(v));
    }
    out.specimen.fields.push_back(std::move(field));
  }
  return out;
}

SimulationResult assemble(const ModelSpec& spec, std::vector<SpecimenDraw>& draws) {
  SimulationResult out;
  out.data.specimens.reserve(draws.size());
  for (auto& d : draws) {
    out.latent.a.push_back(d.a);
    if (spec.family == Family::JOINT) out.latent.a_count.push_back(d.a_count);
    out.latent.b.insert(out.latent.b.end(), d.b.begin(), d.b.end());
    out.data.specimens.push_back(std::move(d.specimen));
  }
  return out;
}

void check_inputs(const ModelSpec& spec, const TrueParams& truth, const DesignPreset& design) {
  spec.validate();
  truth.validate();
  if (truth.spec.family != spec.family)
    throw InputError("truth was generated for family '" +
                     std::string(family_name(truth.spec.family)) + "', not '" +
                     std::string(family_name(spec.family)) + "'");
  if (spec.family == Family::CIRC_HET &&
      static_cast<int>(truth.theta.delta.size()) < spec.delta_count())
    throw InputError("truth is missing delta multipliers for the requested grouping");
  design.validate();
}

}  // namespace

DesignPreset DesignPreset::table1(int replicate_factor) {
  if (replicate_factor < 1) throw InputError("replicate factor must be >= 1");
  using T = TissueType;
  DesignPreset d;
  for (int r = 0; r < replicate_factor; ++r) {
    for (int i = 0; i < 15; ++i)
      d.specimens.push_back({{{T::ControlEctocervix, 5, 10}, {T::ControlTransformationZone, 2, 9}}});
    for (int i = 0; i < 5; ++i) d.specimens.push_back({{{T::ControlEctocervix, 5, 10}}});
    d.specimens.push_back({{{T::ControlTransformationZone, 5, 9}}});
    for (int i = 0; i < 10; ++i) d.specimens.push_back({{{T::CIN1, 2, 7}}});
    for (int i = 0; i < 9; ++i) d.specimens.push_back({{{T::CIN2, 2, 8}}});
    for (int i = 0; i < 2; ++i) d.specimens.push_back({{{T::CIN3, 4, 5}}});
    for (int i = 0; i < 20; ++i) d.specimens.push_back({{{T::InvasiveCarcinoma, 1, 10}}});
  }
  return d;
}

DesignPreset DesignPreset::balanced(int n_specimens, int fields, TissueType tissue) {
  if (n_specimens < 1 || fields < 1) throw InputError("balanced design needs positive sizes");
  DesignPreset d;
  d.specimens.assign(static_cast<std::size_t>(n_specimens),
                     SpecimenTemplate{{{tissue, fields, fields}}});
  return d;
}

void DesignPreset::validate() const {
  if (specimens.empty()) throw InputError("design has no specimens");
  for (const auto& s : specimens) {
    if (s.blocks.empty()) throw InputError("design specimen has no field blocks");
    bool control = false, case_tissue = false;
    for (const auto& b : s.blocks) {
      if (b.min_fields < 1 || b.max_fields < b.min_fields)
        throw InputError("design field range invalid");
      (is_control(b.tissue) ? control : case_tissue) = true;
    }
    if (control && case_tissue) throw InputError("design specimen mixes control and case tissue");
    if (case_tissue && s.blocks.size() > 1) throw InputError("case specimen needs a single block");
  }
}

void TrueParams::validate() const {
  spec.validate();
  validate_params(spec, theta);
  if (spec.family == Family::JOINT && !(std::abs(theta.rho) < 0.95))
    throw InputError("truth rho must lie in (-0.95, 0.95)");
}

TrueParams default_truth(Family family) {
  TrueParams t;
  t.spec.family = family;
  ParamVector& p = t.theta;
  p = default_params(t.spec);
  switch (family) {
    case Family::PLA_LMM:
      p.alpha = 3.51;
      p.beta = {1.85, 0.28, -0.04};
      p.tau2 = 1.20;
      p.sigma2 = 8.63;
      break;
    case Family::LVD_POIS:
    case Family::LVD_NEGBIN:
      p.alpha = 0.28;
      p.beta = {std::log(2.37), std::log(2.31), std::log(3.71)};
      p.tau2 = 0.03;
      if (family == Family::LVD_NEGBIN) p.dispersion = 5.0;
      break;
    case Family::VA_LMM:
      p.alpha = 6.95;
      p.beta = {std::log(0.53), std::log(0.42), std::log(0.26)};
      p.tau2 = 0.12;
      p.nu2 = 0.22;
      p.sigma2 = 1.02;
      break;
    case Family::CIRC_HET:
      p.alpha = 0.16;
      p.beta = {std::log(1.27), std::log(1.37), std::log(1.01)};
      p.tau2 = 0.05;
      p.nu2 = 0.13;
      p.sigma2 = 0.95;
      p.delta = {0.85, 0.98, 0.91};
      break;
    case Family::VA_CONDITIONAL:
      p.alpha = 5.45;
      p.beta = {std::log(1.09), std::log(0.91), std::log(0.69)};
      p.gamma = std::log(19.7);
      p.tau2 = 0.12;
      p.nu2 = 0.22;
      p.sigma2 = 1.02;
      break;
    case Family::JOINT:
      p.alpha = 7.0;
      p.beta = {std::log(0.54), std::log(0.42), std::log(0.26)};
      p.lambda_a = 0.25;
      p.nu2 = 0.19;
      p.sigma2 = 1.01;
      p.alpha_n = 0.28;
      p.beta_n = {std::log(2.35), std::log(2.34), std::log(3.78)};
      p.lambda_n = -0.13;
      p.rho = -0.78;
      break;
  }
  return t;
}

SimulationResult simulate_with_latents(const ModelSpec& spec, const TrueParams& truth,
                                       const DesignPreset& design, std::uint64_t seed) {
  check_inputs(spec, truth, design);
  const auto n = static_cast<std::ptrdiff_t>(design.specimens.size());
  std::vector<SpecimenDraw> draws(design.specimens.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    draws[i] = draw_specimen(spec, truth, design.specimens[i], static_cast<std::size_t>(i), seed);
  return assemble(spec, draws);
}

SimulationResult simulate_with_latents_serial(const ModelSpec& spec, const TrueParams& truth,
                                              const DesignPreset& design, std::uint64_t seed) {
  check_inputs(spec, truth, design);
  std::vector<SpecimenDraw> draws;
  for (std::size_t i = 0; i < design.specimens.size(); ++i)
    draws.push_back(draw_specimen(spec, truth, design.specimens[i], i, seed));
  return assemble(spec, draws);
}

Dataset simulate_dataset(const ModelSpec& spec, const TrueParams& truth,
                         const DesignPreset& design, std::uint64_t seed) {
  return simulate_with_latents(spec, truth, design, seed).data;
}

OneWaySample simulate_power_scenario(const std::vector<double>& group_means, double within_sd,
                                     int n_per_group, Rng& rng) {
  if (group_means.size() < 2) throw InputError("power scenario needs at least two groups");
  if (!(within_sd > 0.0)) throw InputError("within-group SD must be positive");
  if (n_per_group < 2) throw InputError("n_per_group must be >= 2");
  OneWaySample out;
  out.group.reserve(group_means.size() * static_cast<std::size_t>(n_per_group));
  out.y.reserve(out.group.capacity());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t g = 0; g < group_means.size(); ++g) {
    for (int k = 0; k < n_per_group; ++k) {
      out.group.push_back(static_cast<int>(g));
      out.y.push_back(group_means[g] + within_sd * noise(rng));
    }
  }
  return out;
}

OneWaySample simulate_power_scenario(const std::vector<double>& group_means, double within_sd,
                                     int n_per_group, std::uint64_t seed) {
  Rng rng = make_substream(seed, Stream::Power, 0);
  return simulate_power_scenario(group_means, within_sd, n_per_group, rng);
}

}  // namespace ics
