#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ics/domain.hpp"
#include "ics/model.hpp"
#include "ics/rng.hpp"

namespace ics {

/// A block of fields of one tissue type within a specimen; the field count
/// is drawn uniformly from [min_fields, max_fields].
struct FieldBlock {
  TissueType tissue = TissueType::ControlEctocervix;
  int min_fields = 1;
  int max_fields = 1;
};

struct SpecimenTemplate {
  std::vector<FieldBlock> blocks;
};

struct DesignPreset {
  std::vector<SpecimenTemplate> specimens;

  /// The study layout: 21 controls (15 contributing ectocervix and
  /// transformation-zone blocks, 5 ectocervix only, 1 transformation zone
  /// only), 10/9/2 CIN1/CIN2/CIN3 and 20 carcinoma specimens, with the
  /// published per-group field-count ranges. `replicate_factor` repeats the
  /// whole layout to build large-sample designs.
  static DesignPreset table1(int replicate_factor = 1);

  /// n_specimens specimens of one tissue type with exactly `fields` fields.
  static DesignPreset balanced(int n_specimens, int fields, TissueType tissue);

  void validate() const;
};

/// Generating parameters together with the family they belong to.
struct TrueParams {
  ModelSpec spec;
  ParamVector theta;

  /// Throws InputError on non-positive variances, |rho| >= 0.95 or
  /// non-positive multipliers.
  void validate() const;
};

/// Ground-truth presets: hierarchical-model estimates for the univariate
/// families, joint-model posterior medians for JOINT. Intercepts, which are
/// not tabulated, are set from the ectocervix summary means.
TrueParams default_truth(Family family);

struct SimulationResult {
  Dataset data;
  LatentState latent;  // effects of the primary family, in dataset order
};

/// Draws a dataset from the generative model of `spec`. Outcomes that the
/// family does not model are drawn from the default presets of their own
/// univariate models with independent effects. Specimen i uses substream
/// (seed, Specimen, i), so output does not depend on thread scheduling.
Dataset simulate_dataset(const ModelSpec& spec, const TrueParams& truth,
                         const DesignPreset& design, std::uint64_t seed);
SimulationResult simulate_with_latents(const ModelSpec& spec, const TrueParams& truth,
                                       const DesignPreset& design, std::uint64_t seed);

/// Serial reference of simulate_with_latents (same draws, one thread).
SimulationResult simulate_with_latents_serial(const ModelSpec& spec, const TrueParams& truth,
                                              const DesignPreset& design, std::uint64_t seed);

/// Flat one-way layout: `group[k]` indexes `group_means`.
struct OneWaySample {
  std::vector<int> group;
  std::vector<double> y;
};

OneWaySample simulate_power_scenario(const std::vector<double>& group_means, double within_sd,
                                     int n_per_group, std::uint64_t seed);
OneWaySample simulate_power_scenario(const std::vector<double>& group_means, double within_sd,
                                     int n_per_group, Rng& rng);

}  // namespace ics
