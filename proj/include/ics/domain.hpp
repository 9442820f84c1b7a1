#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ics {

enum class TissueType {
  ControlEctocervix,
  ControlTransformationZone,
  CIN1,
  CIN2,
  CIN3,
  InvasiveCarcinoma,
};

/// Four-level factor used by every design matrix; ControlEctocervix is the
/// reference level.
enum class CoarseTissue {
  ControlEctocervix,
  ControlTransformationZone,
  CIN,
  InvasiveCarcinoma,
};

inline constexpr int kTissueCodes = 6;
inline constexpr int kCoarseGroups = 4;

CoarseTissue coarse(TissueType t);
bool is_control(TissueType t);
std::string_view tissue_code(TissueType t);  // ECTO, TZ, CIN1, CIN2, CIN3, CARC
std::string_view coarse_code(CoarseTissue c);  // ECTO, TZ, CIN, CARC
std::optional<TissueType> parse_tissue(std::string_view code);

struct Vessel {
  std::string vessel_id;
  double area = 1.0;         // µm², > 0
  double circularity = 0.5;  // in (0, 1)

  friend bool operator==(const Vessel&, const Vessel&) = default;
};

struct Field {
  std::string field_id;
  TissueType tissue = TissueType::ControlEctocervix;
  double pla = 0.0;  // percent, untransformed
  std::vector<Vessel> vessels;

  /// Lymphatic vessel density: the vessel count of the field.
  int lvd() const { return static_cast<int>(vessels.size()); }

  friend bool operator==(const Field&, const Field&) = default;
};

struct Specimen {
  std::string specimen_id;
  std::vector<Field> fields;

  friend bool operator==(const Specimen&, const Specimen&) = default;
};

struct Dataset {
  std::vector<Specimen> specimens;

  std::size_t field_count() const;
  std::size_t vessel_count() const;

  /// Throws InputError when a structural invariant is violated.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads the two-file CSV layout (fields + vessels) and validates it.
Dataset load_dataset(const std::filesystem::path& fields_path,
                     const std::filesystem::path& vessels_path);

/// Parses CSV text directly; used by load_dataset and by tests.
Dataset parse_dataset(std::string_view fields_csv, std::string_view vessels_csv);

struct DatasetCsv {
  std::string fields;
  std::string vessels;
};

/// Serializes with 6 significant digits and LF line endings.
DatasetCsv format_dataset(const Dataset& d);
void write_dataset(const Dataset& d, const std::filesystem::path& fields_path,
                   const std::filesystem::path& vessels_path);

struct MeanSd {
  double mean = 0.0;
  std::optional<double> sd;  // undefined for a single observation
  std::size_t n = 0;
};

struct SummaryRow {
  std::string group;  // tissue code, coarse code or CONTROL
  std::string level;  // "tissue", "coarse" or "pooled"
  std::size_t n_fields = 0;
  std::size_t n_vessels = 0;
  MeanSd lvd;
  MeanSd pla;
  MeanSd area;
  MeanSd circularity;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
};

/// Means and standard deviations by tissue type: LVD and %LA over fields,
/// vessel area and circularity over pooled vessels.
SummaryTable summarize(const Dataset& d);

std::string format_summary_csv(const SummaryTable& t);

}  // namespace ics
