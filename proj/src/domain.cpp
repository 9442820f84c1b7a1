#include "ics/domain.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ics/error.hpp"

namespace ics {

namespace {

constexpr std::string_view kFieldsHeader = "specimen_id,field_id,tissue,pla";
constexpr std::string_view kVesselsHeader = "specimen_id,field_id,vessel_id,area,circularity";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) {
      cells.push_back(line.substr(pos));
      break;
    }
    cells.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return cells;
}

std::string where(std::string_view file, std::size_t line_no) {
  return std::string(file) + " row " + std::to_string(line_no);
}

double parse_number(std::string_view cell, std::string_view file, std::size_t line_no,
                    std::string_view column) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() ||
      !std::isfinite(value)) {
    throw InputError(where(file, line_no) + ": invalid " + std::string(column) + " '" +
                     std::string(cell) + "'");
  }
  return value;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void accumulate(MeanSd& out, const std::vector<double>& xs) {
  out.n = xs.size();
  if (xs.empty()) return;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    out.sd.reset();
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

CoarseTissue coarse(TissueType t) {
  switch (t) {
    case TissueType::ControlEctocervix:
      return CoarseTissue::ControlEctocervix;
    case TissueType::ControlTransformationZone:
      return CoarseTissue::ControlTransformationZone;
    case TissueType::CIN1:
    case TissueType::CIN2:
    case TissueType::CIN3:
      return CoarseTissue::CIN;
    case TissueType::InvasiveCarcinoma:
      return CoarseTissue::InvasiveCarcinoma;
  }
  return CoarseTissue::ControlEctocervix;
}

bool is_control(TissueType t) {
  return t == TissueType::ControlEctocervix || t == TissueType::ControlTransformationZone;
}

std::string_view tissue_code(TissueType t) {
  static constexpr std::array<std::string_view, kTissueCodes> codes{"ECTO", "TZ",   "CIN1",
                                                                    "CIN2", "CIN3", "CARC"};
  return codes[static_cast<int>(t)];
}

std::string_view coarse_code(CoarseTissue c) {
  static constexpr std::array<std::string_view, kCoarseGroups> codes{"ECTO", "TZ", "CIN", "CARC"};
  return codes[static_cast<int>(c)];
}

std::optional<TissueType> parse_tissue(std::string_view code) {
  for (int i = 0; i < kTissueCodes; ++i) {
    auto t = static_cast<TissueType>(i);
    if (tissue_code(t) == code) return t;
  }
  return std::nullopt;
}

std::size_t Dataset::field_count() const {
  std::size_t n = 0;
  for (const auto& s : specimens) n += s.fields.size();
  return n;
}

std::size_t Dataset::vessel_count() const {
  std::size_t n = 0;
  for (const auto& s : specimens)
    for (const auto& f : s.fields) n += f.vessels.size();
  return n;
}

void Dataset::validate() const {
  if (specimens.empty()) throw InputError("dataset has no specimens");
  std::set<std::string> specimen_ids;
  for (const auto& s : specimens) {
    if (s.specimen_id.empty()) throw InputError("empty specimen_id");
    if (!specimen_ids.insert(s.specimen_id).second)
      throw InputError("duplicate specimen_id '" + s.specimen_id + "'");
    if (s.fields.empty()) throw InputError("specimen '" + s.specimen_id + "' has no fields");
    std::set<std::string> field_ids;
    std::optional<TissueType> case_tissue;
    bool has_control = false;
    for (const auto& f : s.fields) {
      const std::string key = s.specimen_id + "/" + f.field_id;
      if (f.field_id.empty()) throw InputError("empty field_id in specimen '" + s.specimen_id + "'");
      if (!field_ids.insert(f.field_id).second) throw InputError("duplicate field " + key);
      if (f.vessels.empty()) throw InputError("field " + key + " has no vessels");
      if (!std::isfinite(f.pla)) throw InputError("field " + key + ": non-finite pla");
      if (is_control(f.tissue)) {
        has_control = true;
      } else if (case_tissue && *case_tissue != f.tissue) {
        throw InputError("specimen '" + s.specimen_id + "' mixes case tissue codes");
      } else {
        case_tissue = f.tissue;
      }
      std::set<std::string> vessel_ids;
      for (const auto& v : f.vessels) {
        if (!vessel_ids.insert(v.vessel_id).second)
          throw InputError("duplicate vessel " + key + "/" + v.vessel_id);
        if (!(v.area > 0.0) || !std::isfinite(v.area))
          throw InputError("vessel " + key + "/" + v.vessel_id + ": area must be > 0");
        if (!(v.circularity > 0.0 && v.circularity < 1.0))
          throw InputError("vessel " + key + "/" + v.vessel_id + ": circularity outside (0,1)");
      }
    }
    if (has_control && case_tissue)
      throw InputError("specimen '" + s.specimen_id + "' mixes control and case fields");
  }
}

Dataset parse_dataset(std::string_view fields_csv, std::string_view vessels_csv) {
  Dataset d;
  std::map<std::string, std::size_t> specimen_index;
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> field_index;

  auto flines = split_lines(fields_csv);
  if (flines.empty() || flines[0] != kFieldsHeader)
    throw InputError("fields.csv: expected header '" + std::string(kFieldsHeader) + "'");
  for (std::size_t r = 1; r < flines.size(); ++r) {
    const std::size_t line_no = r + 1;
    if (flines[r].empty()) continue;
    auto cells = split_cells(flines[r]);
    if (cells.size() != 4)
      throw InputError(where("fields.csv", line_no) + ": expected 4 columns");
    std::string sid(cells[0]), fid(cells[1]);
    if (sid.empty() || fid.empty())
      throw InputError(where("fields.csv", line_no) + ": missing key");
    auto tissue = parse_tissue(cells[2]);
    if (!tissue)
      throw InputError(where("fields.csv", line_no) + ": unknown tissue code '" +
                       std::string(cells[2]) + "'");
    double pla = parse_number(cells[3], "fields.csv", line_no, "pla");
    auto [it, inserted] = specimen_index.try_emplace(sid, d.specimens.size());
    if (inserted) d.specimens.push_back(Specimen{sid, {}});
    auto& specimen = d.specimens[it->second];
    if (!field_index.try_emplace({sid, fid}, it->second, specimen.fields.size()).second)
      throw InputError(where("fields.csv", line_no) + ": duplicate key " + sid + "/" + fid);
    specimen.fields.push_back(Field{fid, *tissue, pla, {}});
  }

  auto vlines = split_lines(vessels_csv);
  if (vlines.empty() || vlines[0] != kVesselsHeader)
    throw InputError("vessels.csv: expected header '" + std::string(kVesselsHeader) + "'");
  std::set<std::tuple<std::string, std::string, std::string>> vessel_keys;
  for (std::size_t r = 1; r < vlines.size(); ++r) {
    const std::size_t line_no = r + 1;
    if (vlines[r].empty()) continue;
    auto cells = split_cells(vlines[r]);
    if (cells.size() != 5)
      throw InputError(where("vessels.csv", line_no) + ": expected 5 columns");
    std::string sid(cells[0]), fid(cells[1]), vid(cells[2]);
    if (sid.empty() || fid.empty() || vid.empty())
      throw InputError(where("vessels.csv", line_no) + ": missing key");
    auto fit = field_index.find({sid, fid});
    if (fit == field_index.end())
      throw InputError(where("vessels.csv", line_no) + ": orphan vessel row (" + sid + "/" + fid +
                       " not in fields.csv)");
    if (!vessel_keys.emplace(sid, fid, vid).second)
      throw InputError(where("vessels.csv", line_no) + ": duplicate key " + sid + "/" + fid + "/" +
                       vid);
    double area = parse_number(cells[3], "vessels.csv", line_no, "area");
    double circ = parse_number(cells[4], "vessels.csv", line_no, "circularity");
    if (!(area > 0.0)) throw InputError(where("vessels.csv", line_no) + ": area must be > 0");
    if (!(circ > 0.0 && circ < 1.0))
      throw InputError(where("vessels.csv", line_no) + ": circularity outside (0,1)");
    auto [si, fi] = fit->second;
    d.specimens[si].fields[fi].vessels.push_back(Vessel{vid, area, circ});
  }

  d.validate();
  return d;
}

Dataset load_dataset(const std::filesystem::path& fields_path,
                     const std::filesystem::path& vessels_path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return parse_dataset(slurp(fields_path), slurp(vessels_path));
}

DatasetCsv format_dataset(const Dataset& d) {
  DatasetCsv out;
  out.fields.append(kFieldsHeader).append("\n");
  out.vessels.append(kVesselsHeader).append("\n");
  for (const auto& s : d.specimens) {
    for (const auto& f : s.fields) {
      out.fields += s.specimen_id + "," + f.field_id + "," + std::string(tissue_code(f.tissue)) +
                    "," + format_g6(f.pla) + "\n";
      for (const auto& v : f.vessels) {
        out.vessels += s.specimen_id + "," + f.field_id + "," + v.vessel_id + "," +
                       format_g6(v.area) + "," + format_g6(v.circularity) + "\n";
      }
    }
  }
  return out;
}

void write_dataset(const Dataset& d, const std::filesystem::path& fields_path,
                   const std::filesystem::path& vessels_path) {
  auto csv = format_dataset(d);
  auto spit = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
  };
  spit(fields_path, csv.fields);
  spit(vessels_path, csv.vessels);
}

SummaryTable summarize(const Dataset& d) {
  if (d.specimens.empty()) throw InputError("summarize: empty dataset");

  struct Bucket {
    std::vector<double> lvd, pla, area, circ;
  };
  std::array<Bucket, kTissueCodes> by_code;
  for (const auto& s : d.specimens) {
    for (const auto& f : s.fields) {
      auto& b = by_code[static_cast<int>(f.tissue)];
      b.lvd.push_back(f.lvd());
      b.pla.push_back(f.pla);
      for (const auto& v : f.vessels) {
        b.area.push_back(v.area);
        b.circ.push_back(v.circularity);
      }
    }
  }

  SummaryTable table;
  auto emit = [&](std::string group, std::string level, const std::vector<int>& codes) {
    Bucket merged;
    for (int c : codes) {
      const auto& b = by_code[c];
      merged.lvd.insert(merged.lvd.end(), b.lvd.begin(), b.lvd.end());
      merged.pla.insert(merged.pla.end(), b.pla.begin(), b.pla.end());
      merged.area.insert(merged.area.end(), b.area.begin(), b.area.end());
      merged.circ.insert(merged.circ.end(), b.circ.begin(), b.circ.end());
    }
    if (merged.lvd.empty()) return;
    SummaryRow row;
    row.group = std::move(group);
    row.level = std::move(level);
    row.n_fields = merged.lvd.size();
    row.n_vessels = merged.area.size();
    accumulate(row.lvd, merged.lvd);
    accumulate(row.pla, merged.pla);
    accumulate(row.area, merged.area);
    accumulate(row.circularity, merged.circ);
    table.rows.push_back(std::move(row));
  };

  // Row order mirrors the usual presentation: pooled control first.
  emit("CONTROL", "pooled", {0, 1});
  for (int c = 0; c < kTissueCodes; ++c)
    emit(std::string(tissue_code(static_cast<TissueType>(c))), "tissue", {c});
  emit("ECTO", "coarse", {0});
  emit("TZ", "coarse", {1});
  emit("CIN", "coarse", {2, 3, 4});
  emit("CARC", "coarse", {5});
  return table;
}

std::string format_summary_csv(const SummaryTable& t) {
  std::string out =
      "group,level,n_fields,n_vessels,lvd_mean,lvd_sd,pla_mean,pla_sd,area_mean,area_sd,"
      "circularity_mean,circularity_sd\n";
  auto cell = [](const MeanSd& m) {
    return format_g6(m.mean) + "," + (m.sd ? format_g6(*m.sd) : std::string("NA"));
  };
  for (const auto& r : t.rows) {
    out += r.group + "," + r.level + "," + std::to_string(r.n_fields) + "," +
           std::to_string(r.n_vessels) + "," + cell(r.lvd) + "," + cell(r.pla) + "," +
           cell(r.area) + "," + cell(r.circularity) + "\n";
  }
  return out;
}

}  // namespace ics
