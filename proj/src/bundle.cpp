#include "capita/bundle.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "capita/csv.hpp"

namespace capita {

namespace {

const std::vector<std::string> kFacilityHeader = {"facility_id", "kind", "medicalized", "parent_hc_id",
                                                  "catchment_id", "district_id", "province_id",
                                                  "first_active_month", "last_active_month"};
const std::vector<std::string> kMemberHeader = {"member_id", "household_id", "catchment_id",
                                                "status", "last_updated", "scheme"};
const std::vector<std::string> kVisitHeader = {"visit_id", "facility_id", "member_id", "visit_date",
                                               "approved", "patient_age_years", "diagnosis_categories",
                                               "referred", "admitted", "admission_date", "discharge_date",
                                               "recorded_copay_total"};
const std::vector<std::string> kCostHeader = {"visit_id", "kind", "item_code", "quantity", "unit_cost"};
const std::vector<std::string> kCodeMapHeader = {"item_code", "is_antibiotic", "is_antihistamine", "is_non_phc"};

/// Thrown inside row parsers; caught and turned into a quarantine finding.
struct RowError {
  std::string message;
};

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw RowError{"expected true/false, got '" + s + "'"};
}

template <typename E>
E parse_enum(std::optional<E> v, const std::string& raw, const char* what) {
  if (!v) throw RowError{std::string("unknown ") + what + " '" + raw + "'"};
  return *v;
}

std::int64_t parse_integer(const std::string& s, const char* what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw RowError{std::string("malformed ") + what + " '" + s + "'"};
  return v;
}

template <typename F>
auto guard(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw RowError{e.what()};
  }
}

std::optional<std::string> opt_string(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::optional<Date> opt_date(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return guard([&] { return Date::parse(s); });
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

struct ParsedFile {
  std::vector<csv::Row> rows;  // data rows only
  ManifestEntry manifest;
};

ParsedFile read_csv(const std::filesystem::path& dir, const char* name, const std::vector<std::string>& header) {
  const auto path = dir / name;
  if (!std::filesystem::exists(path))
    throw CapitaError(ErrorKind::MissingFile, std::string("missing input file ") + name);
  const std::string text = read_file(path);
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const std::invalid_argument& e) {
    throw CapitaError(ErrorKind::RowParseError, std::string(name) + ": " + e.what());
  }
  if (rows.empty() || rows.front().fields != header)
    throw CapitaError(ErrorKind::MalformedHeader, std::string(name) + ": header does not match the expected schema");
  ParsedFile out;
  out.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  out.manifest.file = name;
  out.manifest.rows = out.rows.size();
  out.manifest.sha256 = sha256_hex(text);
  return out;
}

std::string diagnoses_text(const DiagnosisSet& set) {
  std::string out;
  for (auto d : set.members()) {
    if (!out.empty()) out.push_back('|');
    out += to_string(d);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& file) { return sha256_hex(read_file(file)); }

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CapitaError(ErrorKind::MissingFile, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& file, std::string_view contents) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw CapitaError(ErrorKind::IoError, "cannot write " + file.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw CapitaError(ErrorKind::IoError, "failed writing " + file.string());
}

bool DatasetBundle::same_records(const DatasetBundle& o) const {
  return facilities == o.facilities && members == o.members && visits == o.visits && code_map == o.code_map;
}

DatasetBundle load_bundle(const std::filesystem::path& dir, const Config& config) {
  if (!std::filesystem::is_directory(dir))
    throw CapitaError(ErrorKind::MissingFile, "input directory " + dir.string() + " does not exist");

  ParsedFile facilities = read_csv(dir, kFacilitiesFile, kFacilityHeader);
  ParsedFile members = read_csv(dir, kMembersFile, kMemberHeader);
  ParsedFile visits = read_csv(dir, kVisitsFile, kVisitHeader);
  ParsedFile costs = read_csv(dir, kCostItemsFile, kCostHeader);
  ParsedFile codes = read_csv(dir, kCodeMapFile, kCodeMapHeader);

  DatasetBundle b;
  auto quarantine = [&](const char* file, const csv::Row& row, const std::string& why) {
    b.quarantine.push_back(Finding{"Quarantined", std::string(file) + ":" + std::to_string(row.line), why});
  };
  auto expect_width = [](const csv::Row& row, std::size_t n) {
    if (row.fields.size() != n)
      throw RowError{"expected " + std::to_string(n) + " fields, got " + std::to_string(row.fields.size())};
  };

  for (const auto& row : codes.rows) {
    try {
      expect_width(row, kCodeMapHeader.size());
      const auto& f = row.fields;
      if (f[0].empty()) throw RowError{"empty item_code"};
      CodeFlags flags{parse_bool(f[1]), parse_bool(f[2]), parse_bool(f[3])};
      if (!b.code_map.emplace(f[0], flags).second) throw RowError{"duplicate item_code " + f[0]};
    } catch (const RowError& e) {
      quarantine(kCodeMapFile, row, e.message);
    }
  }
  codes.manifest.rows_accepted = b.code_map.size();

  for (const auto& row : facilities.rows) {
    try {
      expect_width(row, kFacilityHeader.size());
      const auto& f = row.fields;
      FacilityRecord r;
      r.facility_id = f[0];
      if (r.facility_id.empty()) throw RowError{"empty facility_id"};
      r.kind = parse_enum(parse_facility_kind(f[1]), f[1], "facility kind");
      r.medicalized = parse_bool(f[2]);
      r.parent_hc_id = opt_string(f[3]);
      r.catchment_id = opt_string(f[4]);
      r.district_id = f[5];
      r.province_id = f[6];
      r.first_active_month = guard([&] { return Month::parse(f[7]); });
      r.last_active_month = guard([&] { return Month::parse(f[8]); });
      b.facilities.push_back(std::move(r));
    } catch (const RowError& e) {
      quarantine(kFacilitiesFile, row, e.message);
    }
  }
  facilities.manifest.rows_accepted = b.facilities.size();

  for (const auto& row : members.rows) {
    try {
      expect_width(row, kMemberHeader.size());
      const auto& f = row.fields;
      MemberRecord r;
      r.member_id = f[0];
      if (r.member_id.empty()) throw RowError{"empty member_id"};
      r.household_id = f[1];
      r.catchment_id = f[2];
      r.status = parse_enum(parse_member_status(f[3]), f[3], "member status");
      r.last_updated = guard([&] { return Date::parse(f[4]); });
      r.scheme = parse_enum(parse_scheme(f[5]), f[5], "scheme");
      b.members.push_back(std::move(r));
    } catch (const RowError& e) {
      quarantine(kMembersFile, row, e.message);
    }
  }
  members.manifest.rows_accepted = b.members.size();

  for (const auto& row : visits.rows) {
    try {
      expect_width(row, kVisitHeader.size());
      const auto& f = row.fields;
      VisitRecord r;
      r.visit_id = f[0];
      if (r.visit_id.empty()) throw RowError{"empty visit_id"};
      r.facility_id = f[1];
      r.member_id = f[2];
      r.visit_date = guard([&] { return Date::parse(f[3]); });
      r.approved = parse_bool(f[4]);
      r.patient_age_years = static_cast<int>(parse_integer(f[5], "age"));
      if (!f[6].empty()) {
        std::string_view rest = f[6];
        while (true) {
          const auto bar = rest.find('|');
          const std::string token(rest.substr(0, bar));
          r.diagnosis_categories.insert(parse_enum(parse_diagnosis(token), token, "diagnosis category"));
          if (bar == std::string_view::npos) break;
          rest.remove_prefix(bar + 1);
        }
      }
      r.referred = parse_bool(f[7]);
      r.admitted = parse_bool(f[8]);
      r.admission_date = opt_date(f[9]);
      r.discharge_date = opt_date(f[10]);
      r.recorded_copay_total = guard([&] { return Money::parse(f[11]); });
      b.visits.push_back(std::move(r));
    } catch (const RowError& e) {
      quarantine(kVisitsFile, row, e.message);
    }
  }
  visits.manifest.rows_accepted = b.visits.size();

  std::unordered_map<std::string, std::size_t> visit_index;
  visit_index.reserve(b.visits.size());
  for (std::size_t i = 0; i < b.visits.size(); ++i) visit_index.emplace(b.visits[i].visit_id, i);

  std::size_t items_accepted = 0;
  std::map<std::string, bool> unmapped;
  for (const auto& row : costs.rows) {
    try {
      expect_width(row, kCostHeader.size());
      const auto& f = row.fields;
      auto it = visit_index.find(f[0]);
      if (it == visit_index.end()) throw RowError{"cost item references unknown visit_id '" + f[0] + "'"};
      CostItem item;
      item.kind = parse_enum(parse_cost_kind(f[1]), f[1], "cost item kind");
      item.item_code = f[2];
      item.quantity = parse_integer(f[3], "quantity");
      item.unit_cost = guard([&] { return Money::parse(f[4]); });
      if (auto code = b.code_map.find(item.item_code); code != b.code_map.end()) {
        item.is_antibiotic = code->second.is_antibiotic;
        item.is_antihistamine = code->second.is_antihistamine;
        item.is_non_phc = code->second.is_non_phc;
      } else {
        unmapped[item.item_code] = true;
      }
      b.visits[it->second].cost_items.push_back(std::move(item));
      ++items_accepted;
    } catch (const RowError& e) {
      quarantine(kCostItemsFile, row, e.message);
    }
  }
  costs.manifest.rows_accepted = items_accepted;
  for (const auto& [code, _] : unmapped) b.notes.push_back(Finding{"UnmappedItemCode", code, ""});

  b.source_manifest = {facilities.manifest, members.manifest, visits.manifest, costs.manifest, codes.manifest};

  const std::size_t total_rows = facilities.rows.size() + members.rows.size() + visits.rows.size() +
                                 costs.rows.size() + codes.rows.size();
  if (!b.quarantine.empty() &&
      static_cast<double>(b.quarantine.size()) > config.quarantine_fraction * static_cast<double>(total_rows)) {
    const auto& first = b.quarantine.front();
    throw CapitaError(ErrorKind::RowParseError,
                      std::to_string(b.quarantine.size()) + " of " + std::to_string(total_rows) +
                          " rows quarantined (limit " + csv::fmt(config.quarantine_fraction * 100, 2) +
                          "%); first at " + first.record + ": " + first.detail);
  }
  return b;
}

std::vector<ManifestEntry> write_bundle(const DatasetBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw CapitaError(ErrorKind::IoError, "cannot create output directory " + dir.string());

  csv::Writer fac(kFacilityHeader);
  for (const auto& f : b.facilities)
    fac.row({f.facility_id, std::string(to_string(f.kind)), bool_text(f.medicalized), f.parent_hc_id.value_or(""),
             f.catchment_id.value_or(""), f.district_id, f.province_id, f.first_active_month.to_string(),
             f.last_active_month.to_string()});

  csv::Writer mem(kMemberHeader);
  for (const auto& m : b.members)
    mem.row({m.member_id, m.household_id, m.catchment_id, std::string(to_string(m.status)), m.last_updated.to_string(),
             std::string(to_string(m.scheme))});

  csv::Writer vis(kVisitHeader);
  csv::Writer cost(kCostHeader);
  std::size_t n_items = 0;
  for (const auto& v : b.visits) {
    vis.row({v.visit_id, v.facility_id, v.member_id, v.visit_date.to_string(), bool_text(v.approved),
             std::to_string(v.patient_age_years), diagnoses_text(v.diagnosis_categories), bool_text(v.referred),
             bool_text(v.admitted), v.admission_date ? v.admission_date->to_string() : "",
             v.discharge_date ? v.discharge_date->to_string() : "", v.recorded_copay_total.to_string()});
    for (const auto& item : v.cost_items) {
      cost.row({v.visit_id, std::string(to_string(item.kind)), item.item_code, std::to_string(item.quantity),
                item.unit_cost.to_string()});
      ++n_items;
    }
  }

  csv::Writer codes(kCodeMapHeader);
  for (const auto& [code, flags] : b.code_map)
    codes.row({code, bool_text(flags.is_antibiotic), bool_text(flags.is_antihistamine), bool_text(flags.is_non_phc)});

  std::vector<ManifestEntry> manifest;
  auto emit = [&](const char* name, const csv::Writer& w, std::size_t rows) {
    write_file(dir / name, w.str());
    manifest.push_back(ManifestEntry{name, rows, rows, sha256_hex(w.str())});
  };
  emit(kFacilitiesFile, fac, b.facilities.size());
  emit(kMembersFile, mem, b.members.size());
  emit(kVisitsFile, vis, b.visits.size());
  emit(kCostItemsFile, cost, n_items);
  emit(kCodeMapFile, codes, b.code_map.size());
  return manifest;
}

}  // namespace capita
