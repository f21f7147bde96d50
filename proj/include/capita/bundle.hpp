#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "capita/config.hpp"
#include "capita/domain.hpp"

namespace capita {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

struct ManifestEntry {
  std::string file;
  std::size_t rows = 0;           // data rows in the file (header excluded)
  std::size_t rows_accepted = 0;  // rows that became records
  std::string sha256;
  bool operator==(const ManifestEntry&) const = default;
};

/// The five-file input corpus, linked and normalized.
struct DatasetBundle {
  std::vector<FacilityRecord> facilities;
  std::vector<MemberRecord> members;
  std::vector<VisitRecord> visits;
  std::map<std::string, CodeFlags> code_map;
  std::vector<ManifestEntry> source_manifest;
  Findings quarantine;  // rows dropped at load, keyed "file:line"
  Findings notes;       // non-fatal load observations (e.g. unmapped item codes)

  /// Record equality, ignoring manifest and load findings.
  bool same_records(const DatasetBundle& other) const;
};

inline constexpr const char* kFacilitiesFile = "facilities.csv";
inline constexpr const char* kMembersFile = "members.csv";
inline constexpr const char* kVisitsFile = "visits.csv";
inline constexpr const char* kCostItemsFile = "cost_items.csv";
inline constexpr const char* kCodeMapFile = "code_map.csv";

/// Loads and joins the five CSV files. Rows that fail to parse (including
/// unknown enum values) and cost items whose visit_id is unknown are
/// quarantined; if the quarantined share of all data rows exceeds
/// `config.quarantine_fraction` the load fails with RowParseError.
/// Throws MissingFile / MalformedHeader regardless of the threshold.
DatasetBundle load_bundle(const std::filesystem::path& directory, const Config& config = {});

/// Writes the five CSV files (creating the directory if needed) and returns
/// the manifest of what was written. Throws IoError.
std::vector<ManifestEntry> write_bundle(const DatasetBundle& bundle, const std::filesystem::path& directory);

/// Reads a whole file; throws MissingFile.
std::string read_file(const std::filesystem::path& file);
/// Writes a whole file atomically enough for our purposes; throws IoError.
void write_file(const std::filesystem::path& file, std::string_view contents);

}  // namespace capita
