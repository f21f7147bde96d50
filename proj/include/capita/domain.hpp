#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "capita/calendar.hpp"
#include "capita/money.hpp"

namespace capita {

// ---------------------------------------------------------------------------
// Errors and findings
// ---------------------------------------------------------------------------

enum class ErrorKind {
  MissingFile,
  MalformedHeader,
  RowParseError,
  IoError,
  ConfigError,
  ZeroActivity,
  MissingCatchment,
  TooFewFacilities,
  UnknownFacility,
  InconsistentCoverage,
  RankDeficient,
  NonConvergence,
  NoConsensus,
  MissingPriorQuarter,
  ZeroBase,
  InsufficientReference,
  DegenerateRange,
  EmptyAntibioticSet,
  InfeasibleSpec,
  UnknownScenario,
  InvalidArgument,
};

std::string_view to_string(ErrorKind);

/// Every failure raised by the library carries a machine-readable kind.
class CapitaError : public std::runtime_error {
public:
  CapitaError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// A data-quality observation. Findings never abort; callers decide policy.
struct Finding {
  std::string code;    // e.g. "DanglingFacilityKey"
  std::string record;  // id of the offending record, or file:line
  std::string detail;

  auto operator<=>(const Finding&) const = default;
};

using Findings = std::vector<Finding>;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class FacilityKind { HealthCenter, PublicHealthPost, PrivateHealthPost };
enum class MemberStatus { Active, Inactive, Unspecified };
enum class Scheme { CBHI, Other };
enum class CostKind { Service, Drug, Ambulance };

/// Diagnosis categories. `Other` absorbs everything outside the five tracked ones.
enum class Diagnosis : std::uint8_t {
  UpperRespiratory = 0,
  LowerRespiratory,
  Gastrointestinal,
  Wound,
  Skin,
  Other,
};
inline constexpr int kDiagnosisCount = 6;

std::string_view to_string(FacilityKind);
std::string_view to_string(MemberStatus);
std::string_view to_string(Scheme);
std::string_view to_string(CostKind);
std::string_view to_string(Diagnosis);

// Parsers return nullopt on unknown text; ingest turns that into a finding.
std::optional<FacilityKind> parse_facility_kind(std::string_view);
std::optional<MemberStatus> parse_member_status(std::string_view);
std::optional<Scheme> parse_scheme(std::string_view);
std::optional<CostKind> parse_cost_kind(std::string_view);
std::optional<Diagnosis> parse_diagnosis(std::string_view);

/// Compact set of diagnosis categories.
class DiagnosisSet {
public:
  DiagnosisSet() = default;
  DiagnosisSet(std::initializer_list<Diagnosis> ds) {
    for (auto d : ds) insert(d);
  }
  void insert(Diagnosis d) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(d)); }
  bool contains(Diagnosis d) const { return bits_ & (1u << static_cast<unsigned>(d)); }
  int size() const { return __builtin_popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  /// The single member when size() == 1.
  Diagnosis only() const;
  std::vector<Diagnosis> members() const;
  std::uint8_t bits() const { return bits_; }
  bool operator==(const DiagnosisSet&) const = default;

private:
  std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct FacilityRecord {
  std::string facility_id;
  FacilityKind kind = FacilityKind::HealthCenter;
  bool medicalized = false;
  std::optional<std::string> parent_hc_id;  // public health posts
  std::optional<std::string> catchment_id;  // health centers
  std::string district_id;
  std::string province_id;
  Month first_active_month;
  Month last_active_month;

  bool operator==(const FacilityRecord&) const = default;
};

struct MemberRecord {
  std::string member_id;
  std::string household_id;
  std::string catchment_id;
  MemberStatus status = MemberStatus::Active;
  Date last_updated;
  Scheme scheme = Scheme::CBHI;

  bool operator==(const MemberRecord&) const = default;
};

struct CostItem {
  CostKind kind = CostKind::Service;
  std::string item_code;
  bool is_antibiotic = false;
  bool is_antihistamine = false;
  bool is_non_phc = false;
  std::int64_t quantity = 1;
  Money unit_cost;

  Money total() const { return unit_cost * quantity; }
  bool operator==(const CostItem&) const = default;
};

struct VisitRecord {
  std::string visit_id;
  std::string facility_id;
  std::string member_id;
  Date visit_date;
  bool approved = true;
  int patient_age_years = 0;
  DiagnosisSet diagnosis_categories;
  bool referred = false;
  bool admitted = false;
  std::optional<Date> admission_date;
  std::optional<Date> discharge_date;
  std::vector<CostItem> cost_items;
  Money recorded_copay_total;

  bool operator==(const VisitRecord&) const = default;
};

/// Classification flags attached to an item code.
struct CodeFlags {
  bool is_antibiotic = false;
  bool is_antihistamine = false;
  bool is_non_phc = false;
  bool operator==(const CodeFlags&) const = default;
};

}  // namespace capita
