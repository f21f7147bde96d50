#include "capita/domain.hpp"

#include <array>
#include <utility>

namespace capita {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table, std::string_view text) {
  for (const auto& [name, value] : table)
    if (name == text) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, E>, N>& table, E value) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

constexpr std::array<std::pair<std::string_view, FacilityKind>, 3> kFacilityKinds{{
    {"HealthCenter", FacilityKind::HealthCenter},
    {"PublicHealthPost", FacilityKind::PublicHealthPost},
    {"PrivateHealthPost", FacilityKind::PrivateHealthPost},
}};

constexpr std::array<std::pair<std::string_view, MemberStatus>, 3> kStatuses{{
    {"Active", MemberStatus::Active},
    {"Inactive", MemberStatus::Inactive},
    {"Unspecified", MemberStatus::Unspecified},
}};

constexpr std::array<std::pair<std::string_view, Scheme>, 2> kSchemes{{
    {"CBHI", Scheme::CBHI},
    {"Other", Scheme::Other},
}};

constexpr std::array<std::pair<std::string_view, CostKind>, 3> kCostKinds{{
    {"Service", CostKind::Service},
    {"Drug", CostKind::Drug},
    {"Ambulance", CostKind::Ambulance},
}};

constexpr std::array<std::pair<std::string_view, Diagnosis>, 6> kDiagnoses{{
    {"UpperRespiratory", Diagnosis::UpperRespiratory},
    {"LowerRespiratory", Diagnosis::LowerRespiratory},
    {"Gastrointestinal", Diagnosis::Gastrointestinal},
    {"Wound", Diagnosis::Wound},
    {"Skin", Diagnosis::Skin},
    {"Other", Diagnosis::Other},
}};

}  // namespace

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::RowParseError: return "RowParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ZeroActivity: return "ZeroActivity";
    case ErrorKind::MissingCatchment: return "MissingCatchment";
    case ErrorKind::TooFewFacilities: return "TooFewFacilities";
    case ErrorKind::UnknownFacility: return "UnknownFacility";
    case ErrorKind::InconsistentCoverage: return "InconsistentCoverage";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::MissingPriorQuarter: return "MissingPriorQuarter";
    case ErrorKind::ZeroBase: return "ZeroBase";
    case ErrorKind::InsufficientReference: return "InsufficientReference";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::EmptyAntibioticSet: return "EmptyAntibioticSet";
    case ErrorKind::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "?";
}

std::string_view to_string(FacilityKind v) { return name_of(kFacilityKinds, v); }
std::string_view to_string(MemberStatus v) { return name_of(kStatuses, v); }
std::string_view to_string(Scheme v) { return name_of(kSchemes, v); }
std::string_view to_string(CostKind v) { return name_of(kCostKinds, v); }
std::string_view to_string(Diagnosis v) { return name_of(kDiagnoses, v); }

std::optional<FacilityKind> parse_facility_kind(std::string_view s) { return lookup(kFacilityKinds, s); }
std::optional<MemberStatus> parse_member_status(std::string_view s) { return lookup(kStatuses, s); }
std::optional<Scheme> parse_scheme(std::string_view s) { return lookup(kSchemes, s); }
std::optional<CostKind> parse_cost_kind(std::string_view s) { return lookup(kCostKinds, s); }
std::optional<Diagnosis> parse_diagnosis(std::string_view s) { return lookup(kDiagnoses, s); }

Diagnosis DiagnosisSet::only() const {
  for (int i = 0; i < kDiagnosisCount; ++i)
    if (bits_ & (1u << i)) return static_cast<Diagnosis>(i);
  return Diagnosis::Other;
}

std::vector<Diagnosis> DiagnosisSet::members() const {
  std::vector<Diagnosis> out;
  for (int i = 0; i < kDiagnosisCount; ++i)
    if (bits_ & (1u << i)) out.push_back(static_cast<Diagnosis>(i));
  return out;
}

}  // namespace capita
