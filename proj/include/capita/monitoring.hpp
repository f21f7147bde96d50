#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capita/bundle.hpp"
#include "capita/calibration.hpp"
#include "capita/config.hpp"
#include "capita/stats.hpp"

namespace capita {

enum class Indicator {
  ReferralRatio,
  AdmissionRatio,
  AvgLengthOfStay,
  CatchmentUtilization,
  TestsPerVisit,
  DrugsPerVisit,
  AntibioticVisitShare,
};
inline constexpr int kIndicatorCount = 7;
std::string_view to_string(Indicator);
std::optional<Indicator> parse_indicator(std::string_view);

/// All seven indicators of one Health Center (with its managed posts) in one month.
/// A value is absent when its denominator is zero.
struct IndicatorRow {
  std::string facility_id;
  std::string district_id;
  std::string province_id;
  Month month;
  std::array<std::optional<double>, kIndicatorCount> values{};

  const std::optional<double>& operator[](Indicator i) const { return values[static_cast<int>(i)]; }
  bool operator==(const IndicatorRow&) const = default;
};

/// Indicator rows for every Health Center and month in `range`, ordered by
/// facility then month. Attended patients are approved visits; lab tests are
/// Service items whose code starts with `config.lab_code_prefix`.
std::vector<IndicatorRow> compute_indicators(const DatasetBundle& bundle, const Period& range,
                                             const Config& config = {});

enum class FlagType { SelfHistory, DistrictMonth, ProvinceDistribution };
std::string_view to_string(FlagType);

struct MonitorFlag {
  std::string facility_id;
  Indicator indicator = Indicator::ReferralRatio;
  FlagType flag_type = FlagType::SelfHistory;
  std::optional<Month> month;  // absent for ProvinceDistribution
  double statistic = 0;        // offending value or distance
  // IQR reference
  double q1 = 0, q3 = 0, lower = 0, upper = 0;
  // Bhattacharyya reference
  double threshold = 0;

  std::string reference_summary() const;
};

struct FlagResult {
  std::vector<MonitorFlag> flags;
  Findings findings;
};

struct IqrCheck {
  stats::Quartiles quartiles;
  stats::Fences fences;
  bool flagged = false;
};

/// Checks one value against a reference distribution. Throws
/// InsufficientReference with fewer than four reference points.
IqrCheck iqr_check(std::span<const double> reference, double value, double multiplier = 1.5);

/// SelfHistory: each month against the same facility's earlier months.
/// DistrictMonth: each facility against the other facilities of its district
/// in the same month. References with fewer than four points produce an
/// InsufficientReference finding instead of a flag.
FlagResult iqr_flags(std::span<const IndicatorRow> rows, FlagType scope, double multiplier = 1.5);

struct Bhattacharyya {
  double coefficient = 1;
  double distance = 0;
  bool degenerate = false;  // pooled range is a single point
};

/// Shared equal-width histogram over the pooled [min, max] (last bin closed),
/// BC = Σ sqrt(p q) floored at 1e-12, distance = -ln BC. Throws
/// InvalidArgument when either series is empty.
Bhattacharyya bhattacharyya(std::span<const double> a, std::span<const double> b, int bins = 20);

/// Each facility's monthly series of each indicator against the pooled series
/// of the other facilities in its province.
FlagResult bhattacharyya_flags(std::span<const IndicatorRow> rows, int bins = 20, double threshold = 0.223);

struct FfsObservation {
  double visits = 0;
  Money cost;
  double cost_per_visit() const { return visits > 0 ? static_cast<double>(cost.cents()) / 100.0 / visits : 0.0; }
};

struct FfsGapDecomposition {
  std::string facility_id;
  Period period;
  Money capitation;
  Money ffs_reference;
  Money ffs_current;
  Money total_gap;  // capitation - ffs_current
  Money band_low, band_high;
  Money utilization_component;
  Money cost_per_visit_component;
  Money residual;
};

/// total_gap = capitation - FFS_current, split into
///   utilization  = (visits_now - visits_ref) · cpv_ref
///   cost/visit   = visits_now · (cpv_now - cpv_ref)
///   residual     = whatever closes the identity
/// each rounded to the cent. The band is capitation ± 1.5·IQR of the
/// reference sub-period FFS totals (at least four required).
FfsGapDecomposition decompose_ffs_gap(Money capitation, const FfsObservation& reference,
                                      std::span<const Money> reference_subperiods, const FfsObservation& current);

/// Per-Health-Center decomposition for `current`. The reference period is cut
/// into windows as long as `current`; capitation is the annual amount from
/// `params` on reference metrics, prorated to the current period length.
std::vector<FfsGapDecomposition> decompose_ffs_gaps(const CapitationParams& params, const DatasetBundle& bundle,
                                                    const Period& reference, const Period& current,
                                                    const Config& config, Findings* findings = nullptr);

}  // namespace capita
