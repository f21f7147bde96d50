#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "capita/bundle.hpp"
#include "capita/calendar.hpp"
#include "capita/domain.hpp"

namespace capita {

struct VisitCostSummary {
  std::string visit_id;
  Money phc_cost_gross;   // every non-ambulance item
  Money ambulance_cost;
  Money copay_deducted;   // patient co-payment net of the ambulance share
  Money phc_cost_net;     // gross - copay_deducted, never negative
  bool contains_non_phc = false;
  bool clamped = false;   // co-payment exceeded the gross; net forced to 0
};

/// Net PHC cost of one consultation. The ambulance co-payment is estimated as
/// `ambulance_copay_rate` of the ambulance items (rounded to the cent); the
/// part of the recorded co-payment attributed to the ambulance is the smaller
/// of the recorded total and that estimate, and only the remainder is
/// deducted from the non-ambulance items. A negative result is clamped to 0
/// and, when `findings` is given, reported as NegativeNetCost.
VisitCostSummary visit_net_cost(const VisitRecord& visit, double ambulance_copay_rate = 0.10,
                                Findings* findings = nullptr);

/// Membership rule: Active always counts; Inactive never does; anything else
/// counts when its record was last touched on a semester start (January 1 or
/// July 1) in a year inside the period or adjacent to it. Only CBHI members.
bool counts_as_active(const MemberRecord& member, const Period& period);

/// Active CBHI member counts keyed by catchment_id.
std::map<std::string, std::int64_t> active_members(std::span<const MemberRecord> members, const Period& period);

/// value × 12 / months_active. Throws ZeroActivity when months_active == 0.
double annualize(double value, int months_active);
/// Cent-exact variant, rounded half-up.
Money annualize(Money value, int months_active);

/// Lookups shared by the aggregation stages.
struct FacilityIndex {
  std::unordered_map<std::string, const FacilityRecord*> facility;
  /// Health Center that owns each HC / public HP ("payment unit"). Private HPs are absent.
  std::unordered_map<std::string, std::string> unit_of;
  std::unordered_map<std::string, std::string> hc_of_catchment;
  std::unordered_map<std::string, std::string> catchment_of_member;
  std::vector<const FacilityRecord*> health_centers;  // sorted by id

  static FacilityIndex build(const DatasetBundle& bundle);
  /// Catchment's Health Center for the patient of `visit`, if any.
  const std::string* home_hc(const VisitRecord& visit) const;
  const std::string* unit(const std::string& facility_id) const;
};

struct FacilityMetrics {
  std::string facility_id;
  Period period;
  Money annualized_cost;
  Money period_cost;  // raw sum of net PHC cost in the period
  int months_active = 0;
  std::int64_t member_count = 0;  // M
  double phc_utilization_rate = 0;
  double hc_utilization_rate_u = 0;
  double capture_ratio = 0;
  double inflow = 0;  // annualized I

  std::int64_t catchment_visits_total = 0;  // catchment members, any HC/HP
  std::int64_t catchment_visits_own = 0;    // catchment members, own HC and its posts
  std::int64_t inflow_visits = 0;           // raw non-catchment visits at the unit
  std::int64_t unit_visits = 0;             // approved visits at the unit
  std::int64_t phc_visits = 0;              // approved visits at the unit without non-PHC items

  std::string district_id;
  std::string province_id;
  bool medicalized = false;

  /// False when M or months_active is zero; such facilities cannot be segmented.
  bool rates_defined() const { return member_count > 0 && months_active > 0; }
  bool operator==(const FacilityMetrics&) const = default;
};

struct MetricsResult {
  std::vector<FacilityMetrics> facilities;  // one per Health Center, sorted by id
  Findings findings;
  const FacilityMetrics* find(const std::string& facility_id) const;
};

/// Per-Health-Center capitation metrics over `period`. Managed public posts
/// are merged into their parent; visits at private posts only feed the
/// catchment PHC utilization rate. Only approved visits count, and visits
/// with a non-PHC item are excluded from costs (but not from visit counts).
/// Throws MissingCatchment for a Health Center without catchment.
MetricsResult compute_metrics(const DatasetBundle& bundle, const Period& period, double ambulance_copay_rate = 0.10);

/// Overload that reuses a prebuilt index and membership counts.
MetricsResult compute_metrics(const DatasetBundle& bundle, const FacilityIndex& index,
                              const std::map<std::string, std::int64_t>& members_by_catchment, const Period& period,
                              double ambulance_copay_rate = 0.10);

}  // namespace capita
