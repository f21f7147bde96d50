#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capita/domain.hpp"
#include "capita/metrics.hpp"

namespace capita {

enum class Tier { Low = 0, Medium = 1, High = 2 };
inline constexpr int kTierCount = 3;
std::string_view to_string(Tier);
std::optional<Tier> parse_tier(std::string_view);

inline constexpr std::size_t kMinSegmentFacilities = 15;

/// Closed value range covered by one group.
struct GroupRange {
  double lo = 0;
  double hi = 0;
  std::size_t count = 0;
  bool operator==(const GroupRange&) const = default;
};

struct SegmentationResult {
  std::vector<GroupRange> tier_ranges;           // Low, Medium, High on PHC utilization
  std::vector<double> tier_boundaries;           // two cut points (upper edge of Low, Medium)
  std::vector<GroupRange> capture_group_ranges;  // groups 1..G on capture ratio
  std::vector<double> capture_group_boundaries;  // G-1 cut points
  std::map<std::string, Tier> tier;
  std::map<std::string, int> capture_group;      // 1-based
  std::vector<double> group_median_u;            // index g-1
  Findings findings;

  bool contains(const std::string& facility_id) const { return capture_group.contains(facility_id); }
  bool operator==(const SegmentationResult&) const = default;
};

/// Rank-based equal-count grouping: items are ordered by value, ties broken by
/// id; the first groups receive the remainder. Returns the 0-based group of
/// each input position.
std::vector<int> equal_count_groups(std::span<const double> values, std::span<const std::string> ids, int groups);

/// Splits facilities with defined rates into utilization tiers and
/// capture-ratio groups, and takes the median u inside each capture group.
/// Throws TooFewFacilities with fewer than 15 segmentable facilities.
SegmentationResult segment(std::span<const FacilityMetrics> metrics, int capture_groups = 5);

/// U for a facility: the median u of its capture group. Throws UnknownFacility.
double lookup_U(const std::string& facility_id, const SegmentationResult& segmentation);

}  // namespace capita
