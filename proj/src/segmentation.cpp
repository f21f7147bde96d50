#include "capita/segmentation.hpp"

#include <algorithm>
#include <numeric>

#include "capita/stats.hpp"

namespace capita {

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Low: return "Low";
    case Tier::Medium: return "Medium";
    case Tier::High: return "High";
  }
  return "?";
}

std::optional<Tier> parse_tier(std::string_view s) {
  if (s == "Low") return Tier::Low;
  if (s == "Medium") return Tier::Medium;
  if (s == "High") return Tier::High;
  return std::nullopt;
}

std::vector<int> equal_count_groups(std::span<const double> values, std::span<const std::string> ids, int groups) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return ids[a] < ids[b];
  });
  const auto sizes = stats::equal_group_sizes(n, static_cast<std::size_t>(groups));
  std::vector<int> out(n, 0);
  std::size_t pos = 0;
  for (int g = 0; g < groups; ++g)
    for (std::size_t k = 0; k < sizes[g]; ++k) out[order[pos++]] = g;
  return out;
}

namespace {

std::vector<GroupRange> ranges_of(std::span<const double> values, const std::vector<int>& group, int groups) {
  std::vector<GroupRange> r(groups);
  std::vector<bool> seen(groups, false);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& g = r[group[i]];
    if (!seen[group[i]]) {
      g.lo = g.hi = values[i];
      seen[group[i]] = true;
    }
    g.lo = std::min(g.lo, values[i]);
    g.hi = std::max(g.hi, values[i]);
    ++g.count;
  }
  return r;
}

std::vector<double> cut_points(const std::vector<GroupRange>& ranges) {
  std::vector<double> cuts;
  for (std::size_t g = 0; g + 1 < ranges.size(); ++g) cuts.push_back(ranges[g].hi);
  return cuts;
}

}  // namespace

SegmentationResult segment(std::span<const FacilityMetrics> metrics, int capture_groups) {
  SegmentationResult out;
  std::vector<const FacilityMetrics*> usable;
  for (const auto& m : metrics) {
    if (m.rates_defined())
      usable.push_back(&m);
    else
      out.findings.push_back(Finding{"NotSegmented", m.facility_id, "undefined rates"});
  }
  if (usable.size() < kMinSegmentFacilities)
    throw CapitaError(ErrorKind::TooFewFacilities, "segmentation needs at least 15 facilities with defined rates, got " +
                                                       std::to_string(usable.size()));

  std::vector<std::string> ids;
  std::vector<double> phc, capture;
  for (const auto* m : usable) {
    ids.push_back(m->facility_id);
    phc.push_back(m->phc_utilization_rate);
    capture.push_back(m->capture_ratio);
  }

  const auto tiers = equal_count_groups(phc, ids, kTierCount);
  const auto groups = equal_count_groups(capture, ids, capture_groups);
  out.tier_ranges = ranges_of(phc, tiers, kTierCount);
  out.tier_boundaries = cut_points(out.tier_ranges);
  out.capture_group_ranges = ranges_of(capture, groups, capture_groups);
  out.capture_group_boundaries = cut_points(out.capture_group_ranges);

  std::vector<std::vector<double>> u_by_group(capture_groups);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    out.tier.emplace(ids[i], static_cast<Tier>(tiers[i]));
    out.capture_group.emplace(ids[i], groups[i] + 1);
    u_by_group[groups[i]].push_back(usable[i]->hc_utilization_rate_u);
  }
  for (const auto& us : u_by_group) out.group_median_u.push_back(stats::median(us));
  for (std::size_t g = 1; g < out.group_median_u.size(); ++g)
    if (out.group_median_u[g] < out.group_median_u[g - 1])
      out.findings.push_back(Finding{"NonMonotoneGroupMedian", "group " + std::to_string(g + 1), ""});
  return out;
}

double lookup_U(const std::string& facility_id, const SegmentationResult& s) {
  auto it = s.capture_group.find(facility_id);
  if (it == s.capture_group.end())
    throw CapitaError(ErrorKind::UnknownFacility, "facility " + facility_id + " is not in the segmentation");
  return s.group_median_u.at(static_cast<std::size_t>(it->second - 1));
}

}  // namespace capita
