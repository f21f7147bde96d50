#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capita/bundle.hpp"
#include "capita/stats.hpp"

namespace capita {

struct CohortFilter {
  int age_cutoff = 15;  // strict: age < cutoff
  std::vector<FacilityKind> facility_kinds{FacilityKind::PublicHealthPost, FacilityKind::PrivateHealthPost};
  std::optional<Period> period;
};

/// Pediatric approved visits partitioned by number of diagnosis categories.
struct CohortComposition {
  std::size_t pediatric_visits = 0;
  std::size_t one_category = 0;
  std::size_t two_categories = 0;
  std::size_t other = 0;  // none, or three and more
  double share(std::size_t part) const {
    return pediatric_visits ? static_cast<double>(part) / static_cast<double>(pediatric_visits) : 0.0;
  }
};

struct Cohort {
  CohortFilter filter;
  std::vector<const VisitRecord*> visits;  // single-category pediatric visits, bundle order
  CohortComposition composition;
};

/// Approved visits at the filtered facility kinds with age below the cutoff
/// and exactly one diagnosis category. The cohort points into `bundle`.
Cohort pediatric_single_category_cohort(const DatasetBundle& bundle, const CohortFilter& filter = {});

struct CategoryRate {
  std::string facility_id;
  Diagnosis category = Diagnosis::Other;
  std::size_t visits = 0;
  std::size_t flagged = 0;  // visits with at least one matching item
  double rate = 0;
};

struct RateReport {
  std::vector<CategoryRate> rates;  // facility, category order; suppressed cells left out
  std::array<std::optional<stats::BoxSummary>, kDiagnosisCount> box{};
  Findings findings;  // SuppressedRate for cells under the minimum
};

/// Share of cohort visits with an antibiotic item, per facility and category.
RateReport prescription_rate_by_category(const Cohort& cohort, std::size_t min_visits = 10);

struct PooledRate {
  Diagnosis category = Diagnosis::Other;
  std::size_t visits = 0;
  std::size_t flagged = 0;
  double rate = 0;
};

/// Pooled per-category antibiotic rates (all facilities together).
std::vector<PooledRate> pooled_antibiotic_rates(const Cohort& cohort);
/// Pooled per-category antihistamine rates.
std::vector<PooledRate> antihistamine_rates(const Cohort& cohort);

struct ShareRow {
  std::string code;  // "Other" for the grouped tail
  double amount = 0;  // prescription count or RWF
  double share = 0;
};

struct AntibioticShares {
  std::vector<ShareRow> frequency;  // ranked, every code
  std::vector<ShareRow> cost;       // ranked, every code
  double total_prescriptions = 0;
  double total_cost = 0;
};

/// Frequency share by item count and cost share by quantity × unit cost for
/// every antibiotic code in the cohort. Throws EmptyAntibioticSet.
AntibioticShares antibiotic_shares(const Cohort& cohort);

/// The first `top` ranked rows followed by a single "Other" row for the rest.
std::vector<ShareRow> top_with_other(const std::vector<ShareRow>& ranked, std::size_t top);

/// Sum of the `top` largest shares.
double top_share(const std::vector<ShareRow>& ranked, std::size_t top);

/// Net PHC cost per approved PHC visit at each facility (not merged into its
/// Health Center). Facilities without such visits are absent.
std::map<std::string, double> facility_cost_per_visit(const DatasetBundle& bundle, const Period& period,
                                                      double ambulance_copay_rate = 0.10);

struct CostGroup {
  int group = 0;  // 1-based, ascending cost per visit
  double lo = 0, hi = 0;
  std::vector<std::string> facility_ids;
  std::vector<ShareRow> cost_shares;  // ranked
};

/// Cohort facilities split into equal-count groups by cost per visit, with
/// the antibiotic cost shares of each group. Throws TooFewFacilities when
/// fewer facilities than groups have a cost per visit.
std::vector<CostGroup> cost_group_breakdown(const Cohort& cohort, const std::map<std::string, double>& cost_per_visit,
                                            int n_groups = 4);

}  // namespace capita
