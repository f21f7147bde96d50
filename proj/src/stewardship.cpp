#include "capita/stewardship.hpp"

#include <algorithm>
#include <unordered_map>

#include "capita/metrics.hpp"
#include "capita/segmentation.hpp"

namespace capita {

Cohort pediatric_single_category_cohort(const DatasetBundle& bundle, const CohortFilter& filter) {
  Cohort c;
  c.filter = filter;
  std::unordered_map<std::string, FacilityKind> kind;
  for (const auto& f : bundle.facilities) kind.emplace(f.facility_id, f.kind);
  for (const auto& v : bundle.visits) {
    if (!v.approved || v.patient_age_years >= filter.age_cutoff) continue;
    if (filter.period && !filter.period->contains(v.visit_date)) continue;
    auto k = kind.find(v.facility_id);
    if (k == kind.end()) continue;
    if (std::find(filter.facility_kinds.begin(), filter.facility_kinds.end(), k->second) == filter.facility_kinds.end())
      continue;
    ++c.composition.pediatric_visits;
    switch (v.diagnosis_categories.size()) {
      case 1:
        ++c.composition.one_category;
        c.visits.push_back(&v);
        break;
      case 2: ++c.composition.two_categories; break;
      default: ++c.composition.other;
    }
  }
  return c;
}

namespace {

bool has_antibiotic(const VisitRecord& v) {
  return std::any_of(v.cost_items.begin(), v.cost_items.end(), [](const CostItem& i) { return i.is_antibiotic; });
}

bool has_antihistamine(const VisitRecord& v) {
  return std::any_of(v.cost_items.begin(), v.cost_items.end(), [](const CostItem& i) { return i.is_antihistamine; });
}

template <typename Pred>
std::vector<PooledRate> pooled(const Cohort& cohort, Pred pred) {
  std::vector<PooledRate> out(kDiagnosisCount);
  for (int k = 0; k < kDiagnosisCount; ++k) out[k].category = static_cast<Diagnosis>(k);
  for (const auto* v : cohort.visits) {
    auto& r = out[static_cast<int>(v->diagnosis_categories.only())];
    ++r.visits;
    if (pred(*v)) ++r.flagged;
  }
  for (auto& r : out) r.rate = r.visits ? static_cast<double>(r.flagged) / static_cast<double>(r.visits) : 0.0;
  return out;
}

std::vector<ShareRow> ranked(const std::map<std::string, double>& amounts) {
  double total = 0;
  for (const auto& [code, a] : amounts) total += a;
  std::vector<ShareRow> rows;
  for (const auto& [code, a] : amounts) rows.push_back(ShareRow{code, a, total > 0 ? a / total : 0.0});
  std::stable_sort(rows.begin(), rows.end(), [](const ShareRow& x, const ShareRow& y) { return x.amount > y.amount; });
  return rows;
}

}  // namespace

RateReport prescription_rate_by_category(const Cohort& cohort, std::size_t min_visits) {
  std::map<std::pair<std::string, int>, CategoryRate> cells;
  for (const auto* v : cohort.visits) {
    const Diagnosis d = v->diagnosis_categories.only();
    auto& c = cells[{v->facility_id, static_cast<int>(d)}];
    c.facility_id = v->facility_id;
    c.category = d;
    ++c.visits;
    if (has_antibiotic(*v)) ++c.flagged;
  }
  RateReport out;
  std::array<std::vector<double>, kDiagnosisCount> per_category;
  for (auto& [key, c] : cells) {
    if (c.visits < min_visits) {
      out.findings.push_back(Finding{"SuppressedRate", c.facility_id,
                                     std::string(to_string(c.category)) + " visits=" + std::to_string(c.visits)});
      continue;
    }
    c.rate = static_cast<double>(c.flagged) / static_cast<double>(c.visits);
    per_category[key.second].push_back(c.rate);
    out.rates.push_back(c);
  }
  for (int k = 0; k < kDiagnosisCount; ++k)
    if (!per_category[k].empty()) out.box[k] = stats::box_summary(per_category[k]);
  return out;
}

std::vector<PooledRate> pooled_antibiotic_rates(const Cohort& cohort) { return pooled(cohort, has_antibiotic); }

std::vector<PooledRate> antihistamine_rates(const Cohort& cohort) { return pooled(cohort, has_antihistamine); }

AntibioticShares antibiotic_shares(const Cohort& cohort) {
  std::map<std::string, double> count, cost;
  for (const auto* v : cohort.visits)
    for (const auto& item : v->cost_items) {
      if (!item.is_antibiotic) continue;
      count[item.item_code] += 1;
      cost[item.item_code] += item.total().rwf();
    }
  if (count.empty()) throw CapitaError(ErrorKind::EmptyAntibioticSet, "cohort has no antibiotic items");
  AntibioticShares s;
  s.frequency = ranked(count);
  s.cost = ranked(cost);
  for (const auto& r : s.frequency) s.total_prescriptions += r.amount;
  for (const auto& r : s.cost) s.total_cost += r.amount;
  return s;
}

std::vector<ShareRow> top_with_other(const std::vector<ShareRow>& rows, std::size_t top) {
  std::vector<ShareRow> out(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(top, rows.size())));
  if (rows.size() > top) {
    ShareRow other{"Other", 0, 0};
    for (std::size_t i = top; i < rows.size(); ++i) {
      other.amount += rows[i].amount;
      other.share += rows[i].share;
    }
    out.push_back(other);
  }
  return out;
}

double top_share(const std::vector<ShareRow>& rows, std::size_t top) {
  double s = 0;
  for (std::size_t i = 0; i < std::min(top, rows.size()); ++i) s += rows[i].share;
  return s;
}

std::map<std::string, double> facility_cost_per_visit(const DatasetBundle& bundle, const Period& period,
                                                      double ambulance_copay_rate) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> acc;  // cents, visits
  for (const auto& v : bundle.visits) {
    if (!v.approved || !period.contains(v.visit_date)) continue;
    const VisitCostSummary s = visit_net_cost(v, ambulance_copay_rate);
    if (s.contains_non_phc) continue;
    auto& a = acc[v.facility_id];
    a.first += s.phc_cost_net.cents();
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [id, a] : acc) out.emplace(id, static_cast<double>(a.first) / 100.0 / static_cast<double>(a.second));
  return out;
}

std::vector<CostGroup> cost_group_breakdown(const Cohort& cohort, const std::map<std::string, double>& cost_per_visit,
                                            int n_groups) {
  if (n_groups < 1) throw CapitaError(ErrorKind::InvalidArgument, "n_groups must be positive");
  std::map<std::string, bool> in_cohort;
  for (const auto* v : cohort.visits) in_cohort[v->facility_id] = true;
  std::vector<std::string> ids;
  std::vector<double> values;
  for (const auto& [id, _] : in_cohort) {
    auto c = cost_per_visit.find(id);
    if (c == cost_per_visit.end()) continue;
    ids.push_back(id);
    values.push_back(c->second);
  }
  if (ids.size() < static_cast<std::size_t>(n_groups))
    throw CapitaError(ErrorKind::TooFewFacilities, "cost-group breakdown needs at least " + std::to_string(n_groups) +
                                                       " facilities, got " + std::to_string(ids.size()));
  const auto group = equal_count_groups(values, ids, n_groups);
  std::vector<CostGroup> out(n_groups);
  std::map<std::string, int> group_of;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CostGroup& g = out[group[i]];
    if (g.facility_ids.empty()) g.lo = g.hi = values[i];
    g.lo = std::min(g.lo, values[i]);
    g.hi = std::max(g.hi, values[i]);
    g.facility_ids.push_back(ids[i]);
    group_of.emplace(ids[i], group[i]);
  }
  std::vector<std::map<std::string, double>> cost(n_groups);
  for (const auto* v : cohort.visits) {
    auto g = group_of.find(v->facility_id);
    if (g == group_of.end()) continue;
    for (const auto& item : v->cost_items)
      if (item.is_antibiotic) cost[g->second][item.item_code] += item.total().rwf();
  }
  for (int k = 0; k < n_groups; ++k) {
    out[k].group = k + 1;
    out[k].cost_shares = ranked(cost[k]);
  }
  return out;
}

}  // namespace capita
