#include "capita/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace capita {

VisitCostSummary visit_net_cost(const VisitRecord& visit, double ambulance_copay_rate, Findings* findings) {
  VisitCostSummary s;
  s.visit_id = visit.visit_id;
  for (const auto& item : visit.cost_items) {
    if (item.kind == CostKind::Ambulance)
      s.ambulance_cost += item.total();
    else
      s.phc_cost_gross += item.total();
    if (item.is_non_phc) s.contains_non_phc = true;
  }
  const Money estimated = Money::from_cents(
      std::llround(static_cast<double>(s.ambulance_cost.cents()) * ambulance_copay_rate));
  const Money ambulance_share = std::min(visit.recorded_copay_total, estimated);
  s.copay_deducted = visit.recorded_copay_total - ambulance_share;
  if (s.copay_deducted > s.phc_cost_gross) {
    s.clamped = true;
    if (findings)
      findings->push_back(Finding{"NegativeNetCost", visit.visit_id,
                                  (s.phc_cost_gross - s.copay_deducted).to_string()});
    s.copay_deducted = s.phc_cost_gross;
  }
  s.phc_cost_net = s.phc_cost_gross - s.copay_deducted;
  return s;
}

bool counts_as_active(const MemberRecord& m, const Period& period) {
  if (m.scheme != Scheme::CBHI) return false;
  if (m.status == MemberStatus::Active) return true;
  if (m.status == MemberStatus::Inactive) return false;
  const Date& d = m.last_updated;
  const bool semester_start = d.day == 1 && (d.month == 1 || d.month == 7);
  return semester_start && d.year >= period.start.year - 1 && d.year <= period.end.year + 1;
}

std::map<std::string, std::int64_t> active_members(std::span<const MemberRecord> members, const Period& period) {
  std::map<std::string, std::int64_t> out;
  for (const auto& m : members)
    if (counts_as_active(m, period)) ++out[m.catchment_id];
  return out;
}

double annualize(double value, int months_active) {
  if (months_active <= 0)
    throw CapitaError(ErrorKind::ZeroActivity, "cannot annualize over " + std::to_string(months_active) + " months");
  return value * 12.0 / static_cast<double>(months_active);
}

Money annualize(Money value, int months_active) {
  if (months_active <= 0)
    throw CapitaError(ErrorKind::ZeroActivity, "cannot annualize over " + std::to_string(months_active) + " months");
  return Money::from_cents(div_round_half_up(value.cents() * 12, months_active));
}

FacilityIndex FacilityIndex::build(const DatasetBundle& b) {
  FacilityIndex ix;
  for (const auto& f : b.facilities) {
    ix.facility.emplace(f.facility_id, &f);
    if (f.kind == FacilityKind::HealthCenter) {
      ix.health_centers.push_back(&f);
      ix.unit_of.emplace(f.facility_id, f.facility_id);
      if (f.catchment_id) ix.hc_of_catchment.emplace(*f.catchment_id, f.facility_id);
    }
  }
  for (const auto& f : b.facilities) {
    if (f.kind != FacilityKind::PublicHealthPost || !f.parent_hc_id) continue;
    auto parent = ix.facility.find(*f.parent_hc_id);
    if (parent != ix.facility.end() && parent->second->kind == FacilityKind::HealthCenter)
      ix.unit_of.emplace(f.facility_id, *f.parent_hc_id);
  }
  std::sort(ix.health_centers.begin(), ix.health_centers.end(),
            [](const FacilityRecord* a, const FacilityRecord* c) { return a->facility_id < c->facility_id; });
  ix.catchment_of_member.reserve(b.members.size());
  for (const auto& m : b.members) ix.catchment_of_member.emplace(m.member_id, m.catchment_id);
  return ix;
}

const std::string* FacilityIndex::home_hc(const VisitRecord& v) const {
  auto c = catchment_of_member.find(v.member_id);
  if (c == catchment_of_member.end()) return nullptr;
  auto h = hc_of_catchment.find(c->second);
  return h == hc_of_catchment.end() ? nullptr : &h->second;
}

const std::string* FacilityIndex::unit(const std::string& facility_id) const {
  auto it = unit_of.find(facility_id);
  return it == unit_of.end() ? nullptr : &it->second;
}

const FacilityMetrics* MetricsResult::find(const std::string& id) const {
  auto it = std::lower_bound(facilities.begin(), facilities.end(), id,
                             [](const FacilityMetrics& m, const std::string& key) { return m.facility_id < key; });
  return it != facilities.end() && it->facility_id == id ? &*it : nullptr;
}

MetricsResult compute_metrics(const DatasetBundle& bundle, const Period& period, double ambulance_copay_rate) {
  const FacilityIndex index = FacilityIndex::build(bundle);
  return compute_metrics(bundle, index, active_members(bundle.members, period), period, ambulance_copay_rate);
}

MetricsResult compute_metrics(const DatasetBundle& bundle, const FacilityIndex& index,
                              const std::map<std::string, std::int64_t>& members_by_catchment, const Period& period,
                              double ambulance_copay_rate) {
  MetricsResult result;

  struct Acc {
    Money cost;
    std::int64_t total = 0, own = 0, inflow = 0, unit = 0, phc = 0;
    std::set<int> months;
  };
  std::unordered_map<std::string, Acc> acc;
  for (const auto* hc : index.health_centers) {
    if (!hc->catchment_id || hc->catchment_id->empty())
      throw CapitaError(ErrorKind::MissingCatchment, "health center " + hc->facility_id + " has no catchment");
    acc.emplace(hc->facility_id, Acc{});
  }

  for (const auto& v : bundle.visits) {
    if (!v.approved || !period.contains(v.visit_date)) continue;
    if (!index.facility.contains(v.facility_id)) continue;
    const std::string* home = index.home_hc(v);
    const std::string* unit = index.unit(v.facility_id);
    if (home) {
      Acc& h = acc[*home];
      ++h.total;
      if (unit && *unit == *home) ++h.own;
    }
    if (!unit) continue;
    Acc& u = acc[*unit];
    ++u.unit;
    if (!home || *home != *unit) ++u.inflow;
    const FacilityRecord* hc = index.facility.at(*unit);
    const Month m = v.visit_date.month_of();
    if (hc->first_active_month <= m && m <= hc->last_active_month) u.months.insert(m.index());
    const VisitCostSummary cost = visit_net_cost(v, ambulance_copay_rate, &result.findings);
    if (!cost.contains_non_phc) {
      u.cost += cost.phc_cost_net;
      ++u.phc;
    }
  }

  for (const auto* hc : index.health_centers) {
    const Acc& a = acc.at(hc->facility_id);
    FacilityMetrics fm;
    fm.facility_id = hc->facility_id;
    fm.period = period;
    fm.period_cost = a.cost;
    fm.months_active = static_cast<int>(a.months.size());
    auto mc = members_by_catchment.find(*hc->catchment_id);
    fm.member_count = mc == members_by_catchment.end() ? 0 : mc->second;
    fm.catchment_visits_total = a.total;
    fm.catchment_visits_own = a.own;
    fm.inflow_visits = a.inflow;
    fm.unit_visits = a.unit;
    fm.phc_visits = a.phc;
    fm.district_id = hc->district_id;
    fm.province_id = hc->province_id;
    fm.medicalized = hc->medicalized;

    if (fm.months_active > 0) {
      fm.annualized_cost = annualize(a.cost, fm.months_active);
      fm.inflow = annualize(static_cast<double>(a.inflow), fm.months_active);
      if (fm.member_count > 0) {
        const double m = static_cast<double>(fm.member_count);
        fm.phc_utilization_rate = annualize(static_cast<double>(a.total), fm.months_active) / m;
        fm.hc_utilization_rate_u = annualize(static_cast<double>(a.own), fm.months_active) / m;
      } else {
        result.findings.push_back(Finding{"ZeroMembers", fm.facility_id, period.label()});
      }
    } else {
      result.findings.push_back(Finding{"ZeroActivity", fm.facility_id, period.label()});
    }
    if (a.total > 0) {
      fm.capture_ratio = static_cast<double>(a.own) / static_cast<double>(a.total);
    } else {
      result.findings.push_back(Finding{"ZeroDenominator", fm.facility_id, "capture_ratio"});
    }
    result.facilities.push_back(std::move(fm));
  }
  return result;
}

}  // namespace capita
