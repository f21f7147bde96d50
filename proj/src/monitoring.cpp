#include "capita/monitoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "capita/metrics.hpp"
#include "capita/payment.hpp"

namespace capita {

std::string_view to_string(Indicator i) {
  switch (i) {
    case Indicator::ReferralRatio: return "referral_ratio";
    case Indicator::AdmissionRatio: return "admission_ratio";
    case Indicator::AvgLengthOfStay: return "avg_length_of_stay";
    case Indicator::CatchmentUtilization: return "catchment_utilization";
    case Indicator::TestsPerVisit: return "tests_per_visit";
    case Indicator::DrugsPerVisit: return "drugs_per_visit";
    case Indicator::AntibioticVisitShare: return "antibiotic_visit_share";
  }
  return "?";
}

std::optional<Indicator> parse_indicator(std::string_view s) {
  for (int k = 0; k < kIndicatorCount; ++k)
    if (to_string(static_cast<Indicator>(k)) == s) return static_cast<Indicator>(k);
  return std::nullopt;
}

std::string_view to_string(FlagType t) {
  switch (t) {
    case FlagType::SelfHistory: return "SelfHistory";
    case FlagType::DistrictMonth: return "DistrictMonth";
    case FlagType::ProvinceDistribution: return "ProvinceDistribution";
  }
  return "?";
}

std::string MonitorFlag::reference_summary() const {
  char buf[160];
  if (flag_type == FlagType::ProvinceDistribution)
    std::snprintf(buf, sizeof buf, "bhattacharyya=%.6f;threshold=%.6f", statistic, threshold);
  else
    std::snprintf(buf, sizeof buf, "q1=%.6f;q3=%.6f;lower=%.6f;upper=%.6f", q1, q3, lower, upper);
  return buf;
}

std::vector<IndicatorRow> compute_indicators(const DatasetBundle& bundle, const Period& range, const Config& config) {
  const FacilityIndex index = FacilityIndex::build(bundle);
  const auto members = active_members(bundle.members, range);

  struct Acc {
    std::int64_t attended = 0, referred = 0, admitted = 0, stays = 0, own_members = 0, abx_visits = 0;
    double stay_days = 0, lab_tests = 0, drugs = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;

  for (const auto& v : bundle.visits) {
    if (!v.approved || !range.contains(v.visit_date)) continue;
    const std::string* unit = index.unit(v.facility_id);
    if (!unit) continue;
    Acc& a = acc[{*unit, v.visit_date.month_of().index()}];
    ++a.attended;
    if (v.referred) ++a.referred;
    if (v.admitted) {
      ++a.admitted;
      if (v.admission_date && v.discharge_date) {
        ++a.stays;
        a.stay_days += static_cast<double>(v.discharge_date->serial() - v.admission_date->serial());
      }
    }
    const std::string* home = index.home_hc(v);
    if (home && *home == *unit) ++a.own_members;
    bool abx = false;
    for (const auto& item : v.cost_items) {
      if (item.kind == CostKind::Service && item.item_code.starts_with(config.lab_code_prefix))
        a.lab_tests += static_cast<double>(item.quantity);
      if (item.kind == CostKind::Drug) {
        a.drugs += 1;
        abx = abx || item.is_antibiotic;
      }
    }
    if (abx) ++a.abx_visits;
  }

  std::vector<IndicatorRow> rows;
  for (const auto* hc : index.health_centers) {
    std::int64_t m = 0;
    if (hc->catchment_id) {
      auto it = members.find(*hc->catchment_id);
      if (it != members.end()) m = it->second;
    }
    for (Month mo = range.start; mo <= range.end; mo = mo.plus(1)) {
      IndicatorRow row;
      row.facility_id = hc->facility_id;
      row.district_id = hc->district_id;
      row.province_id = hc->province_id;
      row.month = mo;
      auto it = acc.find({hc->facility_id, mo.index()});
      const Acc a = it == acc.end() ? Acc{} : it->second;
      auto set = [&](Indicator i, double num, double den) {
        if (den > 0) row.values[static_cast<int>(i)] = num / den;
      };
      const double n = static_cast<double>(a.attended);
      set(Indicator::ReferralRatio, static_cast<double>(a.referred), n);
      set(Indicator::AdmissionRatio, static_cast<double>(a.admitted), n);
      set(Indicator::AvgLengthOfStay, a.stay_days, static_cast<double>(a.stays));
      set(Indicator::CatchmentUtilization, static_cast<double>(a.own_members), static_cast<double>(m));
      set(Indicator::TestsPerVisit, a.lab_tests, n);
      set(Indicator::DrugsPerVisit, a.drugs, n);
      set(Indicator::AntibioticVisitShare, static_cast<double>(a.abx_visits), n);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

IqrCheck iqr_check(std::span<const double> reference, double value, double multiplier) {
  if (reference.size() < 4)
    throw CapitaError(ErrorKind::InsufficientReference,
                      "reference has " + std::to_string(reference.size()) + " points (< 4)");
  IqrCheck c;
  c.quartiles = stats::quartiles(reference);
  c.fences = stats::tukey_fences(c.quartiles, multiplier);
  c.flagged = c.fences.outside(value);
  return c;
}

namespace {

MonitorFlag iqr_flag(const IndicatorRow& row, Indicator ind, FlagType type, double value, const IqrCheck& c) {
  MonitorFlag f;
  f.facility_id = row.facility_id;
  f.indicator = ind;
  f.flag_type = type;
  f.month = row.month;
  f.statistic = value;
  f.q1 = c.quartiles.q1;
  f.q3 = c.quartiles.q3;
  f.lower = c.fences.lower;
  f.upper = c.fences.upper;
  return f;
}

void check_against(const IndicatorRow& row, Indicator ind, FlagType type, const std::vector<double>& ref,
                   double multiplier, FlagResult& out) {
  const double value = *row[ind];
  if (ref.size() < 4) {
    out.findings.push_back(Finding{"InsufficientReference", row.facility_id,
                                   std::string(to_string(ind)) + " " + row.month.to_string()});
    return;
  }
  const IqrCheck c = iqr_check(ref, value, multiplier);
  if (c.flagged) out.flags.push_back(iqr_flag(row, ind, type, value, c));
}

}  // namespace

FlagResult iqr_flags(std::span<const IndicatorRow> rows, FlagType scope, double multiplier) {
  if (scope == FlagType::ProvinceDistribution)
    throw CapitaError(ErrorKind::InvalidArgument, "province comparison uses bhattacharyya_flags");
  FlagResult out;
  std::vector<const IndicatorRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const IndicatorRow* a, const IndicatorRow* b) {
    return a->facility_id != b->facility_id ? a->facility_id < b->facility_id : a->month < b->month;
  });

  for (int k = 0; k < kIndicatorCount; ++k) {
    const auto ind = static_cast<Indicator>(k);
    if (scope == FlagType::SelfHistory) {
      std::vector<double> history;
      const std::string* current = nullptr;
      for (const auto* r : sorted) {
        if (!current || *current != r->facility_id) {
          history.clear();
          current = &r->facility_id;
        }
        if (!(*r)[ind]) continue;
        check_against(*r, ind, scope, history, multiplier, out);
        history.push_back(*(*r)[ind]);
      }
    } else {
      std::map<std::pair<std::string, int>, std::vector<const IndicatorRow*>> cells;
      for (const auto* r : sorted)
        if ((*r)[ind]) cells[{r->district_id, r->month.index()}].push_back(r);
      for (const auto* r : sorted) {
        if (!(*r)[ind]) continue;
        std::vector<double> ref;
        for (const auto* o : cells[{r->district_id, r->month.index()}])
          if (o != r) ref.push_back(*(*o)[ind]);
        check_against(*r, ind, scope, ref, multiplier, out);
      }
    }
  }
  std::stable_sort(out.flags.begin(), out.flags.end(), [](const MonitorFlag& a, const MonitorFlag& b) {
    if (a.facility_id != b.facility_id) return a.facility_id < b.facility_id;
    if (a.month != b.month) return a.month < b.month;
    return a.indicator < b.indicator;
  });
  return out;
}

Bhattacharyya bhattacharyya(std::span<const double> a, std::span<const double> b, int bins) {
  if (a.empty() || b.empty()) throw CapitaError(ErrorKind::InvalidArgument, "Bhattacharyya needs two non-empty series");
  if (bins < 1) throw CapitaError(ErrorKind::InvalidArgument, "bins must be positive");
  double lo = a[0], hi = a[0];
  for (auto s : {a, b})
    for (double x : s) lo = std::min(lo, x), hi = std::max(hi, x);
  Bhattacharyya out;
  if (!(hi > lo)) {
    out.degenerate = true;
    return out;
  }
  // Counts stay integral so that identical series give a coefficient of exactly 1.
  auto histogram = [&](std::span<const double> s) {
    std::vector<double> h(bins, 0.0);
    for (double x : s) {
      int k = static_cast<int>((x - lo) / (hi - lo) * bins);
      h[std::clamp(k, 0, bins - 1)] += 1.0;
    }
    return h;
  };
  const auto p = histogram(a), q = histogram(b);
  double bc = 0;
  for (int k = 0; k < bins; ++k) bc += std::sqrt(p[k] * q[k]);
  bc /= std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
  out.coefficient = std::max(std::min(bc, 1.0), 1e-12);
  out.distance = out.coefficient >= 1.0 ? 0.0 : -std::log(out.coefficient);
  return out;
}

FlagResult bhattacharyya_flags(std::span<const IndicatorRow> rows, int bins, double threshold) {
  FlagResult out;
  std::map<std::string, std::string> province;
  for (const auto& r : rows) province.emplace(r.facility_id, r.province_id);

  for (int k = 0; k < kIndicatorCount; ++k) {
    const auto ind = static_cast<Indicator>(k);
    std::map<std::string, std::vector<double>> series;
    for (const auto& r : rows)
      if (r[ind]) series[r.facility_id].push_back(*r[ind]);
    for (const auto& [id, prov] : province) {
      auto own = series.find(id);
      std::vector<double> ref;
      for (const auto& [other, values] : series)
        if (other != id && province.at(other) == prov) ref.insert(ref.end(), values.begin(), values.end());
      if (own == series.end() || ref.empty()) {
        out.findings.push_back(Finding{"InsufficientReference", id, std::string(to_string(ind)) + " province"});
        continue;
      }
      const Bhattacharyya d = bhattacharyya(own->second, ref, bins);
      if (d.degenerate) {
        out.findings.push_back(Finding{"DegenerateRange", id, std::string(to_string(ind))});
        continue;
      }
      if (d.distance > threshold) {
        MonitorFlag f;
        f.facility_id = id;
        f.indicator = ind;
        f.flag_type = FlagType::ProvinceDistribution;
        f.statistic = d.distance;
        f.threshold = threshold;
        out.flags.push_back(f);
      }
    }
  }
  std::stable_sort(out.flags.begin(), out.flags.end(), [](const MonitorFlag& a, const MonitorFlag& b) {
    return a.facility_id != b.facility_id ? a.facility_id < b.facility_id : a.indicator < b.indicator;
  });
  return out;
}

FfsGapDecomposition decompose_ffs_gap(Money capitation, const FfsObservation& ref,
                                      std::span<const Money> reference_subperiods, const FfsObservation& now) {
  if (reference_subperiods.size() < 4)
    throw CapitaError(ErrorKind::InsufficientReference, "variability band needs at least 4 reference sub-periods");
  std::vector<double> totals;
  for (Money m : reference_subperiods) totals.push_back(static_cast<double>(m.cents()));
  const double half_band = 1.5 * stats::quartiles(totals).iqr();

  FfsGapDecomposition d;
  d.capitation = capitation;
  d.ffs_reference = ref.cost;
  d.ffs_current = now.cost;
  d.total_gap = capitation - now.cost;
  d.band_low = capitation - Money::from_cents(std::llround(half_band));
  d.band_high = capitation + Money::from_cents(std::llround(half_band));
  const double cpv_ref_cents = ref.visits > 0 ? static_cast<double>(ref.cost.cents()) / ref.visits : 0.0;
  const double cpv_now_cents = now.visits > 0 ? static_cast<double>(now.cost.cents()) / now.visits : 0.0;
  d.utilization_component = Money::from_cents(std::llround((now.visits - ref.visits) * cpv_ref_cents));
  d.cost_per_visit_component = Money::from_cents(std::llround(now.visits * (cpv_now_cents - cpv_ref_cents)));
  d.residual = d.total_gap - d.utilization_component - d.cost_per_visit_component;
  return d;
}

std::vector<FfsGapDecomposition> decompose_ffs_gaps(const CapitationParams& params, const DatasetBundle& bundle,
                                                    const Period& reference, const Period& current,
                                                    const Config& config, Findings* findings) {
  const int k = current.months();
  const int windows = reference.months() / k;
  if (windows < 4)
    throw CapitaError(ErrorKind::InsufficientReference, "reference period " + reference.label() + " holds " +
                                                            std::to_string(windows) + " windows of " +
                                                            std::to_string(k) + " months (< 4)");
  const FacilityIndex index = FacilityIndex::build(bundle);
  const double rate = config.ambulance_copay_rate;
  const auto ref = compute_metrics(bundle, index, active_members(bundle.members, reference), reference, rate);
  const auto now = compute_metrics(bundle, index, active_members(bundle.members, current), current, rate);
  std::vector<MetricsResult> parts;
  for (int w = 0; w < windows; ++w) {
    const Period p{reference.start.plus(w * k), reference.start.plus(w * k + k - 1), Granularity::Custom};
    parts.push_back(compute_metrics(bundle, index, active_members(bundle.members, p), p, rate));
  }

  const double scale = static_cast<double>(k) / static_cast<double>(reference.months());
  std::vector<FfsGapDecomposition> out;
  for (const auto& r : ref.facilities) {
    double U = 0;
    Tier tier = Tier::Low;
    if (r.member_count > 0) {
      auto t = params.tiers.find(r.facility_id);
      auto g = params.capture_groups.find(r.facility_id);
      if (t == params.tiers.end() || g == params.capture_groups.end()) {
        if (findings) findings->push_back(Finding{"NotCalibrated", r.facility_id, "skipped"});
        continue;
      }
      tier = t->second;
      U = params.group_median_u.at(static_cast<std::size_t>(g->second - 1));
    }
    const Money annual = capitation_amount(params, tier, U, static_cast<double>(r.member_count), r.inflow);
    const Money capitation =
        Money::from_cents(div_round_half_up(annual.cents() * k, 12));
    FfsObservation ref_obs{static_cast<double>(r.phc_visits) * scale,
                           Money::from_cents(std::llround(static_cast<double>(r.period_cost.cents()) * scale))};
    const FacilityMetrics* c = now.find(r.facility_id);
    FfsObservation now_obs{c ? static_cast<double>(c->phc_visits) : 0.0, c ? c->period_cost : Money{}};
    std::vector<Money> subs;
    for (const auto& p : parts)
      if (const FacilityMetrics* m = p.find(r.facility_id)) subs.push_back(m->period_cost);
    FfsGapDecomposition d = decompose_ffs_gap(capitation, ref_obs, subs, now_obs);
    d.facility_id = r.facility_id;
    d.period = current;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace capita
