#include "random_bundle.hpp"

#include <cstdio>
#include <random>

namespace capita::testing {

namespace {

std::string id(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03d", prefix, n);
  return buf;
}

}  // namespace

DatasetBundle random_bundle(std::uint64_t seed, const RandomBundleOptions& o) {
  std::mt19937_64 g(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(g); };
  const int span = months_between_inclusive(o.first, o.last);
  auto month_at = [&](int k) { return o.first.plus(k); };

  DatasetBundle b;
  const int n_hc = uni(3, o.max_health_centers);
  std::vector<std::string> any_facility;
  for (int i = 1; i <= n_hc; ++i) {
    FacilityRecord hc;
    hc.facility_id = id("H", i);
    hc.kind = FacilityKind::HealthCenter;
    hc.medicalized = coin(0.2);
    hc.catchment_id = id("C", i);
    hc.district_id = id("D", uni(1, 3));
    hc.province_id = "P1";
    const int a = coin(0.6) ? 0 : uni(0, span - 1);
    const int z = coin(0.6) ? span - 1 : uni(a, span - 1);
    hc.first_active_month = month_at(a);
    hc.last_active_month = month_at(z);
    b.facilities.push_back(hc);
    any_facility.push_back(hc.facility_id);
    for (int k = 1, n = uni(0, 2); k <= n; ++k) {
      FacilityRecord p = hc;
      p.facility_id = hc.facility_id + "-P" + std::to_string(k);
      p.kind = FacilityKind::PublicHealthPost;
      p.medicalized = false;
      p.catchment_id.reset();
      p.parent_hc_id = coin(0.1) ? std::string("NOPE") : hc.facility_id;
      b.facilities.push_back(p);
      any_facility.push_back(p.facility_id);
    }
    if (coin(0.5)) {
      FacilityRecord p = hc;
      p.facility_id = id("Q", i);
      p.kind = FacilityKind::PrivateHealthPost;
      p.medicalized = false;
      p.catchment_id.reset();
      b.facilities.push_back(p);
      any_facility.push_back(p.facility_id);
    }
  }
  any_facility.push_back("GHOST-FACILITY");

  std::vector<std::string> member_ids;
  for (int c = 1; c <= n_hc + 1; ++c) {
    if (coin(0.1)) continue;  // some catchments have nobody
    const int n = uni(1, 60);
    for (int k = 0; k < n; ++k) {
      MemberRecord m;
      m.member_id = id("C", c) + "-" + id("M", k);
      m.household_id = id("C", c) + "-" + id("F", k / 4);
      m.catchment_id = id("C", c);  // C<n_hc+1> has no Health Center
      const int s = uni(0, 9);
      m.status = s < 5 ? MemberStatus::Active : s < 7 ? MemberStatus::Inactive : MemberStatus::Unspecified;
      m.scheme = coin(0.05) ? Scheme::Other : Scheme::CBHI;
      const int year = uni(o.first.year - 2, o.last.year + 2);
      if (coin(0.5))
        m.last_updated = Date{year, coin(0.5) ? 1 : 7, 1};
      else
        m.last_updated = Date{year, uni(1, 12), uni(1, 28)};
      b.members.push_back(m);
      member_ids.push_back(m.member_id);
    }
  }
  member_ids.push_back("GHOST-MEMBER");

  const int n_visits = uni(0, o.max_visits);
  for (int v = 0; v < n_visits; ++v) {
    VisitRecord r;
    r.visit_id = id("V", v);
    r.facility_id = any_facility[static_cast<std::size_t>(uni(0, static_cast<int>(any_facility.size()) - 1))];
    r.member_id = member_ids[static_cast<std::size_t>(uni(0, static_cast<int>(member_ids.size()) - 1))];
    const Month m = month_at(uni(0, span - 1));
    r.visit_date = Date{m.year, m.month, uni(1, 28)};
    r.approved = coin(0.9);
    r.patient_age_years = uni(0, 80);
    r.diagnosis_categories.insert(static_cast<Diagnosis>(uni(0, kDiagnosisCount - 1)));
    for (int k = 0, n = uni(0, 4); k < n; ++k) {
      CostItem c;
      const int kind = uni(0, 9);
      c.kind = kind < 5 ? CostKind::Service : kind < 9 ? CostKind::Drug : CostKind::Ambulance;
      c.item_code = id("I", uni(0, 30));
      c.quantity = uni(1, 5);
      c.unit_cost = Money::from_cents(uni(0, 500000));
      c.is_non_phc = c.kind == CostKind::Service && coin(0.03);
      r.cost_items.push_back(c);
    }
    const int copay_mode = uni(0, 3);
    r.recorded_copay_total = Money::from_cents(copay_mode == 0 ? 0 : copay_mode == 1 ? 20000 : uni(0, 2000000));
    b.visits.push_back(std::move(r));
  }
  return b;
}

}  // namespace capita::testing
