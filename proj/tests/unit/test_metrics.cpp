#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "capita/metrics.hpp"
#include "capita/segmentation.hpp"
#include "random_bundle.hpp"
#include "reference_metrics.hpp"

using namespace capita;

namespace {

CostItem item(CostKind kind, std::int64_t rwf) {
  CostItem c;
  c.kind = kind;
  c.item_code = "X";
  c.unit_cost = Money::from_rwf(rwf);
  return c;
}

FacilityRecord health_center(const std::string& id, const std::string& catchment) {
  FacilityRecord f;
  f.facility_id = id;
  f.catchment_id = catchment;
  f.district_id = "D1";
  f.province_id = "P1";
  f.first_active_month = {2020, 1};
  f.last_active_month = {2030, 12};
  return f;
}

VisitRecord visit(const std::string& id, const std::string& facility, const std::string& member, Month m) {
  VisitRecord v;
  v.visit_id = id;
  v.facility_id = facility;
  v.member_id = member;
  v.visit_date = Date{m.year, m.month, 15};
  v.cost_items.push_back(item(CostKind::Service, 1000));
  return v;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("ambulance co-payment takes the smaller share") {
    VisitRecord v;
    v.cost_items = {item(CostKind::Service, 2000), item(CostKind::Drug, 1000), item(CostKind::Ambulance, 10000)};
    v.recorded_copay_total = Money::from_rwf(1500);
    const auto s = visit_net_cost(v);
    CHECK(s.ambulance_cost == Money::from_rwf(10000));
    CHECK(s.copay_deducted == Money::from_rwf(500));
    CHECK(s.phc_cost_net == Money::from_rwf(2500));

    v.recorded_copay_total = Money::from_rwf(600);  // below the 10% estimate
    CHECK(visit_net_cost(v).phc_cost_net == Money::from_rwf(3000));
  }

  TEST_CASE("plain co-payment") {
    VisitRecord v;
    v.cost_items = {item(CostKind::Service, 700), item(CostKind::Drug, 500)};
    v.recorded_copay_total = Money::from_rwf(200);
    CHECK(visit_net_cost(v).phc_cost_net == Money::from_rwf(1000));
  }

  TEST_CASE("co-payment above the items clamps to zero") {
    VisitRecord v;
    v.visit_id = "V1";
    v.cost_items = {item(CostKind::Service, 100)};
    v.recorded_copay_total = Money::from_rwf(200);
    Findings f;
    const auto s = visit_net_cost(v, 0.10, &f);
    CHECK(s.phc_cost_net == Money{});
    CHECK(s.clamped);
    REQUIRE(f.size() == 1);
    CHECK(f[0].code == "NegativeNetCost");
  }

  TEST_CASE("membership rule") {
    const Period p = Period::parse("2024");
    MemberRecord m{"M", "H", "C", MemberStatus::Active, Date{2019, 3, 3}, Scheme::CBHI};
    CHECK(counts_as_active(m, p));
    m.status = MemberStatus::Unspecified;
    m.last_updated = Date{2024, 7, 1};
    CHECK(counts_as_active(m, p));
    m.last_updated = Date{2024, 1, 1};
    CHECK(counts_as_active(m, p));
    m.last_updated = Date{2024, 7, 2};
    CHECK_FALSE(counts_as_active(m, p));
    m.last_updated = Date{2024, 3, 1};
    CHECK_FALSE(counts_as_active(m, p));
    m.last_updated = Date{2019, 7, 1};
    CHECK_FALSE(counts_as_active(m, p));
    m.status = MemberStatus::Inactive;
    m.last_updated = Date{2024, 7, 1};
    CHECK_FALSE(counts_as_active(m, p));
    m.status = MemberStatus::Active;
    m.scheme = Scheme::Other;
    CHECK_FALSE(counts_as_active(m, p));
  }

  TEST_CASE("annualization") {
    CHECK(annualize(Money::from_rwf(6'000'000), 6) == Money::from_rwf(12'000'000));
    CHECK(annualize(Money::from_cents(12345), 12) == Money::from_cents(12345));
    CHECK(annualize(7.0, 12) == 7.0);
    CHECK_THROWS_AS(annualize(1.0, 0), CapitaError);
    CHECK_THROWS_AS(annualize(Money::from_rwf(1), 0), CapitaError);
    CHECK(annualize(Money::from_cents(1), 7) == Money::from_cents(2));  // 12/7 = 1.71 rounds up
  }

  TEST_CASE("direct counting fixture") {
    // 10 members; 4 visits at own HC, 6 at another HC, 3 visits by outsiders.
    DatasetBundle b;
    b.facilities = {health_center("H1", "C1"), health_center("H2", "C2")};
    for (int i = 0; i < 10; ++i)
      b.members.push_back(MemberRecord{"A" + std::to_string(i), "h", "C1", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    b.members.push_back(MemberRecord{"B0", "h", "C2", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    int n = 0;
    auto add = [&](const std::string& fac, const std::string& member) {
      b.visits.push_back(visit("V" + std::to_string(n), fac, member, Month{2024, 1}.plus(n % 12)));
      ++n;
    };
    for (int i = 0; i < 4; ++i) add("H1", "A" + std::to_string(i));
    for (int i = 0; i < 6; ++i) add("H2", "A" + std::to_string(i));
    for (int i = 0; i < 3; ++i) add("H1", "B0");
    // months at H1: 0..3 own, 10..12 -> 10, 11, 0 (wraps): distinct months = 6
    const auto m = compute_metrics(b, Period::parse("2024"));
    const auto* h1 = m.find("H1");
    REQUIRE(h1);
    CHECK(h1->member_count == 10);
    CHECK(h1->catchment_visits_total == 10);
    CHECK(h1->catchment_visits_own == 4);
    CHECK(h1->inflow_visits == 3);
    CHECK(h1->capture_ratio == doctest::Approx(0.4));
    CHECK(h1->months_active == 6);
    CHECK(h1->phc_utilization_rate == doctest::Approx(10.0 * 12 / 6 / 10));
    CHECK(h1->hc_utilization_rate_u == doctest::Approx(4.0 * 12 / 6 / 10));
    CHECK(h1->inflow == doctest::Approx(3.0 * 12 / 6));
    CHECK(h1->period_cost == Money::from_rwf(7000));
    CHECK(h1->annualized_cost == Money::from_rwf(14000));
  }

  TEST_CASE("twelve active months reproduce the raw rates") {
    DatasetBundle b;
    b.facilities = {health_center("H1", "C1"), health_center("H2", "C2")};
    for (int i = 0; i < 10; ++i)
      b.members.push_back(MemberRecord{"A" + std::to_string(i), "h", "C1", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    b.members.push_back(MemberRecord{"B0", "h", "C2", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    // Unapproved filler visits do not count towards months of activity, so
    // spread the 7 counted H1 visits plus 5 approved H1 visits by a member
    // of a catchment without Health Center.
    b.members.push_back(MemberRecord{"Z0", "h", "C9", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    int n = 0;
    auto add = [&](const std::string& fac, const std::string& member) {
      b.visits.push_back(visit("V" + std::to_string(n), fac, member, Month{2024, 1}.plus(n)));
      ++n;
    };
    for (int i = 0; i < 4; ++i) add("H1", "A" + std::to_string(i));
    for (int i = 0; i < 3; ++i) add("H1", "B0");
    for (int i = 0; i < 5; ++i) add("H1", "Z0");
    for (int i = 0; i < 6; ++i) {
      b.visits.push_back(visit("W" + std::to_string(i), "H2", "A" + std::to_string(i), Month{2024, 3}));
    }
    const auto* h1 = compute_metrics(b, Period::parse("2024")).find("H1");
    REQUIRE(h1);
    CHECK(h1->months_active == 12);
    CHECK(h1->phc_utilization_rate == doctest::Approx(1.0));
    CHECK(h1->hc_utilization_rate_u == doctest::Approx(0.4));
    CHECK(h1->capture_ratio == doctest::Approx(0.4));
    CHECK(h1->inflow == doctest::Approx(8.0));  // 3 outsiders + 5 without a catchment HC
  }

  TEST_CASE("catchment without member visits") {
    DatasetBundle b;
    b.facilities = {health_center("H1", "C1")};
    b.members.push_back(MemberRecord{"A", "h", "C1", MemberStatus::Active, Date{2024, 1, 2}, Scheme::CBHI});
    const auto m = compute_metrics(b, Period::parse("2024"));
    CHECK(m.facilities[0].capture_ratio == 0.0);
    CHECK(std::any_of(m.findings.begin(), m.findings.end(),
                      [](const Finding& f) { return f.code == "ZeroDenominator"; }));
  }

  TEST_CASE("health center without catchment") {
    DatasetBundle b;
    b.facilities = {health_center("H1", "C1")};
    b.facilities[0].catchment_id.reset();
    CHECK_THROWS_AS(compute_metrics(b, Period::parse("2024")), CapitaError);
  }

  TEST_CASE("random bundles match the brute-force reference") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      const DatasetBundle b = testing::random_bundle(seed, {.max_health_centers = 8, .max_visits = 1500});
      const Period p = Period::parse(seed % 2 ? "2023-07:2024-06" : "2024");
      const auto got = compute_metrics(b, p);
      const auto want = testing::reference_metrics(b, p);
      REQUIRE(got.facilities.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        const auto& g = got.facilities[i];
        const auto& w = want[i];
        INFO("seed " << seed << " facility " << w.facility_id);
        CHECK(g.facility_id == w.facility_id);
        CHECK(g.period_cost.cents() == w.cost_cents);
        CHECK(g.annualized_cost.cents() == w.annualized_cost_cents);
        CHECK(g.months_active == w.months_active);
        CHECK(g.member_count == w.members);
        CHECK(g.catchment_visits_total == w.total);
        CHECK(g.catchment_visits_own == w.own);
        CHECK(g.inflow_visits == w.inflow);
        CHECK(g.unit_visits == w.unit);
        CHECK(g.phc_visits == w.phc);
        CHECK(g.phc_utilization_rate == doctest::Approx(w.phc_utilization).epsilon(1e-12));
        CHECK(g.hc_utilization_rate_u == doctest::Approx(w.u).epsilon(1e-12));
        CHECK(g.capture_ratio == doctest::Approx(w.capture).epsilon(1e-12));
        CHECK(g.inflow == doctest::Approx(w.inflow_annual).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("invariants on random bundles") {
    for (std::uint64_t seed = 200; seed < 215; ++seed) {
      const DatasetBundle b = testing::random_bundle(seed, {.max_health_centers = 10, .max_visits = 2000});
      const Period p = Period::parse("2024");
      const auto m = compute_metrics(b, p);
      const FacilityIndex ix = FacilityIndex::build(b);
      std::int64_t approved_at_units = 0;
      for (const auto& v : b.visits)
        if (v.approved && p.contains(v.visit_date) && ix.unit(v.facility_id)) ++approved_at_units;
      std::int64_t unit_sum = 0;
      for (const auto& f : m.facilities) {
        CHECK(f.capture_ratio >= 0.0);
        CHECK(f.capture_ratio <= 1.0);
        CHECK(f.catchment_visits_own <= f.catchment_visits_total);
        CHECK(f.months_active <= 12);
        CHECK(f.unit_visits == f.catchment_visits_own + f.inflow_visits);  // conservation
        CHECK(f.phc_visits <= f.unit_visits);
        unit_sum += f.unit_visits;
      }
      CHECK(unit_sum == approved_at_units);
    }
  }

  TEST_CASE("result does not depend on visit order") {
    DatasetBundle b = testing::random_bundle(77, {.max_health_centers = 8, .max_visits = 2000});
    const auto a = compute_metrics(b, Period::parse("2024"));
    std::reverse(b.visits.begin(), b.visits.end());
    std::reverse(b.members.begin(), b.members.end());
    const auto c = compute_metrics(b, Period::parse("2024"));
    CHECK(a.facilities == c.facilities);
  }
}

TEST_SUITE("segmentation") {
  std::vector<FacilityMetrics> fake(int n, auto phc_of, auto capture_of) {
    std::vector<FacilityMetrics> out;
    for (int i = 0; i < n; ++i) {
      FacilityMetrics m;
      m.facility_id = "F" + std::string(i < 10 ? "0" : "") + std::to_string(i);
      m.member_count = 100;
      m.months_active = 12;
      m.phc_utilization_rate = phc_of(i);
      m.capture_ratio = capture_of(i);
      m.hc_utilization_rate_u = m.phc_utilization_rate * m.capture_ratio;
      out.push_back(m);
    }
    return out;
  }

  TEST_CASE("fifteen distinct utilizations give 5/5/5") {
    const auto m = fake(15, [](int i) { return 1.0 + 0.1 * i; }, [](int i) { return 0.05 * i; });
    const auto s = segment(m);
    REQUIRE(s.tier_ranges.size() == 3);
    for (const auto& r : s.tier_ranges) CHECK(r.count == 5);
    CHECK(s.tier.at("F00") == Tier::Low);
    CHECK(s.tier.at("F07") == Tier::Medium);
    CHECK(s.tier.at("F14") == Tier::High);
    CHECK(s.tier_boundaries[0] == doctest::Approx(1.4));
  }

  TEST_CASE("seventeen into five groups") {
    const auto m = fake(17, [](int i) { return 1.0 + i; }, [](int i) { return 0.01 * (17 - i); });
    const auto s = segment(m);
    std::vector<std::size_t> sizes;
    for (const auto& r : s.capture_group_ranges) sizes.push_back(r.count);
    CHECK(sizes == std::vector<std::size_t>{4, 4, 3, 3, 3});
    CHECK(s.capture_group.at("F16") == 1);  // lowest capture
    CHECK(s.capture_group.at("F00") == 5);
  }

  TEST_CASE("U is the group median of u") {
    const auto m = fake(15, [](int i) { return 1.0 + 0.01 * i; }, [](int i) { return 0.1 + 0.05 * i; });
    const auto s = segment(m);
    // group 5 holds F12, F13, F14
    std::vector<double> u{m[12].hc_utilization_rate_u, m[13].hc_utilization_rate_u, m[14].hc_utilization_rate_u};
    CHECK(lookup_U("F13", s) == doctest::Approx(u[1]));
    CHECK(lookup_U("F12", s) == lookup_U("F14", s));
    CHECK_THROWS_AS(lookup_U("nope", s), CapitaError);
  }

  TEST_CASE("ties are broken by id and input order does not matter") {
    auto m = fake(20, [](int i) { return i < 10 ? 1.0 : 2.0; }, [](int) { return 0.5; });
    const auto s1 = segment(m);
    std::reverse(m.begin(), m.end());
    const auto s2 = segment(m);
    CHECK(s1.tier == s2.tier);
    CHECK(s1.capture_group == s2.capture_group);
    CHECK(s1.capture_group.at("F00") == 1);
    CHECK(s1.capture_group.at("F19") == 5);
  }

  TEST_CASE("too few facilities") {
    const auto m = fake(14, [](int i) { return 1.0 + i; }, [](int) { return 0.5; });
    try {
      segment(m);
      FAIL("expected TooFewFacilities");
    } catch (const CapitaError& e) {
      CHECK(e.kind() == ErrorKind::TooFewFacilities);
    }
  }

  TEST_CASE("facilities without rates are left out with a finding") {
    auto m = fake(16, [](int i) { return 1.0 + i; }, [](int) { return 0.5; });
    m[3].member_count = 0;
    const auto s = segment(m);
    CHECK_FALSE(s.contains("F03"));
    CHECK(s.findings.size() >= 1);
  }

  TEST_CASE("group ranges are ordered and disjoint") {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> d(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> phc(40), cap(40);
      for (auto& x : phc) x = 0.5 + d(g);
      for (auto& x : cap) x = d(g);
      const auto m = fake(40, [&](int i) { return phc[i]; }, [&](int i) { return cap[i]; });
      const auto s = segment(m);
      for (std::size_t k = 1; k < s.capture_group_ranges.size(); ++k)
        CHECK(s.capture_group_ranges[k - 1].hi <= s.capture_group_ranges[k].lo);
      for (std::size_t k = 1; k < s.tier_ranges.size(); ++k) CHECK(s.tier_ranges[k - 1].hi <= s.tier_ranges[k].lo);
    }
  }
}
