#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "capita/calibration.hpp"
#include "capita/metrics.hpp"
#include "capita/params_io.hpp"
#include "capita/stats.hpp"
#include "capita/synthgen.hpp"

using namespace capita;

namespace {

GeneratorSpec small_spec(std::uint64_t seed = 42) {
  GeneratorSpec s;
  s.seed = seed;
  s.n_health_centers = 60;
  s.n_districts = 6;
  return s;
}

const Generated& world() {
  static const Generated g = generate(small_spec());
  return g;
}

std::size_t unit_visits_in(const DatasetBundle& b, const Period& q, bool inflow_only) {
  const FacilityIndex ix = FacilityIndex::build(b);
  std::size_t n = 0;
  for (const auto& v : b.visits) {
    if (!v.approved || !q.contains(v.visit_date)) continue;
    const std::string* unit = ix.unit(v.facility_id);
    if (!unit) continue;
    const std::string* home = ix.home_hc(v);
    if (inflow_only && home && *home == *unit) continue;
    ++n;
  }
  return n;
}

}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("same spec, same bytes") {
    const Generated a = generate(small_spec());
    CHECK(a.bundle.same_records(world().bundle));
    CHECK(a.truth.to_json() == world().truth.to_json());
    const Generated c = generate(small_spec(43));
    CHECK_FALSE(c.bundle.same_records(world().bundle));
  }

  TEST_CASE("spec key=value round trip") {
    GeneratorSpec s = small_spec(7);
    s.cost_noise_sd = 0.15;
    s.seasonality = {1.1, 0.9, 1.0, 1.0};
    s.start = Month{2022, 7};
    s.copay = Money::parse("250.5");
    const GeneratorSpec back = GeneratorSpec::from_key_values(s.to_key_values());
    CHECK(back.to_key_values() == s.to_key_values());
    CHECK(back.seasonality[1] == 0.9);
    KeyValues kv = s.to_key_values();
    kv["n_hospitals"] = "3";
    CHECK_THROWS_AS(GeneratorSpec::from_key_values(kv), CapitaError);
  }

  TEST_CASE("infeasible specs are refused") {
    auto refuse = [](GeneratorSpec s) {
      try {
        s.validate();
        FAIL("expected InfeasibleSpec");
      } catch (const CapitaError& e) {
        CHECK(e.kind() == ErrorKind::InfeasibleSpec);
      }
    };
    GeneratorSpec s = small_spec();
    s.capture_min = 0.9;
    s.capture_max = 0.5;
    refuse(s);
    s = small_spec();
    s.n_health_centers = 10;
    refuse(s);
    s = small_spec();
    s.n_provinces = 9;
    s.n_districts = 6;
    refuse(s);
    s = small_spec();
    s.seasonality[2] = 0;
    refuse(s);
  }

  TEST_CASE("catalog") {
    const auto cat = default_antibiotic_catalog();
    CHECK(cat.size() == 39);
    std::vector<std::string> codes;
    for (const auto& p : cat) codes.push_back(p.code);
    std::sort(codes.begin(), codes.end());
    CHECK(std::unique(codes.begin(), codes.end()) == codes.end());
  }

  TEST_CASE("planted counts come back from the metrics") {
    const auto& w = world();
    const auto m = compute_metrics(w.bundle, w.truth.first_year);
    REQUIRE(m.facilities.size() == w.truth.facilities.size());
    for (const auto& f : m.facilities) {
      const PlantedFacility* p = w.truth.find(f.facility_id);
      REQUIRE(p);
      INFO(f.facility_id);
      CHECK(f.member_count == p->members);
      CHECK(f.catchment_visits_total == p->annual_total);
      CHECK(f.catchment_visits_own == p->annual_own);
      CHECK(f.inflow_visits == p->annual_inflow);
      CHECK(f.months_active == 12);
      CHECK(f.annualized_cost.rwf() == doctest::Approx(p->target_annual_cost).epsilon(1e-6));
    }
    const auto seg = segment(m.facilities);
    CHECK(seg.tier == w.truth.segmentation.tier);
    CHECK(seg.capture_group == w.truth.segmentation.capture_group);
  }

  TEST_CASE("the second year repeats the first") {
    const auto& w = world();
    const Period y2{w.truth.first_year.start.plus(12), w.truth.first_year.end.plus(12)};
    const auto a = compute_metrics(w.bundle, w.truth.first_year);
    const auto b = compute_metrics(w.bundle, y2);
    for (std::size_t i = 0; i < a.facilities.size(); ++i) {
      CHECK(a.facilities[i].catchment_visits_own == b.facilities[i].catchment_visits_own);
      CHECK(a.facilities[i].inflow_visits == b.facilities[i].inflow_visits);
    }
  }

  TEST_CASE("catchment sizes and utilization follow the spec") {
    GeneratorSpec s = small_spec(5);
    s.n_health_centers = 300;
    s.n_districts = 30;
    s.population_scale = 0.01;
    s.months = 12;
    const Generated g = generate(s);
    std::map<std::string, double> per_catchment;
    for (const auto& m : g.bundle.members) per_catchment[m.catchment_id] += 1;
    std::vector<double> sizes;
    for (const auto& [c, n] : per_catchment) sizes.push_back(n / s.population_scale);
    CHECK(stats::median(sizes) == doctest::Approx(20209).epsilon(0.10));

    std::vector<double> phc, cap;
    for (const auto& f : g.truth.facilities) {
      phc.push_back(f.phc_utilization);
      cap.push_back(f.capture_ratio);
    }
    CHECK(stats::median(phc) == doctest::Approx(1.57).epsilon(0.08));
    CHECK(stats::mean(cap) == doctest::Approx(0.43).epsilon(0.08));
    const auto q = stats::quartiles(phc);
    CHECK(q.q1 < 1.57);
    CHECK(q.q3 > 1.57);
  }

  TEST_CASE("ground truth json names every facility") {
    const std::string j = world().truth.to_json();
    for (const auto& f : world().truth.facilities) CHECK(j.find("\"" + f.facility_id + "\"") != std::string::npos);
  }
}

TEST_SUITE("perturb") {
  TEST_CASE("scenario parsing") {
    CHECK(Scenario::parse("identity").kind == ScenarioKind::Identity);
    const auto s = Scenario::parse("inflow_shift:1.5:2024-Q3:HC0001,HC0002");
    CHECK(s.kind == ScenarioKind::InflowShift);
    CHECK(s.factor == 1.5);
    CHECK(s.quarter == Period::parse("2024-Q3"));
    CHECK(s.facilities == std::vector<std::string>{"HC0001", "HC0002"});
    const auto o = Scenario::parse("cost_outliers:0.05:10");
    CHECK(o.fraction == 0.05);
    CHECK(o.factor == 10);
    for (const char* bad : {"", "shift", "utilization_shift:x:2024-Q3", "utilization_shift:1.5:2024",
                            "cost_outliers:0.05", "identity:1"}) {
      INFO(bad);
      try {
        Scenario::parse(bad);
        FAIL("expected UnknownScenario");
      } catch (const CapitaError& e) {
        CHECK(e.kind() == ErrorKind::UnknownScenario);
      }
    }
  }

  TEST_CASE("identity leaves the bundle alone") {
    const auto r = perturb(world().bundle, Scenario::parse("identity"));
    CHECK(r.bundle.same_records(world().bundle));
    CHECK(r.affected.empty());
  }

  TEST_CASE("cost outliers touch the ceiling of the fraction") {
    const auto r = perturb(world().bundle, Scenario::parse("cost_outliers:0.05:10"), 3);
    CHECK(r.affected.size() == 3);  // ceil(0.05 * 60)
    const auto again = perturb(world().bundle, Scenario::parse("cost_outliers:0.05:10"), 3);
    CHECK(again.affected == r.affected);
    const auto before = compute_metrics(world().bundle, world().truth.first_year);
    const auto after = compute_metrics(r.bundle, world().truth.first_year);
    for (std::size_t i = 0; i < before.facilities.size(); ++i) {
      const auto& id = before.facilities[i].facility_id;
      const bool hit = std::find(r.affected.begin(), r.affected.end(), id) != r.affected.end();
      const double ratio = after.facilities[i].annualized_cost.rwf() / before.facilities[i].annualized_cost.rwf();
      CHECK(ratio == doctest::Approx(hit ? 10.0 : 1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("utilization shift scales the quarter only") {
    const Period q = Period::parse("2024-Q3");
    const auto r = perturb(world().bundle, Scenario::parse("utilization_shift:1.5:2024-Q3"));
    const double before = static_cast<double>(unit_visits_in(world().bundle, q, false));
    const double after = static_cast<double>(unit_visits_in(r.bundle, q, false));
    CHECK(after / before == doctest::Approx(1.5).epsilon(0.02));
    const Period other = Period::parse("2024-Q2");
    CHECK(unit_visits_in(r.bundle, other, false) == unit_visits_in(world().bundle, other, false));
  }

  TEST_CASE("inflow shift leaves own visits alone") {
    const Period q = Period::parse("2024-Q3");
    const auto r = perturb(world().bundle, Scenario::parse("inflow_shift:2:2024-Q3"));
    const auto own_before = unit_visits_in(world().bundle, q, false) - unit_visits_in(world().bundle, q, true);
    const auto own_after = unit_visits_in(r.bundle, q, false) - unit_visits_in(r.bundle, q, true);
    CHECK(own_before == own_after);
    CHECK(unit_visits_in(r.bundle, q, true) == 2 * unit_visits_in(world().bundle, q, true));
  }

  TEST_CASE("unknown target facility") {
    CHECK_THROWS_AS(perturb(world().bundle, Scenario::parse("utilization_shift:1.5:2024-Q3:NOPE")), CapitaError);
  }
}

TEST_SUITE("params_io") {
  TEST_CASE("round trip") {
    const auto& w = world();
    const auto m = compute_metrics(w.bundle, w.truth.first_year);
    const auto seg = segment(m.facilities);
    const auto p = calibrate(m.facilities, seg, w.truth.first_year, FitMethod::Huber);
    const auto back = params_from_json(params_to_json(p));
    CHECK(back.vector() == p.vector());
    CHECK(back.method == FitMethod::Huber);
    CHECK(back.calibration_period == p.calibration_period);
    CHECK(back.tiers == p.tiers);
    CHECK(back.capture_groups == p.capture_groups);
    CHECK(back.group_median_u == p.group_median_u);
    CHECK(params_to_json(back) == params_to_json(p));
  }

  TEST_CASE("malformed input") {
    for (const char* bad : {"", "{", "[]", "{\"a_low\": \"x\"}", "{\"a_low\":1}"}) {
      INFO(bad);
      try {
        params_from_json(bad);
        FAIL("expected ConfigError");
      } catch (const CapitaError& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
      }
    }
  }
}
