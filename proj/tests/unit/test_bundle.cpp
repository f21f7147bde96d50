#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "capita/bundle.hpp"
#include "capita/validate.hpp"
#include "random_bundle.hpp"

using namespace capita;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("capita_unit_" + name);
  fs::remove_all(p);
  return p;
}

DatasetBundle tiny_bundle() {
  DatasetBundle b;
  FacilityRecord hc;
  hc.facility_id = "HC1";
  hc.catchment_id = "C1";
  hc.district_id = "D1";
  hc.province_id = "P1";
  hc.first_active_month = {2024, 1};
  hc.last_active_month = {2024, 12};
  b.facilities.push_back(hc);
  FacilityRecord hp = hc;
  hp.facility_id = "HC1-P1";
  hp.kind = FacilityKind::PublicHealthPost;
  hp.catchment_id.reset();
  hp.parent_hc_id = "HC1";
  b.facilities.push_back(hp);
  b.members.push_back(MemberRecord{"M1", "H1", "C1", MemberStatus::Active, Date{2024, 1, 5}, Scheme::CBHI});
  b.members.push_back(MemberRecord{"M2", "H1", "C1", MemberStatus::Unspecified, Date{2024, 7, 1}, Scheme::CBHI});
  for (int i = 1; i <= 3; ++i) {
    VisitRecord v;
    v.visit_id = "V" + std::to_string(i);
    v.facility_id = i == 3 ? "HC1-P1" : "HC1";
    v.member_id = i == 2 ? "M2" : "M1";
    v.visit_date = Date{2024, i, 10};
    v.patient_age_years = 3 * i;
    v.diagnosis_categories = {Diagnosis::UpperRespiratory, Diagnosis::Skin};
    v.admitted = i == 2;
    if (v.admitted) {
      v.admission_date = Date{2024, 2, 10};
      v.discharge_date = Date{2024, 2, 13};
    }
    CostItem c;
    c.kind = CostKind::Drug;
    c.item_code = "AMOX";
    c.is_antibiotic = true;
    c.quantity = 2;
    c.unit_cost = Money::parse("150.25");
    v.cost_items.push_back(c);
    v.recorded_copay_total = Money::from_rwf(200);
    b.visits.push_back(v);
  }
  b.code_map["AMOX"] = CodeFlags{true, false, false};
  return b;
}

}  // namespace

TEST_SUITE("bundle") {
  TEST_CASE("three-row fixture round trips") {
    const fs::path dir = scratch("tiny");
    const DatasetBundle b = tiny_bundle();
    const auto written = write_bundle(b, dir);
    REQUIRE(written.size() == 5);
    const DatasetBundle back = load_bundle(dir);
    CHECK(back.visits.size() == 3);
    CHECK(back.same_records(b));
    for (const auto& e : back.source_manifest)
      if (e.file == kVisitsFile) {
        CHECK(e.rows == 3);
        CHECK(e.rows_accepted == 3);
      }
    CHECK(back.quarantine.empty());
  }

  TEST_CASE("random bundles round trip") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      DatasetBundle b = testing::random_bundle(seed, {.max_health_centers = 6, .max_visits = 400});
      for (auto& v : b.visits)
        for (auto& c : v.cost_items) {
          const CodeFlags& f = b.code_map.emplace(c.item_code, CodeFlags{false, false, c.is_non_phc}).first->second;
          c.is_non_phc = f.is_non_phc;
        }
      const fs::path dir = scratch("random");
      write_bundle(b, dir);
      CHECK(load_bundle(dir, Config{.quarantine_fraction = 1.0}).same_records(b));
    }
  }

  TEST_CASE("unknown visit id in cost items is quarantined") {
    const fs::path dir = scratch("orphan");
    write_bundle(tiny_bundle(), dir);
    {
      std::string items = read_file(dir / kCostItemsFile);
      items += "V999,Drug,AMOX,1,10\n";
      write_file(dir / kCostItemsFile, items);
    }
    Config c;
    c.quarantine_fraction = 0.5;
    const DatasetBundle b = load_bundle(dir, c);
    REQUIRE(b.quarantine.size() == 1);
    CHECK(b.quarantine[0].record.find(kCostItemsFile) == 0);
    std::size_t items = 0;
    for (const auto& v : b.visits) items += v.cost_items.size();
    CHECK(items == 3);
    c.quarantine_fraction = 0.0;
    CHECK_THROWS_AS(load_bundle(dir, c), CapitaError);
  }

  TEST_CASE("missing file is named") {
    const fs::path dir = scratch("missing");
    write_bundle(tiny_bundle(), dir);
    fs::remove(dir / kMembersFile);
    try {
      load_bundle(dir);
      FAIL("expected MissingFile");
    } catch (const CapitaError& e) {
      CHECK(e.kind() == ErrorKind::MissingFile);
      CHECK(std::string(e.what()).find(kMembersFile) != std::string::npos);
    }
  }

  TEST_CASE("bad header is rejected") {
    const fs::path dir = scratch("header");
    write_bundle(tiny_bundle(), dir);
    write_file(dir / kMembersFile, "member_id,catchment\n");
    try {
      load_bundle(dir);
      FAIL("expected MalformedHeader");
    } catch (const CapitaError& e) {
      CHECK(e.kind() == ErrorKind::MalformedHeader);
    }
  }

  TEST_CASE("empty bundle writes header-only files") {
    const fs::path dir = scratch("empty");
    const auto m = write_bundle(DatasetBundle{}, dir);
    for (const auto& e : m) {
      CHECK(e.rows == 0);
      const std::string text = read_file(dir / e.file);
      CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    }
    CHECK(load_bundle(dir).visits.empty());
  }

  TEST_CASE("unwritable target raises IoError") {
    try {
      write_bundle(tiny_bundle(), "/dev/null/capita");
      FAIL("expected IoError");
    } catch (const CapitaError& e) {
      CHECK(e.kind() == ErrorKind::IoError);
    }
  }

  TEST_CASE("writing twice gives identical bytes") {
    const fs::path a = scratch("bytes_a"), b = scratch("bytes_b");
    const auto ma = write_bundle(tiny_bundle(), a);
    const auto mb = write_bundle(tiny_bundle(), b);
    CHECK(ma == mb);
  }

  TEST_CASE("sha256 known answer") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}

TEST_SUITE("validate") {
  TEST_CASE("empty dataset is clean") { CHECK(validate_dataset({}, {}, {}).clean()); }

  TEST_CASE("tiny fixture is clean") {
    const auto b = tiny_bundle();
    CHECK(validate_dataset(b.facilities, b.members, b.visits).clean());
  }

  TEST_CASE("unknown facility gives one finding") {
    auto b = tiny_bundle();
    b.visits[0].facility_id = "NOWHERE";
    const auto r = validate_dataset(b.facilities, b.members, b.visits);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].code == "DanglingFacilityKey");
    CHECK(r.findings[0].record == "V1");
  }

  TEST_CASE("discharge before admission") {
    auto b = tiny_bundle();
    b.visits[1].discharge_date = Date{2024, 2, 9};
    const auto r = validate_dataset(b.facilities, b.members, b.visits);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].code == "DateOrderViolation");
  }

  TEST_CASE("structural findings") {
    auto b = tiny_bundle();
    b.facilities[1].parent_hc_id.reset();
    b.facilities.push_back(b.facilities[0]);  // duplicate id
    b.visits[0].recorded_copay_total = Money::from_rwf(-1);
    b.visits[2].cost_items[0].quantity = 0;
    b.members[0].catchment_id = "C404";
    const auto r = validate_dataset(b.facilities, b.members, b.visits);
    std::set<std::string> codes;
    for (const auto& f : r.findings) codes.insert(f.code);
    CHECK(codes.count("MissingParent"));
    CHECK(codes.count("DuplicateFacilityId"));
    CHECK(codes.count("NegativeCopay"));
    CHECK(codes.count("NonPositiveQuantity"));
    CHECK(codes.count("DanglingCatchmentKey"));
  }

  TEST_CASE("report does not depend on input order") {
    auto b = testing::random_bundle(11, {.max_health_centers = 6, .max_visits = 300});
    const auto r1 = validate_dataset(b.facilities, b.members, b.visits);
    std::reverse(b.facilities.begin(), b.facilities.end());
    std::reverse(b.members.begin(), b.members.end());
    std::reverse(b.visits.begin(), b.visits.end());
    const auto r2 = validate_dataset(b.facilities, b.members, b.visits);
    CHECK(r1.findings == r2.findings);
  }
}
