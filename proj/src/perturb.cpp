#include <algorithm>
#include <cmath>
#include <set>

#include "capita/metrics.hpp"
#include "capita/rng.hpp"
#include "capita/synthgen.hpp"

namespace capita {

namespace {

constexpr std::uint32_t kResampleStream = 0x52534d50;  // "RSMP"
constexpr std::uint32_t kOutlierStream = 0x4f55544c;   // "OUTL"

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

double number(const std::string& s, std::string_view text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw CapitaError(ErrorKind::UnknownScenario, "bad number '" + s + "' in scenario '" + std::string(text) + "'");
}

Money scaled(Money m, double factor) {
  return Money::from_cents(std::llround(static_cast<double>(m.cents()) * factor));
}

}  // namespace

Scenario Scenario::parse(std::string_view text) {
  const auto parts = split(text, ':');
  const std::string& name = parts[0];
  Scenario s;
  auto bad = [&](const std::string& why) {
    return CapitaError(ErrorKind::UnknownScenario, "scenario '" + std::string(text) + "': " + why);
  };
  if (name == "identity") {
    if (parts.size() != 1) throw bad("takes no arguments");
    return s;
  }
  if (name == "utilization_shift" || name == "inflow_shift") {
    if (parts.size() < 3 || parts.size() > 4) throw bad("expected " + name + ":FACTOR:QUARTER[:IDS]");
    s.kind = name == "utilization_shift" ? ScenarioKind::UtilizationShift : ScenarioKind::InflowShift;
    s.factor = number(parts[1], text);
    if (s.factor < 0) throw bad("factor must be non-negative");
    try {
      s.quarter = Period::parse(parts[2]);
    } catch (const std::invalid_argument& e) {
      throw bad(e.what());
    }
    if (s.quarter->months() != 3) throw bad("period must be a quarter");
    if (parts.size() == 4)
      for (auto& id : split(parts[3], ','))
        if (!id.empty()) s.facilities.push_back(id);
    return s;
  }
  if (name == "cost_outliers") {
    if (parts.size() != 3) throw bad("expected cost_outliers:FRACTION:FACTOR");
    s.kind = ScenarioKind::CostOutliers;
    s.fraction = number(parts[1], text);
    s.factor = number(parts[2], text);
    if (!(s.fraction > 0 && s.fraction <= 1)) throw bad("fraction must lie in (0, 1]");
    if (s.factor < 0) throw bad("factor must be non-negative");
    return s;
  }
  throw bad("unknown kind '" + name + "'");
}

PerturbResult perturb(const DatasetBundle& bundle, const Scenario& scenario, std::uint64_t seed) {
  PerturbResult out;
  out.bundle = bundle;
  if (scenario.kind == ScenarioKind::Identity) return out;
  const FacilityIndex index = FacilityIndex::build(bundle);

  if (scenario.kind == ScenarioKind::CostOutliers) {
    std::vector<std::string> hcs;
    for (const auto* f : index.health_centers) hcs.push_back(f->facility_id);
    Philox rng(seed, stream_id(kOutlierStream, 0));
    rng.shuffle(hcs);
    const auto k = std::min(hcs.size(), static_cast<std::size_t>(std::ceil(scenario.fraction * static_cast<double>(hcs.size()) - 1e-9)));
    std::set<std::string> chosen(hcs.begin(), hcs.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto& v : out.bundle.visits) {
      const std::string* unit = index.unit(v.facility_id);
      if (!unit || !chosen.count(*unit)) continue;
      for (auto& item : v.cost_items) item.unit_cost = scaled(item.unit_cost, scenario.factor);
      v.recorded_copay_total = scaled(v.recorded_copay_total, scenario.factor);
    }
    out.affected.assign(chosen.begin(), chosen.end());
    return out;
  }

  for (const auto& id : scenario.facilities)
    if (!index.facility.count(id) || index.facility.at(id)->kind != FacilityKind::HealthCenter)
      throw CapitaError(ErrorKind::UnknownFacility, "scenario names unknown Health Center '" + id + "'");
  const std::set<std::string> selected(scenario.facilities.begin(), scenario.facilities.end());
  const bool inflow_only = scenario.kind == ScenarioKind::InflowShift;
  const double whole = std::floor(scenario.factor);
  const double frac = scenario.factor - whole;

  std::set<std::string> affected;
  std::vector<VisitRecord> visits;
  visits.reserve(bundle.visits.size());
  for (std::size_t i = 0; i < bundle.visits.size(); ++i) {
    const VisitRecord& v = bundle.visits[i];
    const std::string* unit = index.unit(v.facility_id);
    bool target = v.approved && unit && scenario.quarter->contains(v.visit_date) &&
                  (selected.empty() || selected.count(*unit));
    if (target && inflow_only) {
      const std::string* home = index.home_hc(v);
      target = !home || *home != *unit;
    }
    if (!target) {
      visits.push_back(v);
      continue;
    }
    affected.insert(*unit);
    Philox rng(seed, stream_id(kResampleStream, static_cast<std::uint32_t>(i)));
    const int copies = static_cast<int>(whole) + (rng.bernoulli(frac) ? 1 : 0);
    for (int c = 0; c < copies; ++c) {
      visits.push_back(v);
      if (c > 0) visits.back().visit_id += "-D" + std::to_string(c);
    }
  }
  out.bundle.visits = std::move(visits);
  out.affected.assign(affected.begin(), affected.end());
  return out;
}

}  // namespace capita
