// Acceptance suite: one PASS/FAIL line per criterion.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "capita/bundle.hpp"
#include "capita/calibration.hpp"
#include "capita/metrics.hpp"
#include "capita/monitoring.hpp"
#include "capita/payment.hpp"
#include "capita/segmentation.hpp"
#include "capita/stewardship.hpp"
#include "capita/synthgen.hpp"
#include "random_bundle.hpp"
#include "reference_metrics.hpp"

using namespace capita;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kExactRecoveryTol = 1e-6;
constexpr double kExactRecoverySeconds = 10.0;
constexpr double kNoisyRecoveryTol = 0.05;
constexpr int kNoisySeeds = 20;
constexpr double kCostNoise = 0.05;
constexpr int kSplits = 500;
constexpr double kHarnessSeconds = 60.0;
constexpr double kZeroNoiseRelSd = 1e-6;
constexpr double kFacilityNoise = 0.15;
constexpr double kBandLow = 0.002, kBandHigh = 0.2;
constexpr int kRandomBundles = 50;
constexpr std::int64_t kQuarterSumTolCents = 200;
constexpr double kOutlierFraction = 0.05;
constexpr double kOutlierFactor = 10.0;
constexpr double kBhattacharyyaThreshold = 0.223;
constexpr double kBinomialSigmas = 3.0;
constexpr double kTop8Target = 0.82;
constexpr double kTop8Tol = 0.02;

constexpr std::array<double, 4> kPlanted{912, 1278, 1562, 1126};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_rel_error(const std::array<double, 4>& p) {
  double e = 0;
  for (int k = 0; k < 4; ++k) e = std::max(e, std::abs(p[k] - kPlanted[k]) / kPlanted[k]);
  return e;
}

double l2_error(const std::array<double, 4>& p) {
  double s = 0;
  for (int k = 0; k < 4; ++k) s += (p[k] - kPlanted[k]) * (p[k] - kPlanted[k]);
  return std::sqrt(s);
}

struct Fitted {
  std::vector<DesignRow> rows;
  CapitationParams params;
};

Fitted fit_year(const DatasetBundle& b, const Period& year, FitMethod method = FitMethod::OLS) {
  const auto m = compute_metrics(b, year);
  const auto seg = segment(m.facilities);
  Fitted f;
  f.rows = build_design(m.facilities, seg);
  f.params = calibrate(m.facilities, seg, year, method);
  return f;
}

GeneratorSpec noisy_spec(std::uint64_t seed) {
  GeneratorSpec s;
  s.seed = seed;
  s.cost_noise_sd = kCostNoise;
  return s;
}

struct Context {
  fs::path work;
  fs::path capita;
  fs::path golden;
  bool write_golden = false;
};

// 1
Outcome exact_recovery(const Context& ctx) {
  const Generated g = generate(GeneratorSpec{});
  const fs::path dir = ctx.work / "c1";
  fs::remove_all(dir);
  write_bundle(g.bundle, dir);
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetBundle loaded = load_bundle(dir);
  const auto fitted = fit_year(loaded, g.truth.first_year);
  const double secs = seconds_since(t0);
  const double err = max_rel_error(fitted.params.vector());
  const auto p = fitted.params.vector();
  return {err < kExactRecoveryTol && secs < kExactRecoverySeconds,
          fmt("A=(%.6f, %.6f, %.6f) B=%.6f max rel err %.2e (tol %.0e); %zu visits, ingest to fit %.2f s (limit %.0f s)",
              p[0], p[1], p[2], p[3], err, kExactRecoveryTol, loaded.visits.size(), secs, kExactRecoverySeconds)};
}

// 2
Outcome noisy_recovery(const Context&) {
  double worst = 0;
  int passed = 0;
  for (int s = 0; s < kNoisySeeds; ++s) {
    const Generated g = generate(noisy_spec(1000 + s));
    const double e = max_rel_error(fit_year(g.bundle, g.truth.first_year).params.vector());
    worst = std::max(worst, e);
    passed += e < kNoisyRecoveryTol;
  }
  return {passed == kNoisySeeds, fmt("%d/%d seeds within %.0f%%; worst max rel err %.4f", passed, kNoisySeeds,
                                     100 * kNoisyRecoveryTol, worst)};
}

// 3
Outcome robustness(const Context&) {
  const Generated noisy = generate(noisy_spec(7));
  const auto rows = fit_year(noisy.bundle, noisy.truth.first_year).rows;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = robustness_harness(rows, kSplits, 0.8, 42);
  const double secs = seconds_since(t0);
  bool ok = secs < kHarnessSeconds;
  std::ostringstream d;
  d << fmt("%d splits in %.2f s;", kSplits, secs);
  for (int k = 0; k < 4; ++k) {
    const double sd = rep.sd[k];
    ok = ok && sd > 0 && std::abs(rep.mean[k] - rep.full_fit[k]) < sd;
    d << fmt(" p%d mean %.3f sd %.4f (sd/mean %.2e, |mean-full|/sd %.2f);", k, rep.mean[k], sd, sd / rep.mean[k],
             std::abs(rep.mean[k] - rep.full_fit[k]) / sd);
  }

  // Facility-level dispersion for the order-of-magnitude band around 2%.
  GeneratorSpec dispersed = noisy_spec(7);
  dispersed.facility_noise_sd = kFacilityNoise;
  const Generated spread = generate(dispersed);
  const auto band = robustness_harness(fit_year(spread.bundle, spread.truth.first_year).rows, kSplits, 0.8, 42);
  double band_lo = INFINITY, band_hi = 0;
  for (int k = 0; k < 4; ++k) {
    band_lo = std::min(band_lo, band.sd[k] / band.mean[k]);
    band_hi = std::max(band_hi, band.sd[k] / band.mean[k]);
  }
  ok = ok && band_lo >= kBandLow && band_hi <= kBandHigh;
  d << fmt(" with facility noise %.2f sd/mean in [%.4f, %.4f] (band [%.3f, %.1f]);", kFacilityNoise, band_lo, band_hi,
           kBandLow, kBandHigh);

  const Generated clean = generate(GeneratorSpec{});
  const auto clean_rows = fit_year(clean.bundle, clean.truth.first_year).rows;
  const auto zero = robustness_harness(clean_rows, kSplits, 0.8, 42);
  double worst = 0;
  for (int k = 0; k < 4; ++k) worst = std::max(worst, zero.sd[k] / zero.mean[k]);
  ok = ok && worst < kZeroNoiseRelSd;
  d << fmt(" zero-noise max sd/mean %.2e (limit %.0e)", worst, kZeroNoiseRelSd);
  return {ok, d.str()};
}

// 4
Outcome robust_regressors(const Context&) {
  const Generated g = generate(noisy_spec(11));
  const auto outliers =
      perturb(g.bundle, Scenario::parse(fmt("cost_outliers:%g:%g", kOutlierFraction, kOutlierFactor)), 11);
  const auto m = compute_metrics(outliers.bundle, g.truth.first_year);
  const auto seg = segment(m.facilities);
  const auto rows = build_design(m.facilities, seg);
  const double ols = l2_error(fit_ols(rows).vector());
  bool ok = true;
  std::ostringstream d;
  d << fmt("%zu outlier facilities; OLS L2 err %.2f;", outliers.affected.size(), ols);
  for (auto method : {FitMethod::Huber, FitMethod::RANSAC, FitMethod::TheilSen}) {
    const auto a = fit_robust(rows, method, 42).vector();
    const auto b = fit_robust(rows, method, 42).vector();
    const double e = l2_error(a);
    const bool same = std::memcmp(a.data(), b.data(), sizeof a) == 0;
    ok = ok && e < ols && same;
    d << fmt(" %s %.2f%s;", std::string(to_string(method)).c_str(), e, same ? "" : " (not reproducible)");
  }
  return {ok, d.str()};
}

// 5
// Money and counts must match exactly; rates are compared to 1e-12 relative
// because the reference multiplies by 12/months instead of dividing last.
bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

Outcome brute_force(const Context&) {
  int mismatched = 0;
  std::size_t facilities = 0, clamps = 0;
  for (int s = 0; s < kRandomBundles; ++s) {
    const DatasetBundle b = testing::random_bundle(5000 + s, {.max_health_centers = 12, .max_visits = 10000});
    const Period p = s % 2 ? Period::parse("2023-07:2024-06") : Period::parse("2024");
    const auto got = compute_metrics(b, p);
    const auto want = testing::reference_metrics(b, p);
    for (const auto& f : got.findings) clamps += f.code == "NegativeNetCost";
    bool same = got.facilities.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      const auto& x = got.facilities[i];
      const auto& y = want[i];
      same = x.facility_id == y.facility_id && x.period_cost.cents() == y.cost_cents &&
             x.annualized_cost.cents() == y.annualized_cost_cents && x.months_active == y.months_active &&
             x.member_count == y.members && x.catchment_visits_total == y.total && x.catchment_visits_own == y.own &&
             x.inflow_visits == y.inflow && x.unit_visits == y.unit && x.phc_visits == y.phc &&
             close(x.phc_utilization_rate, y.phc_utilization) && close(x.hc_utilization_rate_u, y.u) &&
             close(x.capture_ratio, y.capture) && close(x.inflow, y.inflow_annual);
    }
    facilities += want.size();
    mismatched += !same;
  }
  return {mismatched == 0, fmt("%d/%d bundles identical to the reference (%zu facilities, %zu clamped visits)",
                               kRandomBundles - mismatched, kRandomBundles, facilities, clamps)};
}

// 6
Outcome quarterly_algebra(const Context&) {
  GeneratorSpec s;
  s.stationary = true;
  const Generated g = generate(s);
  const Period year = g.truth.first_year;
  const auto m = compute_metrics(g.bundle, year);
  const auto seg = segment(m.facilities);
  const auto params = calibrate(m.facilities, seg, year);
  const Period fy{year.start.plus(12), year.end.plus(12)};
  const auto schedule = quarterly_schedule(params, g.bundle, fy);
  std::map<std::string, Money> summed;
  for (const auto& l : schedule.lines) summed[l.facility_id] += l.base_amount;
  std::int64_t worst = 0;
  std::size_t checked = 0;
  for (const auto& f : m.facilities) {
    const double U = f.member_count > 0 ? lookup_U(f.facility_id, seg) : 0.0;
    const Money annual = capitation_amount(params, seg.tier.count(f.facility_id) ? seg.tier.at(f.facility_id) : Tier::Low,
                                           U, static_cast<double>(f.member_count), f.inflow);
    worst = std::max(worst, std::abs((summed[f.facility_id] - annual).cents()));
    ++checked;
  }
  bool ok = worst <= kQuarterSumTolCents && checked == summed.size();

  // Constructed gaps around the threshold.
  CapitationParams unit;
  unit.b = 1;
  int wrong = 0, cases = 0;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    PaymentLine line;
    line.facility_id = "F";
    line.quarter = Period::parse("2025-Q1");
    const std::int64_t base = 10 * (1 + static_cast<std::int64_t>(rng() % 100000));  // multiple of 10 RWF
    line.base_amount = Money::from_rwf(base);
    const std::int64_t edge = base * 3 / 10;
    for (std::int64_t delta : {edge, -edge, edge + 1, -edge - 1, edge - 1}) {
      QuarterInputs in;
      in.I_q = static_cast<double>(base + delta);
      const bool expect = std::llabs(delta) > edge;
      wrong += reconcile(unit, line, in, 0.30).triggered != expect;
      ++cases;
    }
  }
  ok = ok && wrong == 0;
  return {ok, fmt("%zu facilities, worst |sum of quarters - annual| %.2f RWF (limit %.2f); %d/%d threshold cases wrong",
                  checked, static_cast<double>(worst) / 100, static_cast<double>(kQuarterSumTolCents) / 100, wrong,
                  cases)};
}

// 7
Outcome carry_forward(const Context&) {
  GeneratorSpec s;
  s.n_health_centers = 120;
  s.n_districts = 12;
  s.cost_noise_sd = kCostNoise;
  s.months = 36;
  s.start = Month{2022, 7};
  const Generated base = generate(s);
  const Period year = base.truth.first_year;
  const auto m = compute_metrics(base.bundle, year);
  const auto params = calibrate(m.facilities, segment(m.facilities), year);
  // Shocks in a few quarters so that some reconciliations trigger.
  DatasetBundle data = perturb(base.bundle, Scenario::parse("utilization_shift:1.6:2023-Q4")).bundle;
  data = perturb(data, Scenario::parse("inflow_shift:2.5:2024-Q2"), 2).bundle;

  Month last_month = data.visits.front().visit_date.month_of();
  for (const auto& v : data.visits) last_month = std::max(last_month, v.visit_date.month_of());

  PaymentLedger ledger(2);
  int triggered = 0;
  for (int fy_end : {2024, 2025}) {
    const Period fy = Period::parse("FY" + std::to_string(fy_end));
    const auto schedule = quarterly_schedule(params, data, fy);
    std::map<int, std::vector<PaymentLine>> by_quarter;
    for (const auto& l : schedule.lines) by_quarter[l.quarter.start.index()].push_back(l);
    for (auto& [q, lines] : by_quarter) {
      const Period quarter = lines.front().quarter;
      for (auto& l : lines) ledger.issue(l);
      if (quarter.end > last_month) continue;
      const auto realized = quarter_inputs(params, data, quarter, fy, Config{});
      for (const auto& l : lines) {
        auto it = realized.find(l.facility_id);
        if (it == realized.end() || l.base_amount.cents() == 0) continue;
        const auto r = reconcile(params, l, it->second, 0.30);
        triggered += r.triggered;
        ledger.record(r);
      }
    }
  }
  const Money lhs = ledger.total_final();
  const Money rhs = ledger.total_base() + ledger.total_triggered() - ledger.total_pending();
  return {lhs == rhs && triggered > 0,
          fmt("%zu lines, %d triggered; final %s = base %s + triggered %s - pending %s", ledger.lines().size(),
              triggered, lhs.to_string().c_str(), ledger.total_base().to_string().c_str(),
              ledger.total_triggered().to_string().c_str(), ledger.total_pending().to_string().c_str())};
}

// 8
Outcome monitoring(const Context&) {
  std::vector<double> ref{1, 2, 3, 4, 5, 6, 7, 8, 9, 100};
  std::vector<std::size_t> flagged;
  stats::Fences fences{};
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto c = iqr_check(std::vector<double>(ref.begin(), ref.begin() + 9), ref[i]);
    fences = c.fences;
    if (c.flagged) flagged.push_back(i);
  }
  bool ok = flagged == std::vector<std::size_t>{9} && fences.lower == -3.0 && fences.upper == 13.0;

  std::mt19937_64 g(8);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(240), b(240);
  for (auto& x : a) x = n(g);
  for (auto& x : b) x = 3.0 + n(g);
  const double same = bhattacharyya(a, a).distance;
  const double shifted = bhattacharyya(a, b).distance;
  ok = ok && same == 0.0 && shifted > kBhattacharyyaThreshold;
  return {ok, fmt("flagged %zu value(s), fences [%.1f, %.1f]; identical distance %.3g; 3-SD shift distance %.3f "
                  "(threshold %.3f)",
                  flagged.size(), fences.lower, fences.upper, same, shifted, kBhattacharyyaThreshold)};
}

// 9
Outcome stewardship(const Context&) {
  const Generated g = generate(GeneratorSpec{});
  const Cohort c = pediatric_single_category_cohort(g.bundle);
  bool ok = true;
  std::ostringstream d;
  for (const auto& r : pooled_antibiotic_rates(c)) {
    if (r.visits == 0) continue;
    const double p = g.truth.spec.abx_rates[static_cast<int>(r.category)];
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(r.visits));
    const double z = sigma > 0 ? std::abs(r.rate - p) / sigma : (r.rate == p ? 0 : INFINITY);
    ok = ok && z <= kBinomialSigmas;
    d << fmt("%s %.4f vs %.2f (z %.2f); ", std::string(to_string(r.category)).c_str(), r.rate, p, z);
  }
  const double top8 = top_share(antibiotic_shares(c).frequency, 8);
  ok = ok && std::abs(top8 - kTop8Target) <= kTop8Tol;
  d << fmt("top-8 frequency share %.4f (target %.2f +/- %.2f)", top8, kTop8Target, kTop8Tol);
  return {ok, d.str()};
}

// 10
std::string manifest_without_time(const fs::path& p) {
  auto j = nlohmann::ordered_json::parse(read_file(p));
  j.erase("wall_time_seconds");
  return j.dump();
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    out[rel] = e.path().filename() == "run_manifest.json" ? sha256_hex(manifest_without_time(e.path()))
                                                          : sha256_file(e.path());
  }
  return out;
}

bool run_pipeline(const fs::path& capita, const fs::path& dir, std::string& error) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string exe = "\"" + capita.string() + "\"";
  const std::string d = "\"" + dir.string() + "\"";
  const std::string data = d + "/data";
  const std::string params = d + "/calibrate/params.json";
  const std::vector<std::string> steps = {
      "synth --seed 42 --out " + data,
      "validate --in " + data + " --out " + d + "/validate",
      "metrics --in " + data + " --period 2023 --out " + d + "/metrics",
      "segment --in " + data + " --period 2023 --out " + d + "/segment",
      "calibrate --in " + data + " --period 2023 --out " + d + "/calibrate",
      "robustness --in " + data + " --period 2023 --splits 100 --out " + d + "/robustness",
      "pay --in " + data + " --period FY2025 --params " + params + " --out " + d + "/pay",
      "reconcile --in " + data + " --period FY2025 --params " + params + " --out " + d + "/reconcile",
      "compare --in " + data + " --period 2024 --params " + params + " --out " + d + "/compare",
      "monitor --in " + data + " --period 2024-12:2024-12 --reference 2024-01:2024-11 --params " + params +
          " --out " + d + "/monitor",
      "abx --in " + data + " --out " + d + "/abx",
  };
  for (const auto& s : steps) {
    const std::string cmd = exe + " " + s + " > " + d + "/log.txt 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      error = "step failed: " + s.substr(0, s.find(' '));
      fs::remove(dir / "log.txt");
      return false;
    }
  }
  fs::remove(dir / "log.txt");
  return true;
}

Outcome determinism(const Context& ctx) {
  // In-memory round trip.
  GeneratorSpec small;
  small.n_health_centers = 80;
  small.n_districts = 8;
  small.cost_noise_sd = kCostNoise;
  const Generated g = generate(small);
  const fs::path rt = ctx.work / "c10_roundtrip";
  fs::remove_all(rt);
  write_bundle(g.bundle, rt);
  const bool round_trip = load_bundle(rt).same_records(g.bundle);

  std::string err;
  if (!run_pipeline(ctx.capita, ctx.work / "c10_a", err) || !run_pipeline(ctx.capita, ctx.work / "c10_b", err))
    return {false, err};
  const auto a = tree_hashes(ctx.work / "c10_a");
  const auto b = tree_hashes(ctx.work / "c10_b");
  const bool repeat = a == b;

  std::ostringstream listing;
  for (const auto& [file, hash] : a) listing << hash << "  " << file << "\n";
  if (ctx.write_golden) write_file(ctx.golden, listing.str());
  std::size_t golden_diff = 0;
  std::string first_diff;
  if (!fs::exists(ctx.golden)) return {false, "golden file missing: " + ctx.golden.string()};
  std::map<std::string, std::string> golden;
  std::istringstream in(read_file(ctx.golden));
  for (std::string line; std::getline(in, line);)
    if (line.size() > 66) golden[line.substr(66)] = line.substr(0, 64);
  for (const auto& [file, hash] : golden) {
    auto it = a.find(file);
    if (it == a.end() || it->second != hash) {
      ++golden_diff;
      if (first_diff.empty()) first_diff = file;
    }
  }
  golden_diff += a.size() > golden.size() ? a.size() - golden.size() : 0;
  return {round_trip && repeat && golden_diff == 0,
          fmt("round trip %s; %zu output files, two runs %s; %zu differ from golden%s%s", round_trip ? "identical" : "DIFFERS",
              a.size(), repeat ? "identical" : "DIFFER", golden_diff, first_diff.empty() ? "" : " first: ",
              first_diff.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capita acceptance suite"};
  Context ctx;
  std::vector<int> only;
  app.add_option("--capita", ctx.capita, "path to the capita executable")->required();
  app.add_option("--golden", ctx.golden, "golden hash listing for the seed-42 pipeline")->required();
  app.add_option("--work", ctx.work, "scratch directory")->required();
  app.add_flag("--write-golden", ctx.write_golden, "rewrite the golden listing from this run");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria = {
      {"parameter recovery", exact_recovery},   {"noisy recovery", noisy_recovery},
      {"robustness harness", robustness},       {"robust regressors", robust_regressors},
      {"metrics brute force", brute_force},     {"quarterly algebra", quarterly_algebra},
      {"carry-forward conservation", carry_forward}, {"monitoring", monitoring},
      {"stewardship", stewardship},             {"determinism and round trip", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " ["
              << fmt("%.1f s", seconds_since(t0)) << "] " << o.detail << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failed ? 1 : 0;
}
