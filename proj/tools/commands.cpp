#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "capita/bundle.hpp"
#include "capita/calibration.hpp"
#include "capita/csv.hpp"
#include "capita/metrics.hpp"
#include "capita/monitoring.hpp"
#include "capita/params_io.hpp"
#include "capita/payment.hpp"
#include "capita/segmentation.hpp"
#include "capita/stewardship.hpp"
#include "capita/synthgen.hpp"
#include "capita/validate.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace capita::cli {

namespace {

struct Options {
  std::string in;
  std::string out = ".";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string period;
  std::string quarter;
  std::string method = "ols";
  std::optional<double> threshold;
  bool svg = false;
  std::string params;
  std::string spec;
  std::string scenario;
  std::string reference;
  std::optional<int> splits;
};

/// Thrown for bad flag values; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return csv::fmt(v, 6); }

void write_findings(csv::Writer& w, const std::string& source, const Findings& findings) {
  for (const auto& f : findings) w.cells(source, f.code, f.record, f.detail);
}

csv::Writer findings_writer() { return csv::Writer({"source", "code", "record", "detail"}); }

/// Collects outputs and writes run_manifest.json at the end.
class Run {
public:
  Run(std::string command, const Options& opt, Config config)
      : command_(std::move(command)), out_(opt.out), config_(std::move(config)),
        started_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw CapitaError(ErrorKind::IoError, "cannot create output directory " + out_.string());
  }

  const Config& config() const { return config_; }
  std::uint64_t seed() const { return seed_ ? *seed_ : config_.seed; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  void add(const std::string& name, const std::string& content) {
    write_file(out_ / name, content);
    outputs_.push_back({name, sha256_hex(content)});
  }
  void add_written(const std::string& name) { outputs_.push_back({name, sha256_file(out_ / name)}); }

  void inputs(const DatasetBundle& b) { inputs_ = b.source_manifest; }
  void input_file(const fs::path& p) { extra_inputs_.push_back({p.filename().string(), sha256_file(p)}); }
  void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }

  void finish() {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["config_hash"] = sha256_hex(config_.canonical_text());
    j["seed"] = seed();
    nlohmann::ordered_json in = nlohmann::ordered_json::array();
    for (const auto& e : inputs_)
      in.push_back({{"file", e.file}, {"rows", e.rows}, {"rows_accepted", e.rows_accepted}, {"sha256", e.sha256}});
    for (const auto& [file, hash] : extra_inputs_) in.push_back({{"file", file}, {"sha256", hash}});
    j["inputs"] = in;
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& [file, hash] : outputs_) out.push_back({{"file", file}, {"sha256", hash}});
    j["outputs"] = out;
    for (const auto& [k, v] : notes_) j["parameters"][k] = v;
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    j["wall_time_seconds"] = std::round(elapsed * 1000.0) / 1000.0;
    write_file(out_ / "run_manifest.json", j.dump(2) + "\n");
  }

private:
  std::string command_;
  fs::path out_;
  Config config_;
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point started_;
  std::vector<ManifestEntry> inputs_;
  std::vector<std::pair<std::string, std::string>> extra_inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  std::vector<std::pair<std::string, std::string>> notes_;
};

Config load_config(const Options& opt) {
  std::string path = opt.config;
  if (path.empty())
    if (const char* env = std::getenv("CAPITA_CONFIG"); env && *env) path = env;
  Config c = path.empty() ? Config{} : Config::from_file(path);
  if (opt.seed) c.seed = *opt.seed;
  return c;
}

Period parse_period(const std::string& text, const Config& c, const char* flag) {
  if (text.empty()) throw UsageError(std::string(flag) + " is required");
  try {
    return Period::parse(text, c.fiscal_year_anchor_month);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

Period fiscal_year_of(Month m, int anchor) {
  const int ending = anchor == 1 ? m.year : (m.month >= anchor ? m.year + 1 : m.year);
  return Period::fiscal_year(ending, anchor);
}

DatasetBundle load_input(const Options& opt, Run& run) {
  if (opt.in.empty()) throw UsageError("--in is required");
  DatasetBundle b = load_bundle(opt.in, run.config());
  run.inputs(b);
  if (!b.quarantine.empty()) std::cerr << "capita: " << b.quarantine.size() << " rows quarantined at load\n";
  return b;
}

CapitationParams load_params(const Options& opt, Run& run) {
  fs::path p = opt.params;
  if (p.empty()) {
    if (!opt.in.empty() && fs::exists(fs::path(opt.in) / "params.json"))
      p = fs::path(opt.in) / "params.json";
    else
      p = fs::path(opt.out) / "params.json";
  }
  if (!fs::exists(p)) throw UsageError("no calibration found; pass --params or run calibrate first");
  run.input_file(p);
  return params_from_json(read_file(p));
}

FitMethod parse_method(const std::string& text) {
  const auto m = parse_fit_method(text);
  if (!m) throw UsageError("--method must be one of ols, huber, ransac, theilsen");
  return *m;
}

std::string metrics_csv(const MetricsResult& m) {
  csv::Writer w({"facility_id", "district_id", "province_id", "medicalized", "months_active", "member_count",
                 "catchment_visits_total", "catchment_visits_own", "inflow_visits", "unit_visits", "phc_visits",
                 "period_cost", "annualized_cost", "phc_utilization_rate", "hc_utilization_rate_u", "capture_ratio",
                 "inflow"});
  for (const auto& f : m.facilities)
    w.cells(f.facility_id, f.district_id, f.province_id, std::string(f.medicalized ? "true" : "false"),
            std::to_string(f.months_active), std::to_string(f.member_count), std::to_string(f.catchment_visits_total),
            std::to_string(f.catchment_visits_own), std::to_string(f.inflow_visits), std::to_string(f.unit_visits),
            std::to_string(f.phc_visits), f.period_cost.to_string(), f.annualized_cost.to_string(),
            fmt(f.phc_utilization_rate), fmt(f.hc_utilization_rate_u), fmt(f.capture_ratio), fmt(f.inflow));
  return w.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& opt, Run& run) {
  GeneratorSpec spec;
  bool spec_seed = false;
  if (!opt.spec.empty()) {
    const KeyValues kv = read_key_values(opt.spec);
    spec = GeneratorSpec::from_key_values(kv);
    spec_seed = kv.count("seed") > 0;
    run.input_file(opt.spec);
  }
  if (opt.seed)
    spec.seed = *opt.seed;
  else if (!spec_seed)
    spec.seed = run.config().seed;
  spec.validate();
  run.set_seed(spec.seed);
  Generated g = generate(spec);
  DatasetBundle bundle = std::move(g.bundle);
  if (!opt.scenario.empty()) {
    PerturbResult p = perturb(bundle, Scenario::parse(opt.scenario), spec.seed);
    bundle = std::move(p.bundle);
    run.note("scenario", opt.scenario);
    std::cerr << "capita: scenario touched " << p.affected.size() << " Health Centers\n";
  }
  for (const auto& e : write_bundle(bundle, opt.out)) run.add_written(e.file);
  run.add("ground_truth.json", g.truth.to_json());
  std::string kv;
  for (const auto& [k, v] : spec.to_key_values()) kv += k + " = " + v + "\n";
  run.add("generator_spec.txt", kv);
  std::cerr << "capita: generated " << bundle.facilities.size() << " facilities, " << bundle.members.size()
            << " members, " << bundle.visits.size() << " visits\n";
  return 0;
}

int cmd_validate(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const ValidationReport r = validate_dataset(b.facilities, b.members, b.visits);
  csv::Writer w = findings_writer();
  write_findings(w, "load", b.quarantine);
  write_findings(w, "note", b.notes);
  write_findings(w, "validation", r.findings);
  run.add("validation.csv", w.str());
  std::cerr << "capita: " << r.findings.size() << " validation findings\n";
  return 0;
}

int cmd_metrics(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Period p = parse_period(opt.period, run.config(), "--period");
  run.note("period", p.label());
  const MetricsResult m = compute_metrics(b, p, run.config().ambulance_copay_rate);
  run.add("metrics.csv", metrics_csv(m));
  csv::Writer w = findings_writer();
  write_findings(w, "metrics", m.findings);
  run.add("metrics_findings.csv", w.str());
  return 0;
}

struct Segmented {
  MetricsResult metrics;
  SegmentationResult segmentation;
};

Segmented segment_input(const Options& opt, Run& run, const DatasetBundle& b, const Period& p) {
  Segmented s;
  s.metrics = compute_metrics(b, p, run.config().ambulance_copay_rate);
  s.segmentation = segment(s.metrics.facilities, run.config().capture_group_count);
  return s;
}

int cmd_segment(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Period p = parse_period(opt.period, run.config(), "--period");
  run.note("period", p.label());
  const Segmented s = segment_input(opt, run, b, p);
  const auto& seg = s.segmentation;
  csv::Writer w({"facility_id", "tier", "capture_group", "phc_utilization_rate", "capture_ratio",
                 "hc_utilization_rate_u", "U"});
  for (const auto& f : s.metrics.facilities) {
    if (!seg.contains(f.facility_id)) continue;
    w.cells(f.facility_id, std::string(to_string(seg.tier.at(f.facility_id))),
            std::to_string(seg.capture_group.at(f.facility_id)), fmt(f.phc_utilization_rate), fmt(f.capture_ratio),
            fmt(f.hc_utilization_rate_u), fmt(lookup_U(f.facility_id, seg)));
  }
  run.add("segmentation.csv", w.str());
  csv::Writer g({"kind", "group", "lo", "hi", "count", "median_u"});
  for (std::size_t t = 0; t < seg.tier_ranges.size(); ++t)
    g.cells(std::string("tier"), std::string(to_string(static_cast<Tier>(t))), fmt(seg.tier_ranges[t].lo),
            fmt(seg.tier_ranges[t].hi), std::to_string(seg.tier_ranges[t].count), std::string());
  for (std::size_t k = 0; k < seg.capture_group_ranges.size(); ++k)
    g.cells(std::string("capture_group"), std::to_string(k + 1), fmt(seg.capture_group_ranges[k].lo),
            fmt(seg.capture_group_ranges[k].hi), std::to_string(seg.capture_group_ranges[k].count),
            fmt(seg.group_median_u[k]));
  run.add("segmentation_groups.csv", g.str());
  csv::Writer fw = findings_writer();
  write_findings(fw, "metrics", s.metrics.findings);
  write_findings(fw, "segmentation", seg.findings);
  run.add("segmentation_findings.csv", fw.str());
  return 0;
}

int cmd_calibrate(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Period p = parse_period(opt.period, run.config(), "--period");
  const FitMethod method = parse_method(opt.method);
  run.note("period", p.label());
  run.note("method", std::string(to_string(method)));
  const Segmented s = segment_input(opt, run, b, p);
  const CapitationParams params = calibrate(s.metrics.facilities, s.segmentation, p, method, run.seed());
  run.add("params.json", params_to_json(params));
  const auto rows = build_design(s.metrics.facilities, s.segmentation);
  csv::Writer w({"facility_id", "y", "x_low", "x_med", "x_high", "x_inflow", "prediction", "pct_deviation"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double dev = i < params.diagnostics.pct_deviation.size() ? params.diagnostics.pct_deviation[i] : 0.0;
    w.cells(r.facility_id, fmt(r.y), fmt(r.x_low), fmt(r.x_med), fmt(r.x_high), fmt(r.x_inflow),
            fmt(params.predict(r)), fmt(dev));
  }
  run.add("design.csv", w.str());
  std::cerr << "capita: A_low=" << fmt(params.a_low) << " A_med=" << fmt(params.a_med) << " A_high=" << fmt(params.a_high)
            << " B=" << fmt(params.b) << " R2=" << fmt(params.diagnostics.r2) << "\n";
  return 0;
}

int cmd_robustness(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Period p = parse_period(opt.period, run.config(), "--period");
  const FitMethod method = parse_method(opt.method);
  const int splits = opt.splits ? *opt.splits : run.config().robustness_splits;
  if (splits < 1) throw UsageError("--splits must be positive");
  run.note("period", p.label());
  run.note("method", std::string(to_string(method)));
  run.note("splits", std::to_string(splits));
  const Segmented s = segment_input(opt, run, b, p);
  const auto rows = build_design(s.metrics.facilities, s.segmentation);
  const RobustnessReport r = robustness_harness(rows, splits, run.config().train_fraction, run.seed(),
                                                run.config().payment_tolerance, method);
  csv::Writer w({"split", "a_low", "a_med", "a_high", "b", "test_rows", "overpaid", "underpaid"});
  for (std::size_t i = 0; i < r.splits.size(); ++i) {
    const auto& sp = r.splits[i];
    w.cells(std::to_string(i), fmt(sp.params[0]), fmt(sp.params[1]), fmt(sp.params[2]), fmt(sp.params[3]),
            std::to_string(sp.test_rows), std::to_string(sp.overpaid), std::to_string(sp.underpaid));
  }
  run.add("robustness_splits.csv", w.str());
  const char* names[] = {"a_low", "a_med", "a_high", "b"};
  csv::Writer sw({"parameter", "mean", "sd", "min", "max", "full_fit"});
  for (int k = 0; k < 4; ++k)
    sw.cells(std::string(names[k]), fmt(r.mean[k]), fmt(r.sd[k]), fmt(r.min[k]), fmt(r.max[k]), fmt(r.full_fit[k]));
  sw.cells(std::string("mean_model_overpaid"), std::to_string(r.mean_model_overpaid), std::string(), std::string(),
           std::string(), std::string());
  sw.cells(std::string("mean_model_underpaid"), std::to_string(r.mean_model_underpaid), std::string(), std::string(),
           std::string(), std::string());
  run.add("robustness_summary.csv", sw.str());
  if (opt.svg) {
    std::vector<svg::Box> boxes;
    for (int k = 0; k < 4; ++k) {
      std::vector<double> v;
      for (const auto& sp : r.splits) v.push_back(sp.params[k]);
      boxes.push_back({names[k], stats::box_summary(v)});
    }
    run.add("robustness.svg", svg::boxplot("Parameter estimates across splits", boxes, "RWF"));
  }
  return 0;
}

std::string payments_csv(const std::vector<PaymentLine>& lines) {
  csv::Writer w({"facility_id", "quarter", "tier", "capture_group", "U", "M", "I_q", "base_amount",
                 "carried_adjustment", "final_amount"});
  for (const auto& l : lines)
    w.cells(l.facility_id, l.quarter.label(), std::string(to_string(l.inputs.tier)),
            std::to_string(l.inputs.capture_group), fmt(l.inputs.U), std::to_string(l.inputs.M), fmt(l.inputs.I_q),
            l.base_amount.to_string(), l.carried_adjustment.to_string(), l.final_amount.to_string());
  return w.str();
}

std::string reconciliation_csv(const std::vector<ReconciliationResult>& rs) {
  csv::Writer w({"facility_id", "quarter", "predicted_prior", "predicted_current", "relative_gap", "triggered",
                 "carry_forward_delta"});
  for (const auto& r : rs)
    w.cells(r.facility_id, r.quarter.label(), r.predicted_prior.to_string(), r.predicted_current.to_string(),
            fmt(r.relative_gap), std::string(r.triggered ? "true" : "false"), r.carry_forward_delta.to_string());
  return w.str();
}

int cmd_pay(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const CapitationParams params = load_params(opt, run);
  const Period fy = parse_period(opt.period, run.config(), "--period");
  if (fy.months() != 12) throw UsageError("--period must be a twelve-month fiscal year");
  run.note("period", fy.label());
  const Schedule s = quarterly_schedule(params, b, fy, run.config());
  run.add("payments.csv", payments_csv(s.lines));
  csv::Writer w = findings_writer();
  write_findings(w, "payment", s.findings);
  run.add("payment_findings.csv", w.str());
  return 0;
}

std::vector<ReconciliationResult> reconcile_quarter(const CapitationParams& params, const DatasetBundle& b,
                                                    const std::vector<PaymentLine>& lines, const Period& q,
                                                    const Period& fy, const Config& c, double threshold,
                                                    Findings& findings) {
  const auto realized = quarter_inputs(params, b, q, fy, c, &findings);
  std::vector<ReconciliationResult> out;
  for (const auto& l : lines) {
    if (!(l.quarter == q)) continue;
    auto it = realized.find(l.facility_id);
    if (it == realized.end()) continue;
    try {
      out.push_back(reconcile(params, l, it->second, threshold));
    } catch (const CapitaError& e) {
      if (e.kind() != ErrorKind::ZeroBase) throw;
      findings.push_back(Finding{"ZeroBase", l.facility_id, q.label()});
    }
  }
  return out;
}

int cmd_reconcile(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const CapitationParams params = load_params(opt, run);
  const Config& c = run.config();
  const double threshold = opt.threshold ? *opt.threshold : c.adjustment_threshold;
  run.note("threshold", fmt(threshold));
  Findings findings;
  if (!opt.quarter.empty()) {
    const Period q = parse_period(opt.quarter, c, "--quarter");
    if (q.months() != 3) throw UsageError("--quarter must be a quarter");
    run.note("quarter", q.label());
    const Period fy = fiscal_year_of(q.start, c.fiscal_year_anchor_month);
    const Schedule s = quarterly_schedule(params, b, fy, c);
    findings = s.findings;
    run.add("reconciliation.csv", reconciliation_csv(reconcile_quarter(params, b, s.lines, q, fy, c, threshold, findings)));
  } else {
    const Period fy = parse_period(opt.period, c, "--period or --quarter");
    if (fy.months() != 12) throw UsageError("--period must be a twelve-month fiscal year");
    run.note("period", fy.label());
    const Schedule s = quarterly_schedule(params, b, fy, c);
    findings = s.findings;
    PaymentLedger ledger(c.carry_split);
    for (const Period& q : fy.quarters()) {
      for (const auto& l : s.lines)
        if (l.quarter == q) ledger.issue(l);
      std::vector<ReconciliationResult> rs;
      try {
        rs = reconcile_quarter(params, b, s.lines, q, fy, c, threshold, findings);
      } catch (const CapitaError& e) {
        if (e.kind() != ErrorKind::MissingPriorQuarter) throw;
        findings.push_back(Finding{"QuarterNotRealized", q.label(), e.what()});
      }
      for (const auto& r : rs) ledger.record(r);
    }
    run.add("ledger.csv", payments_csv(ledger.lines()));
    run.add("reconciliation.csv", reconciliation_csv(ledger.reconciliations()));
    csv::Writer t({"total_base", "total_final", "total_triggered", "total_pending"});
    t.cells(ledger.total_base().to_string(), ledger.total_final().to_string(), ledger.total_triggered().to_string(),
            ledger.total_pending().to_string());
    run.add("ledger_summary.csv", t.str());
  }
  csv::Writer w = findings_writer();
  write_findings(w, "reconcile", findings);
  run.add("reconcile_findings.csv", w.str());
  return 0;
}

int cmd_compare(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const CapitationParams params = load_params(opt, run);
  const Period p = parse_period(opt.period, run.config(), "--period");
  const double tol = opt.threshold ? *opt.threshold : run.config().payment_tolerance;
  run.note("period", p.label());
  const MetricsResult m = compute_metrics(b, p, run.config().ambulance_copay_rate);
  const HistoryComparison h = compare_to_history(params, m.facilities, tol);
  csv::Writer w({"facility_id", "predicted", "historical", "variation"});
  for (const auto& r : h.rows) w.cells(r.facility_id, r.predicted.to_string(), r.historical.to_string(), fmt(r.variation));
  run.add("history_comparison.csv", w.str());
  csv::Writer hw({"lo", "hi", "count"});
  for (const auto& bin : h.histogram) hw.cells(fmt(bin.lo), fmt(bin.hi), std::to_string(bin.count));
  run.add("history_histogram.csv", hw.str());
  csv::Writer sw({"facilities", "tolerance", "underpaid", "overpaid", "within", "below_zero"});
  sw.cells(std::to_string(h.rows.size()), fmt(h.tolerance), std::to_string(h.underpaid), std::to_string(h.overpaid),
           std::to_string(h.within), std::to_string(h.below_zero));
  run.add("history_summary.csv", sw.str());
  csv::Writer fw = findings_writer();
  write_findings(fw, "compare", h.findings);
  run.add("history_findings.csv", fw.str());
  if (opt.svg) {
    std::vector<svg::Bin> bins;
    for (const auto& bin : h.histogram) bins.push_back({bin.lo * 100, bin.hi * 100, static_cast<double>(bin.count)});
    run.add("history_variation.svg",
            svg::histogram("Capitation versus historical cost", bins, "variation from historical cost (%)"));
  }
  return 0;
}

int cmd_monitor(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Config& c = run.config();
  const Period p = parse_period(opt.period, c, "--period");
  const double bt = opt.threshold ? *opt.threshold : c.bhattacharyya_threshold;
  run.note("period", p.label());
  const auto rows = compute_indicators(b, p, c);
  std::vector<std::string> header{"facility_id", "district_id", "province_id", "month"};
  for (int k = 0; k < kIndicatorCount; ++k) header.emplace_back(to_string(static_cast<Indicator>(k)));
  csv::Writer w(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.facility_id, r.district_id, r.province_id, r.month.to_string()};
    for (const auto& v : r.values) cells.push_back(v ? fmt(*v) : std::string());
    w.row(cells);
  }
  run.add("indicators.csv", w.str());

  csv::Writer fw({"facility_id", "indicator", "flag_type", "month", "statistic", "reference"});
  csv::Writer findings = findings_writer();
  for (const FlagResult& res : {iqr_flags(rows, FlagType::SelfHistory, c.iqr_multiplier),
                                iqr_flags(rows, FlagType::DistrictMonth, c.iqr_multiplier),
                                bhattacharyya_flags(rows, c.bhattacharyya_bins, bt)}) {
    for (const auto& f : res.flags)
      fw.cells(f.facility_id, std::string(to_string(f.indicator)), std::string(to_string(f.flag_type)),
               f.month ? f.month->to_string() : std::string(), fmt(f.statistic), f.reference_summary());
    write_findings(findings, "monitor", res.findings);
  }
  run.add("monitor_flags.csv", fw.str());

  if (!opt.reference.empty()) {
    const CapitationParams params = load_params(opt, run);
    const Period ref = parse_period(opt.reference, c, "--reference");
    run.note("reference", ref.label());
    Findings ffs_findings;
    const auto gaps = decompose_ffs_gaps(params, b, ref, p, c, &ffs_findings);
    csv::Writer gw({"facility_id", "period", "capitation", "ffs_reference", "ffs_current", "total_gap", "band_low",
                    "band_high", "utilization_component", "cost_per_visit_component", "residual"});
    for (const auto& g : gaps)
      gw.cells(g.facility_id, g.period.label(), g.capitation.to_string(), g.ffs_reference.to_string(),
               g.ffs_current.to_string(), g.total_gap.to_string(), g.band_low.to_string(), g.band_high.to_string(),
               g.utilization_component.to_string(), g.cost_per_visit_component.to_string(), g.residual.to_string());
    run.add("ffs_gaps.csv", gw.str());
    write_findings(findings, "ffs", ffs_findings);
  }
  run.add("monitor_findings.csv", findings.str());
  return 0;
}

Period data_range(const DatasetBundle& b) {
  if (b.visits.empty()) throw CapitaError(ErrorKind::ZeroActivity, "bundle has no visits");
  Month lo = b.visits.front().visit_date.month_of(), hi = lo;
  for (const auto& v : b.visits) {
    lo = std::min(lo, v.visit_date.month_of());
    hi = std::max(hi, v.visit_date.month_of());
  }
  return Period{lo, hi, Granularity::Custom};
}

std::string shares_csv(const std::vector<ShareRow>& rows) {
  csv::Writer w({"rank", "code", "amount", "share"});
  for (std::size_t i = 0; i < rows.size(); ++i)
    w.cells(std::to_string(i + 1), rows[i].code, fmt(rows[i].amount), fmt(rows[i].share));
  return w.str();
}

std::string pooled_csv(const std::vector<PooledRate>& rates) {
  csv::Writer w({"category", "visits", "flagged", "rate"});
  for (const auto& r : rates)
    w.cells(std::string(to_string(r.category)), std::to_string(r.visits), std::to_string(r.flagged), fmt(r.rate));
  return w.str();
}

int cmd_abx(const Options& opt, Run& run) {
  const DatasetBundle b = load_input(opt, run);
  const Config& c = run.config();
  const Period p = opt.period.empty() ? data_range(b) : parse_period(opt.period, c, "--period");
  run.note("period", p.label());
  CohortFilter filter;
  filter.age_cutoff = c.pediatric_age_cutoff;
  filter.period = p;
  const Cohort cohort = pediatric_single_category_cohort(b, filter);
  const auto& comp = cohort.composition;

  const RateReport rates = prescription_rate_by_category(cohort, static_cast<std::size_t>(c.min_category_visits));
  csv::Writer rw({"facility_id", "category", "visits", "flagged", "rate"});
  for (const auto& r : rates.rates)
    rw.cells(r.facility_id, std::string(to_string(r.category)), std::to_string(r.visits), std::to_string(r.flagged),
             fmt(r.rate));
  run.add("abx_rates.csv", rw.str());
  csv::Writer bw({"category", "n", "min", "q1", "median", "q3", "max", "whisker_low", "whisker_high", "outliers"});
  for (int k = 0; k < kDiagnosisCount; ++k) {
    if (!rates.box[k]) continue;
    const auto& s = *rates.box[k];
    bw.cells(std::string(to_string(static_cast<Diagnosis>(k))), std::to_string(s.n), fmt(s.min), fmt(s.q1),
             fmt(s.median), fmt(s.q3), fmt(s.max), fmt(s.whisker_low), fmt(s.whisker_high),
             std::to_string(s.outliers.size()));
  }
  run.add("abx_rate_boxes.csv", bw.str());
  run.add("abx_pooled_rates.csv", pooled_csv(pooled_antibiotic_rates(cohort)));
  run.add("antihistamine_rates.csv", pooled_csv(antihistamine_rates(cohort)));

  nlohmann::ordered_json summary;
  summary["period"] = p.label();
  summary["pediatric_visits"] = comp.pediatric_visits;
  summary["one_category"] = comp.one_category;
  summary["two_categories"] = comp.two_categories;
  summary["other"] = comp.other;
  summary["one_category_share"] = comp.share(comp.one_category);
  summary["two_categories_share"] = comp.share(comp.two_categories);
  summary["other_share"] = comp.share(comp.other);

  csv::Writer findings = findings_writer();
  write_findings(findings, "abx", rates.findings);
  const auto top = static_cast<std::size_t>(c.top_antibiotics);
  std::optional<AntibioticShares> shares;
  try {
    shares = antibiotic_shares(cohort);
  } catch (const CapitaError& e) {
    if (e.kind() != ErrorKind::EmptyAntibioticSet) throw;
    findings.cells(std::string("abx"), std::string("EmptyAntibioticSet"), std::string(), std::string(e.what()));
  }
  if (shares) {
    run.add("abx_frequency_shares.csv", shares_csv(shares->frequency));
    run.add("abx_cost_shares.csv", shares_csv(shares->cost));
    summary["total_prescriptions"] = shares->total_prescriptions;
    summary["total_cost_rwf"] = shares->total_cost;
    summary["top_frequency_share"] = top_share(shares->frequency, top);
    summary["top_cost_share"] = top_share(shares->cost, top);
    nlohmann::ordered_json topcodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < std::min(top, shares->frequency.size()); ++i) topcodes.push_back(shares->frequency[i].code);
    summary["top_frequency_codes"] = topcodes;

    try {
      const auto cpv = facility_cost_per_visit(b, p, c.ambulance_copay_rate);
      const auto groups = cost_group_breakdown(cohort, cpv, c.cost_groups);
      csv::Writer gw({"group", "cost_per_visit_lo", "cost_per_visit_hi", "facilities", "code", "amount", "share"});
      for (const auto& g : groups)
        for (const auto& r : g.cost_shares)
          gw.cells(std::to_string(g.group), fmt(g.lo), fmt(g.hi), std::to_string(g.facility_ids.size()), r.code,
                   fmt(r.amount), fmt(r.share));
      run.add("abx_cost_groups.csv", gw.str());
      if (opt.svg) {
        std::vector<std::string> cats;
        std::vector<svg::Series> series;
        std::vector<std::string> codes;
        for (std::size_t i = 0; i < std::min(top, shares->cost.size()); ++i) codes.push_back(shares->cost[i].code);
        for (const auto& code : codes) series.push_back({code, {}});
        series.push_back({"Other", {}});
        for (const auto& g : groups) {
          cats.push_back("Group " + std::to_string(g.group));
          std::vector<double> v(codes.size() + 1, 0.0);
          for (const auto& r : g.cost_shares) {
            auto it = std::find(codes.begin(), codes.end(), r.code);
            v[it == codes.end() ? codes.size() : static_cast<std::size_t>(it - codes.begin())] += r.share;
          }
          for (std::size_t k = 0; k < v.size(); ++k) series[k].values.push_back(v[k]);
        }
        run.add("abx_cost_groups.svg",
                svg::stacked("Antibiotic cost shares by facility cost group", cats, series, "share of cost"));
      }
    } catch (const CapitaError& e) {
      if (e.kind() != ErrorKind::TooFewFacilities) throw;
      findings.cells(std::string("abx"), std::string("TooFewFacilities"), std::string(), std::string(e.what()));
    }
    if (opt.svg) {
      auto to_bars = [&](const std::vector<ShareRow>& rows) {
        std::vector<svg::Bar> out;
        for (const auto& r : top_with_other(rows, top)) out.push_back({r.code, r.share});
        return out;
      };
      run.add("abx_frequency_shares.svg", svg::bars("Antibiotic prescriptions by product", to_bars(shares->frequency),
                                                    "share of prescriptions"));
      run.add("abx_cost_shares.svg", svg::bars("Antibiotic cost by product", to_bars(shares->cost), "share of cost"));
    }
  }
  if (opt.svg) {
    std::vector<svg::Box> boxes;
    for (int k = 0; k < kDiagnosisCount; ++k)
      boxes.push_back({std::string(to_string(static_cast<Diagnosis>(k))),
                       rates.box[k] ? *rates.box[k] : stats::BoxSummary{}});
    run.add("abx_rates.svg",
            svg::boxplot("Pediatric antibiotic prescription rate by diagnosis", boxes, "share of visits"));
  }
  run.add("abx_summary.json", summary.dump(2) + "\n");
  run.add("abx_findings.csv", findings.str());
  return 0;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnknownScenario:
      return 2;
    default: return 1;
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Capitation payment engine for community health insurance claims", "capita"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input) sub->add_option("--in", opt.in, "input bundle directory")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--config", opt.config, "key=value config file (fallback: $CAPITA_CONFIG)");
    sub->add_option("--seed", opt.seed, "random seed");
  };
  using Handler = int (*)(const Options&, Run&);
  std::vector<std::pair<CLI::App*, Handler>> handlers;
  auto sub = [&](const char* name, const char* help, Handler h, bool needs_input = true) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, needs_input);
    handlers.emplace_back(s, h);
    return s;
  };

  auto* synth = sub("synth", "generate a synthetic bundle with planted ground truth", cmd_synth, false);
  synth->add_option("--spec", opt.spec, "generator spec file (key=value)");
  synth->add_option("--scenario", opt.scenario, "perturbation, e.g. utilization_shift:1.5:2024-Q3");
  sub("validate", "load and validate a bundle", cmd_validate);
  sub("metrics", "per-Health-Center capitation metrics", cmd_metrics)->add_option("--period", opt.period);
  sub("segment", "utilization tiers and capture-ratio groups", cmd_segment)->add_option("--period", opt.period);
  auto* cal = sub("calibrate", "fit the capitation parameters", cmd_calibrate);
  cal->add_option("--period", opt.period);
  cal->add_option("--method", opt.method, "ols|huber|ransac|theilsen");
  auto* rob = sub("robustness", "repeated train/test split harness", cmd_robustness);
  rob->add_option("--period", opt.period);
  rob->add_option("--method", opt.method, "ols|huber|ransac|theilsen");
  rob->add_option("--splits", opt.splits, "number of splits (default from config)");
  rob->add_flag("--svg", opt.svg, "emit SVG charts");
  auto* pay = sub("pay", "quarterly payment schedule for a fiscal year", cmd_pay);
  pay->add_option("--period", opt.period, "fiscal year, e.g. FY2025");
  pay->add_option("--params", opt.params, "params.json from calibrate");
  auto* rec = sub("reconcile", "reconcile quarterly payments against realized data", cmd_reconcile);
  rec->add_option("--quarter", opt.quarter, "single quarter, e.g. 2024-Q3");
  rec->add_option("--period", opt.period, "fiscal year ledger simulation");
  rec->add_option("--params", opt.params, "params.json from calibrate");
  rec->add_option("--threshold", opt.threshold, "relative gap that triggers an adjustment");
  auto* cmp = sub("compare", "capitation versus historical cost", cmd_compare);
  cmp->add_option("--period", opt.period);
  cmp->add_option("--params", opt.params, "params.json from calibrate");
  cmp->add_option("--threshold", opt.threshold, "over/under payment tolerance");
  cmp->add_flag("--svg", opt.svg, "emit SVG charts");
  auto* mon = sub("monitor", "monthly indicators and outlier flags", cmd_monitor);
  mon->add_option("--period", opt.period);
  mon->add_option("--threshold", opt.threshold, "Bhattacharyya distance threshold");
  mon->add_option("--reference", opt.reference, "reference period for the FFS gap decomposition");
  mon->add_option("--params", opt.params, "params.json from calibrate");
  auto* abx = sub("abx", "pediatric antibiotic stewardship report", cmd_abx);
  abx->add_option("--period", opt.period);
  abx->add_flag("--svg", opt.svg, "emit SVG charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "capita: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  for (auto& [s, handler] : handlers) {
    if (!s->parsed()) continue;
    try {
      Run run(s->get_name(), opt, load_config(opt));
      const int code = handler(opt, run);
      run.finish();
      return code;
    } catch (const UsageError& e) {
      std::cerr << "capita " << s->get_name() << ": " << e.what() << "\n";
      return 2;
    } catch (const CapitaError& e) {
      std::cerr << "capita " << s->get_name() << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
      return exit_code_for(e.kind());
    } catch (const std::exception& e) {
      std::cerr << "capita " << s->get_name() << ": " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}

}  // namespace capita::cli
