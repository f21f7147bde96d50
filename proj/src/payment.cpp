#include "capita/payment.hpp"

#include <algorithm>
#include <cmath>

namespace capita {

namespace {

Money round_rwf(double x) {
  if (!std::isfinite(x)) throw CapitaError(ErrorKind::InvalidArgument, "payment amount is not finite");
  return Money::from_rwf(static_cast<std::int64_t>(std::floor(x + 0.5)));
}

bool has_approved_visits(const DatasetBundle& bundle, const Period& p) {
  return std::any_of(bundle.visits.begin(), bundle.visits.end(),
                     [&](const VisitRecord& v) { return v.approved && p.contains(v.visit_date); });
}

int quarter_key(const Period& q) { return q.start.index(); }

}  // namespace

Money capitation_amount(const CapitationParams& p, Tier tier, double U, double M, double I) {
  return round_rwf(p.a(tier) * U * M + p.b * I);
}

Money quarterly_amount(const CapitationParams& p, const QuarterInputs& in) {
  return round_rwf(p.a(in.tier) * in.U * static_cast<double>(in.M) / 4.0 + p.b * in.I_q);
}

std::map<std::string, QuarterInputs> quarter_inputs(const CapitationParams& params, const DatasetBundle& bundle,
                                                    const Period& data_quarter, const Period& membership_period,
                                                    const Config& config, Findings* findings) {
  if (!has_approved_visits(bundle, data_quarter))
    throw CapitaError(ErrorKind::MissingPriorQuarter, "no approved visits in " + data_quarter.label());

  const FacilityIndex index = FacilityIndex::build(bundle);
  const auto quarter = compute_metrics(bundle, index, active_members(bundle.members, data_quarter), data_quarter,
                                       config.ambulance_copay_rate);
  std::optional<SegmentationResult> seg;
  try {
    seg = segment(quarter.facilities, config.capture_group_count);
  } catch (const CapitaError& e) {
    if (e.kind() != ErrorKind::TooFewFacilities) throw;
    if (findings) findings->push_back(Finding{"QuarterNotSegmented", data_quarter.label(), e.what()});
  }
  const auto members = active_members(bundle.members, membership_period);

  std::map<std::string, QuarterInputs> out;
  for (const auto& [id, tier] : params.tiers) {
    const FacilityMetrics* m = quarter.find(id);
    QuarterInputs in;
    in.tier = tier;
    auto f = index.facility.find(id);
    if (f != index.facility.end() && f->second->catchment_id) {
      auto c = members.find(*f->second->catchment_id);
      in.M = c == members.end() ? 0 : c->second;
    }
    in.I_q = m ? static_cast<double>(m->inflow_visits) : 0.0;
    if (seg && seg->contains(id)) {
      in.capture_group = seg->capture_group.at(id);
      in.U = lookup_U(id, *seg);
    } else if (params.capture_groups.contains(id)) {
      in.capture_group = params.capture_groups.at(id);
      in.U = params.group_median_u.at(static_cast<std::size_t>(in.capture_group - 1));
      if (findings) findings->push_back(Finding{"CalibrationUFallback", id, data_quarter.label()});
    }
    out.emplace(id, in);
  }
  return out;
}

Schedule quarterly_schedule(const CapitationParams& params, const DatasetBundle& bundle, const Period& fiscal_year,
                            const Config& config) {
  Schedule s;
  for (const Period& q : fiscal_year.quarters()) {
    const Period prior = q.prior_year();
    const auto inputs = quarter_inputs(params, bundle, prior, fiscal_year, config, &s.findings);
    for (const auto& [id, in] : inputs) {
      PaymentLine line;
      line.facility_id = id;
      line.quarter = q;
      line.inputs = in;
      line.base_amount = quarterly_amount(params, in);
      line.final_amount = line.base_amount;
      s.lines.push_back(std::move(line));
    }
  }
  return s;
}

ReconciliationResult reconcile(const CapitationParams& params, const PaymentLine& line, const QuarterInputs& realized,
                               double threshold) {
  ReconciliationResult r;
  r.facility_id = line.facility_id;
  r.quarter = line.quarter;
  r.predicted_prior = line.base_amount;
  QuarterInputs in = realized;
  in.tier = line.inputs.tier;  // tier stays frozen
  r.predicted_current = quarterly_amount(params, in);
  if (r.predicted_prior.cents() == 0)
    throw CapitaError(ErrorKind::ZeroBase, "prior prediction for " + line.facility_id + " " + line.quarter.label() +
                                               " is zero; gap undefined");
  const Money diff = r.predicted_current - r.predicted_prior;
  r.relative_gap = static_cast<double>(diff.cents()) / static_cast<double>(r.predicted_prior.cents());
  r.triggered = std::abs(r.relative_gap) > threshold;
  if (r.triggered) r.carry_forward_delta = diff;
  return r;
}

PaymentLedger::PaymentLedger(int carry_split) : split_(carry_split) {
  if (carry_split < 1) throw CapitaError(ErrorKind::InvalidArgument, "carry_split must be at least 1");
}

PaymentLine PaymentLedger::issue(PaymentLine line) {
  const Key key{line.facility_id, quarter_key(line.quarter)};
  if (issued_.contains(key))
    throw CapitaError(ErrorKind::InvalidArgument,
                      "quarter " + line.quarter.label() + " already issued for " + line.facility_id);
  auto p = pending_.find(key);
  line.carried_adjustment = p == pending_.end() ? Money{} : p->second;
  if (p != pending_.end()) pending_.erase(p);
  line.final_amount = line.base_amount + line.carried_adjustment;
  issued_.insert(key);
  lines_.push_back(line);
  return line;
}

bool PaymentLedger::record(const ReconciliationResult& r) {
  const Key key{r.facility_id, quarter_key(r.quarter)};
  if (!reconciled_.insert(key).second) return false;
  reconciliations_.push_back(r);
  if (!r.triggered || r.carry_forward_delta.cents() == 0) return true;

  const std::int64_t total = r.carry_forward_delta.cents();
  const std::int64_t part = total / split_;
  std::int64_t remainder = total - part * split_;
  int target = key.second + 3;
  for (int k = 0; k < split_; ++k) {
    while (issued_.contains(Key{r.facility_id, target})) target += 3;  // never retroactive
    std::int64_t amount = part;
    if (remainder != 0) {
      amount += remainder;
      remainder = 0;
    }
    pending_[Key{r.facility_id, target}] += Money::from_cents(amount);
    target += 3;
  }
  return true;
}

Money PaymentLedger::total_base() const {
  Money t;
  for (const auto& l : lines_) t += l.base_amount;
  return t;
}

Money PaymentLedger::total_final() const {
  Money t;
  for (const auto& l : lines_) t += l.final_amount;
  return t;
}

Money PaymentLedger::total_triggered() const {
  Money t;
  for (const auto& r : reconciliations_) t += r.carry_forward_delta;
  return t;
}

Money PaymentLedger::total_pending() const {
  Money t;
  for (const auto& [k, v] : pending_) t += v;
  return t;
}

HistoryComparison compare_to_history(const CapitationParams& params, std::span<const FacilityMetrics> metrics,
                                     double tolerance, double bin_width, double max_variation) {
  if (!(bin_width > 0)) throw CapitaError(ErrorKind::InvalidArgument, "bin width must be positive");
  HistoryComparison out;
  out.tolerance = tolerance;
  const int nbins = static_cast<int>(std::ceil((max_variation + 1.0) / bin_width - 1e-9));
  for (int k = 0; k < nbins; ++k) out.histogram.push_back(HistogramBin{-1.0 + k * bin_width, -1.0 + (k + 1) * bin_width, 0});

  for (const auto& m : metrics) {
    if (m.annualized_cost.cents() <= 0) {
      out.findings.push_back(Finding{"ZeroHistoricalCost", m.facility_id, "skipped"});
      continue;
    }
    double U = 0;
    Tier tier = Tier::Low;
    if (m.member_count > 0) {
      auto t = params.tiers.find(m.facility_id);
      auto g = params.capture_groups.find(m.facility_id);
      if (t == params.tiers.end() || g == params.capture_groups.end()) {
        out.findings.push_back(Finding{"NotCalibrated", m.facility_id, "skipped"});
        continue;
      }
      tier = t->second;
      U = params.group_median_u.at(static_cast<std::size_t>(g->second - 1));
    }
    HistoryRow row;
    row.facility_id = m.facility_id;
    row.predicted = capitation_amount(params, tier, U, static_cast<double>(m.member_count), m.inflow);
    row.historical = m.annualized_cost;
    row.variation = static_cast<double>((row.predicted - row.historical).cents()) /
                    static_cast<double>(row.historical.cents());
    if (row.variation < -tolerance)
      ++out.underpaid;
    else if (row.variation > tolerance)
      ++out.overpaid;
    else
      ++out.within;
    if (row.variation < 0) ++out.below_zero;
    int bin = static_cast<int>(std::floor((row.variation + 1.0) / bin_width));
    bin = std::clamp(bin, 0, nbins - 1);
    ++out.histogram[bin].count;
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace capita
