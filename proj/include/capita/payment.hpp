#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "capita/bundle.hpp"
#include "capita/calibration.hpp"
#include "capita/config.hpp"

namespace capita {

/// A_tier · U · M + B · I rounded half-up to whole RWF.
Money capitation_amount(const CapitationParams& params, Tier tier, double U, double M, double I);

/// Inputs behind one quarterly payment.
struct QuarterInputs {
  Tier tier = Tier::Low;
  double U = 0;           // annualized quarterly rate of the capture group
  std::int64_t M = 0;     // current member count
  double I_q = 0;         // raw inflow visits in the quarter
  int capture_group = 0;  // 0 when the facility has no group (M = 0)
  bool operator==(const QuarterInputs&) const = default;
};

/// A_tier · U · M / 4 + B · I_q, rounded half-up to whole RWF.
Money quarterly_amount(const CapitationParams& params, const QuarterInputs& in);

struct PaymentLine {
  std::string facility_id;
  Period quarter;
  Money base_amount;
  Money carried_adjustment;
  Money final_amount;
  QuarterInputs inputs;
  bool operator==(const PaymentLine&) const = default;
};

struct ReconciliationResult {
  std::string facility_id;
  Period quarter;
  Money predicted_prior;
  Money predicted_current;
  double relative_gap = 0;
  bool triggered = false;
  Money carry_forward_delta;  // zero unless triggered
  bool operator==(const ReconciliationResult&) const = default;
};

/// Quarter inputs for every facility in the calibration: metrics and
/// segmentation are recomputed on `data_quarter`, tiers stay frozen, and M is
/// counted over `membership_period`. Facilities that cannot be segmented in
/// the quarter fall back to the calibration U with a finding.
/// Throws MissingPriorQuarter when `data_quarter` holds no approved visits.
std::map<std::string, QuarterInputs> quarter_inputs(const CapitationParams& params, const DatasetBundle& bundle,
                                                    const Period& data_quarter, const Period& membership_period,
                                                    const Config& config, Findings* findings = nullptr);

struct Schedule {
  std::vector<PaymentLine> lines;  // quarter-major, facility id order
  Findings findings;
};

/// Base payments for the four quarters of `fiscal_year`, each driven by the
/// same quarter one year earlier. Carried adjustments are zero here; the
/// ledger fills them in.
Schedule quarterly_schedule(const CapitationParams& params, const DatasetBundle& bundle, const Period& fiscal_year,
                            const Config& config = {});

/// Compares the prior-year prediction in `line` with the same quarter's base
/// recomputed from realized inputs. Triggers strictly above `threshold`.
/// Throws ZeroBase when the prior prediction is zero.
ReconciliationResult reconcile(const CapitationParams& params, const PaymentLine& line, const QuarterInputs& realized,
                               double threshold = 0.30);

/// Per-facility payment history with carry-forward bookkeeping.
class PaymentLedger {
public:
  explicit PaymentLedger(int carry_split = 1);

  /// Stores the line with carried_adjustment set to whatever is pending for
  /// its facility and quarter. Throws InvalidArgument if already issued.
  PaymentLine issue(PaymentLine line);

  /// Records a reconciliation once per facility and quarter; a repeat call is
  /// ignored and returns false. A triggered delta is scheduled on the next
  /// quarters not yet issued for that facility.
  bool record(const ReconciliationResult& result);

  const std::vector<PaymentLine>& lines() const { return lines_; }
  const std::vector<ReconciliationResult>& reconciliations() const { return reconciliations_; }

  Money total_base() const;
  Money total_final() const;
  Money total_triggered() const;
  /// Adjustments scheduled on quarters that have not been issued yet.
  Money total_pending() const;

private:
  using Key = std::pair<std::string, int>;  // facility, quarter start month index
  int split_;
  std::vector<PaymentLine> lines_;
  std::vector<ReconciliationResult> reconciliations_;
  std::set<Key> issued_;
  std::set<Key> reconciled_;
  std::map<Key, Money> pending_;
};

struct HistoryRow {
  std::string facility_id;
  Money predicted;
  Money historical;
  double variation = 0;  // (predicted - historical) / historical
};

struct HistogramBin {
  double lo = 0, hi = 0;
  std::size_t count = 0;
};

struct HistoryComparison {
  std::vector<HistoryRow> rows;
  std::vector<HistogramBin> histogram;
  std::size_t underpaid = 0;  // variation < -tolerance
  std::size_t overpaid = 0;   // variation > tolerance
  std::size_t within = 0;
  std::size_t below_zero = 0;  // any underpayment
  double tolerance = 0.30;
  Findings findings;
};

/// Predicted annual capitation versus historical annualized cost. Histogram
/// bins are `bin_width` wide from -100%; values past `max_variation` land in
/// the last bin. Facilities with zero historical cost are skipped.
HistoryComparison compare_to_history(const CapitationParams& params, std::span<const FacilityMetrics> metrics,
                                     double tolerance = 0.30, double bin_width = 0.10, double max_variation = 2.0);

}  // namespace capita
