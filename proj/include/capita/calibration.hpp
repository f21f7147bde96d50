#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capita/calendar.hpp"
#include "capita/metrics.hpp"
#include "capita/segmentation.hpp"

namespace capita {

enum class FitMethod { OLS, Huber, RANSAC, TheilSen };
std::string_view to_string(FitMethod);
std::optional<FitMethod> parse_fit_method(std::string_view);  // "ols", "huber", "ransac", "theilsen"

/// One regression row per Health Center: y ≈ a_tier·x_tier + b·x_inflow.
struct DesignRow {
  std::string facility_id;
  double y = 0;  // annualized cost, RWF
  double x_low = 0, x_med = 0, x_high = 0, x_inflow = 0;

  std::array<double, 4> x() const { return {x_low, x_med, x_high, x_inflow}; }
  bool operator==(const DesignRow&) const = default;
};

struct FitDiagnostics {
  double r2 = 0;                 // 1 - SSres / SStot (centred)
  double condition_number = 0;   // of the normal matrix
  std::vector<double> pct_deviation;  // (prediction - y) / y per row, 0 when y = 0
  int iterations = 0;            // Huber IRLS iterations
  std::size_t inliers = 0;       // RANSAC consensus size
  std::size_t samples = 0;       // Theil-Sen successful exact solves
};

struct CapitationParams {
  double a_low = 0, a_med = 0, a_high = 0, b = 0;
  FitMethod method = FitMethod::OLS;
  Period calibration_period;
  std::map<std::string, Tier> tiers;  // segmentation snapshot the fit was built on
  std::map<std::string, int> capture_groups;
  std::vector<double> group_median_u;
  FitDiagnostics diagnostics;
  Findings findings;  // e.g. NonPositiveParameter

  double a(Tier t) const { return t == Tier::Low ? a_low : t == Tier::Medium ? a_med : a_high; }
  std::array<double, 4> vector() const { return {a_low, a_med, a_high, b}; }
  void set_vector(const std::array<double, 4>& v) { a_low = v[0], a_med = v[1], a_high = v[2], b = v[3]; }
  double predict(const DesignRow& r) const { return a_low * r.x_low + a_med * r.x_med + a_high * r.x_high + b * r.x_inflow; }
};

/// Builds the regression rows. Facilities with M = 0 get a zero member term
/// without needing a capture group; facilities with no activity are skipped
/// with a finding. Throws InconsistentCoverage when a segmented facility has
/// no metrics or a facility with members is not segmented.
std::vector<DesignRow> build_design(std::span<const FacilityMetrics> metrics, const SegmentationResult& segmentation,
                                    Findings* findings = nullptr);

/// No-intercept least squares through the 4×4 normal equations (Cholesky).
/// Throws RankDeficient when the column-scaled normal matrix has a relative
/// smallest eigenvalue below 1e-10.
CapitationParams fit_ols(std::span<const DesignRow> rows);

struct RobustOptions {
  double huber_k = 1.345;
  double huber_tol = 1e-8;
  int huber_max_iter = 100;
  int ransac_iterations = 1000;
  double ransac_mad_multiple = 2.0;
  std::size_t ransac_min_consensus = 8;
  int theilsen_samples = 2000;
};

/// Huber (IRLS, MAD scale), RANSAC (minimal 4-row samples, final OLS on the
/// best consensus set) or Theil-Sen (coordinate-wise median of exact 4-row
/// solves). Passing FitMethod::OLS delegates to fit_ols. All random draws come
/// from Philox substreams of `seed`, so a seed reproduces bit-identical output.
/// Throws NonConvergence (Huber) or NoConsensus (RANSAC).
CapitationParams fit_robust(std::span<const DesignRow> rows, FitMethod method, std::uint64_t seed,
                            const RobustOptions& options = {});

/// build_design + fit, with the segmentation snapshot and period attached.
CapitationParams calibrate(std::span<const FacilityMetrics> metrics, const SegmentationResult& segmentation,
                           const Period& period, FitMethod method = FitMethod::OLS, std::uint64_t seed = 42);

struct SplitOutcome {
  std::array<double, 4> params{};
  std::size_t test_rows = 0;
  std::size_t overpaid = 0;   // prediction > y · (1 + tolerance)
  std::size_t underpaid = 0;  // prediction < y · (1 - tolerance)
};

struct RobustnessReport {
  std::size_t n_splits = 0;
  double train_fraction = 0.8;
  double tolerance = 0.30;
  std::uint64_t seed = 0;
  FitMethod method = FitMethod::OLS;
  std::array<double, 4> mean{}, sd{}, min{}, max{};
  std::vector<SplitOutcome> splits;
  std::array<double, 4> full_fit{};  // fit on every row
  std::size_t mean_model_overpaid = 0, mean_model_underpaid = 0;  // mean coefficients on all rows
};

/// Repeated random train/test splits. Split `i` shuffles with substream i of
/// `seed`, fits on the first round(train_fraction·n) rows and counts test rows
/// paid outside ±tolerance. Needs at least 20 rows.
RobustnessReport robustness_harness(std::span<const DesignRow> rows, int n_splits = 500, double train_fraction = 0.8,
                                    std::uint64_t seed = 42, double tolerance = 0.30,
                                    FitMethod method = FitMethod::OLS);

/// Counts rows paid above/below ±tolerance under `params`.
std::pair<std::size_t, std::size_t> over_under(const std::array<double, 4>& params, std::span<const DesignRow> rows,
                                               double tolerance);

}  // namespace capita
