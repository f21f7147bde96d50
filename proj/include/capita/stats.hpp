#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace capita::stats {

/// Median with the average-of-two-middle convention. Empty input → 0.
double median(std::span<const double> values);

struct Quartiles {
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double iqr() const { return q3 - q1; }
};

/// Tukey hinges: Q1/Q3 are the medians of the lower/upper halves, where the
/// halves include the overall median when the count is odd. For {1..9} this
/// gives Q1 = 3, Q3 = 7.
Quartiles quartiles(std::span<const double> values);

struct Fences {
  double lower = 0;
  double upper = 0;
  bool outside(double v) const { return v < lower || v > upper; }
};

Fences tukey_fences(const Quartiles& q, double multiplier = 1.5);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1). Fewer than two values → 0.
double stddev(std::span<const double> values);

/// Sizes of `k` equal-count groups over `n` items; remainders go to the
/// lowest-index groups (17 into 5 → 4,4,3,3,3).
std::vector<std::size_t> equal_group_sizes(std::size_t n, std::size_t k);

/// Box-plot summary with 1.5·IQR outliers and whiskers at the most extreme
/// non-outlying values.
struct BoxSummary {
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;
};
BoxSummary box_summary(std::span<const double> values, double multiplier = 1.5);

}  // namespace capita::stats
