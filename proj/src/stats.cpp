#include "capita/stats.hpp"

#include <algorithm>
#include <cmath>

namespace capita::stats {

namespace {

double sorted_median(std::span<const double> s) {
  if (s.empty()) return 0.0;
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

}  // namespace

double median(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return sorted_median(v);
}

Quartiles quartiles(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Quartiles q;
  if (v.empty()) return q;
  const std::size_t n = v.size();
  const std::size_t half = (n + 1) / 2;  // includes the median when n is odd
  q.median = sorted_median(v);
  q.q1 = sorted_median(std::span<const double>(v).first(half));
  q.q3 = sorted_median(std::span<const double>(v).last(half));
  return q;
}

Fences tukey_fences(const Quartiles& q, double multiplier) {
  return Fences{q.q1 - multiplier * q.iqr(), q.q3 + multiplier * q.iqr()};
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<std::size_t> equal_group_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, k ? n / k : 0);
  for (std::size_t i = 0; k && i < n % k; ++i) ++sizes[i];
  return sizes;
}

BoxSummary box_summary(std::span<const double> values, double multiplier) {
  BoxSummary b;
  b.n = values.size();
  if (values.empty()) return b;
  const Quartiles q = quartiles(values);
  const Fences f = tukey_fences(q, multiplier);
  b.q1 = q.q1;
  b.median = q.median;
  b.q3 = q.q3;
  b.min = *std::min_element(values.begin(), values.end());
  b.max = *std::max_element(values.begin(), values.end());
  b.whisker_low = b.max;
  b.whisker_high = b.min;
  for (double v : values) {
    if (f.outside(v)) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

}  // namespace capita::stats
