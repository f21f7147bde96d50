#pragma once

#include <string>
#include <vector>

#include "capita/stats.hpp"

namespace capita::svg {

struct Bin {
  double lo = 0, hi = 0;
  double count = 0;
};

struct Bar {
  std::string label;
  double value = 0;
};

struct Box {
  std::string label;
  stats::BoxSummary summary;
};

struct Series {
  std::string name;
  std::vector<double> values;  // one per category
};

std::string histogram(const std::string& title, const std::vector<Bin>& bins, const std::string& x_label,
                      const std::string& y_label = "facilities");
std::string bars(const std::string& title, const std::vector<Bar>& bars, const std::string& y_label);
std::string boxplot(const std::string& title, const std::vector<Box>& boxes, const std::string& y_label);
/// Stacked 100% bars: one bar per category, one segment per series.
std::string stacked(const std::string& title, const std::vector<std::string>& categories,
                    const std::vector<Series>& series, const std::string& y_label);

}  // namespace capita::svg
