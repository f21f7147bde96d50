#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace capita::svg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 80;
constexpr double kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;
const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  if (std::fabs(v) >= 1000 || v == std::floor(v))
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Canvas {
  std::string body;
  double y_lo = 0, y_hi = 1;

  double y(double v) const { return kTop + kPlotH * (1 - (v - y_lo) / (y_hi - y_lo)); }

  void rect(double x, double y0, double w, double h, const char* fill) {
    body += "<rect x=\"" + num(x) + "\" y=\"" + num(y0) + "\" width=\"" + num(std::max(0.0, w)) + "\" height=\"" +
            num(std::max(0.0, h)) + "\" fill=\"" + fill + "\" stroke=\"#333\" stroke-width=\"0.5\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#333") {
    body += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
            "\" stroke=\"" + stroke + "\"/>\n";
  }
  void text(double x, double y0, const std::string& s, const char* anchor = "middle", double rotate = 0, int size = 11) {
    body += "<text x=\"" + num(x) + "\" y=\"" + num(y0) + "\" font-size=\"" + std::to_string(size) +
            "\" text-anchor=\"" + anchor + "\"";
    if (rotate != 0) body += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y0) + ")\"";
    body += ">" + esc(s) + "</text>\n";
  }
  void circle(double x, double y0, double r) {
    body += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y0) + "\" r=\"" + num(r) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  }

  void y_axis(const std::string& label) {
    line(kLeft, kTop, kLeft, kTop + kPlotH);
    for (int k = 0; k <= 5; ++k) {
      const double v = y_lo + (y_hi - y_lo) * k / 5.0;
      line(kLeft - 4, y(v), kLeft, y(v));
      text(kLeft - 6, y(v) + 4, label_num(v), "end");
    }
    text(18, kTop + kPlotH / 2, label, "middle", -90);
    line(kLeft, kTop + kPlotH, kLeft + kPlotW, kTop + kPlotH);
  }

  std::string finish(const std::string& title) const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" + num(kWidth / 2) +
           "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" + esc(title) + "</text>\n" + body + "</svg>\n";
  }
};

double nice_top(double v) {
  if (!(v > 0)) return 1;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10 * p;
}

}  // namespace

std::string histogram(const std::string& title, const std::vector<Bin>& bins, const std::string& x_label,
                      const std::string& y_label) {
  Canvas c;
  double top = 0;
  for (const auto& b : bins) top = std::max(top, b.count);
  c.y_hi = nice_top(top);
  c.y_axis(y_label);
  const double w = bins.empty() ? 0 : kPlotW / static_cast<double>(bins.size());
  const std::size_t every = std::max<std::size_t>(1, bins.size() / 10);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double x = kLeft + w * static_cast<double>(i);
    c.rect(x, c.y(bins[i].count), w, c.y(0) - c.y(bins[i].count), kPalette[0]);
    if (i % every == 0) c.text(x, kTop + kPlotH + 16, label_num(bins[i].lo));
  }
  if (!bins.empty()) c.text(kLeft + kPlotW, kTop + kPlotH + 16, label_num(bins.back().hi));
  c.text(kLeft + kPlotW / 2, kHeight - 20, x_label);
  return c.finish(title);
}

std::string bars(const std::string& title, const std::vector<Bar>& items, const std::string& y_label) {
  Canvas c;
  double top = 0;
  for (const auto& b : items) top = std::max(top, b.value);
  c.y_hi = nice_top(top);
  c.y_axis(y_label);
  const double slot = items.empty() ? 0 : kPlotW / static_cast<double>(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    c.rect(x + slot * 0.1, c.y(items[i].value), slot * 0.8, c.y(0) - c.y(items[i].value), kPalette[i % 10]);
    c.text(x + slot / 2, kTop + kPlotH + 12, items[i].label, "end", -40, 10);
  }
  return c.finish(title);
}

std::string boxplot(const std::string& title, const std::vector<Box>& boxes, const std::string& y_label) {
  Canvas c;
  double lo = 0, hi = 0;
  for (const auto& b : boxes) {
    if (b.summary.n == 0) continue;
    lo = std::min(lo, b.summary.min);
    hi = std::max(hi, b.summary.max);
  }
  c.y_lo = lo;
  c.y_hi = hi > lo ? (hi <= 1 && lo >= 0 ? 1.0 : nice_top(hi)) : lo + 1;
  c.y_axis(y_label);
  const double slot = boxes.empty() ? 0 : kPlotW / static_cast<double>(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& s = boxes[i].summary;
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    c.text(cx, kTop + kPlotH + 16, boxes[i].label, "middle", 0, 10);
    if (s.n == 0) continue;
    const double half = slot * 0.25;
    c.line(cx, c.y(s.whisker_low), cx, c.y(s.q1));
    c.line(cx, c.y(s.q3), cx, c.y(s.whisker_high));
    c.line(cx - half / 2, c.y(s.whisker_low), cx + half / 2, c.y(s.whisker_low));
    c.line(cx - half / 2, c.y(s.whisker_high), cx + half / 2, c.y(s.whisker_high));
    c.rect(cx - half, c.y(s.q3), 2 * half, c.y(s.q1) - c.y(s.q3), kPalette[i % 10]);
    c.line(cx - half, c.y(s.median), cx + half, c.y(s.median), "#000");
    for (double o : s.outliers) c.circle(cx, c.y(o), 2.5);
  }
  return c.finish(title);
}

std::string stacked(const std::string& title, const std::vector<std::string>& categories,
                    const std::vector<Series>& series, const std::string& y_label) {
  Canvas c;
  c.y_hi = 1;
  c.y_axis(y_label);
  const double slot = categories.empty() ? 0 : kPlotW * 0.8 / static_cast<double>(categories.size());
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    double total = 0;
    for (const auto& s : series) total += i < s.values.size() ? s.values[i] : 0;
    double acc = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = total > 0 && i < series[k].values.size() ? series[k].values[i] / total : 0;
      c.rect(x + slot * 0.15, c.y(acc + v), slot * 0.7, c.y(acc) - c.y(acc + v), kPalette[k % 10]);
      acc += v;
    }
    c.text(x + slot / 2, kTop + kPlotH + 16, categories[i], "middle", 0, 10);
  }
  const double lx = kLeft + kPlotW * 0.82;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = kTop + 14.0 * static_cast<double>(k);
    c.rect(lx, ly, 10, 10, kPalette[k % 10]);
    c.text(lx + 14, ly + 9, series[k].name, "start", 0, 9);
  }
  return c.finish(title);
}

}  // namespace capita::svg
