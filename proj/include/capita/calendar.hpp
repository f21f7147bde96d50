#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace capita {

/// A calendar month. Ordered; `index()` is a dense month counter.
struct Month {
  int year = 1970;
  int month = 1;  // 1..12

  constexpr int index() const { return year * 12 + (month - 1); }
  static constexpr Month from_index(int idx) { return Month{idx / 12, idx % 12 + 1}; }
  constexpr Month plus(int months) const { return from_index(index() + months); }
  constexpr int quarter() const { return (month - 1) / 3 + 1; }
  constexpr bool valid() const { return month >= 1 && month <= 12; }

  constexpr auto operator<=>(const Month& o) const { return index() <=> o.index(); }
  constexpr bool operator==(const Month& o) const { return index() == o.index(); }

  std::string to_string() const;        // YYYY-MM
  static Month parse(std::string_view);  // throws std::invalid_argument
};

/// Months between a and b inclusive; 0 when b < a.
constexpr int months_between_inclusive(Month a, Month b) {
  return b.index() < a.index() ? 0 : b.index() - a.index() + 1;
}

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  Month month_of() const { return Month{year, month}; }
  bool valid() const;
  /// Days since 1970-01-01 (proleptic Gregorian).
  std::int64_t serial() const;
  static Date from_serial(std::int64_t days);

  auto operator<=>(const Date&) const = default;

  std::string to_string() const;        // YYYY-MM-DD
  static Date parse(std::string_view);  // throws std::invalid_argument (also for impossible dates)
};

int days_in_month(int year, int month);

enum class Granularity { FiscalYear, CalendarYear, Quarter, Custom };

/// Inclusive month range used as an analysis window.
struct Period {
  Month start;
  Month end;
  Granularity granularity = Granularity::Custom;

  int months() const { return months_between_inclusive(start, end); }
  bool contains(Month m) const { return start <= m && m <= end; }
  bool contains(const Date& d) const { return contains(d.month_of()); }
  /// Same-length window shifted back twelve months.
  Period prior_year() const;
  std::vector<Period> quarters() const;  // for year-long periods, four consecutive 3-month windows

  bool operator==(const Period&) const = default;

  /// Canonical label: "FY2024", "2024", "2024-Q3" or "YYYY-MM:YYYY-MM".
  std::string label() const;

  static Period fiscal_year(int ending_year, int anchor_month = 7);
  static Period calendar_year(int year);
  static Period quarter(int year, int q);
  /// Accepts FYyyyy, yyyy, yyyy-Qn, or YYYY-MM:YYYY-MM. Throws std::invalid_argument.
  static Period parse(std::string_view text, int fiscal_anchor_month = 7);
};

}  // namespace capita
