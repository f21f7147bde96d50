#include "capita/calendar.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace capita {

namespace {

int parse_int(std::string_view s, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(std::string("malformed ") + what + ": '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string Month::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

Month Month::parse(std::string_view s) {
  if (s.size() != 7 || s[4] != '-') throw std::invalid_argument("malformed month: '" + std::string(s) + "'");
  Month m{parse_int(s.substr(0, 4), "month"), parse_int(s.substr(5, 2), "month")};
  if (!m.valid()) throw std::invalid_argument("month out of range: '" + std::string(s) + "'");
  return m;
}

int days_in_month(int year, int month) {
  using namespace std::chrono;
  return static_cast<int>(static_cast<unsigned>(
      year_month_day_last{std::chrono::year{year}, month_day_last{std::chrono::month{static_cast<unsigned>(month)}}}
          .day()));
}

bool Date::valid() const {
  using namespace std::chrono;
  return year_month_day{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                        std::chrono::day{static_cast<unsigned>(day)}}
      .ok();
}

std::int64_t Date::serial() const {
  using namespace std::chrono;
  const sys_days d{year_month_day{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                  std::chrono::day{static_cast<unsigned>(day)}}};
  return d.time_since_epoch().count();
}

Date Date::from_serial(std::int64_t days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
              static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("malformed date: '" + std::string(s) + "'");
  Date d{parse_int(s.substr(0, 4), "date"), parse_int(s.substr(5, 2), "date"), parse_int(s.substr(8, 2), "date")};
  if (!d.valid()) throw std::invalid_argument("impossible date: '" + std::string(s) + "'");
  return d;
}

Period Period::prior_year() const { return Period{start.plus(-12), end.plus(-12), granularity}; }

std::vector<Period> Period::quarters() const {
  std::vector<Period> out;
  for (Month m = start; m.plus(2) <= end; m = m.plus(3))
    out.push_back(Period{m, m.plus(2), Granularity::Quarter});
  return out;
}

std::string Period::label() const {
  switch (granularity) {
    case Granularity::FiscalYear: return "FY" + std::to_string(end.year);
    case Granularity::CalendarYear: return std::to_string(start.year);
    case Granularity::Quarter:
      if ((start.month - 1) % 3 == 0) return std::to_string(start.year) + "-Q" + std::to_string(start.quarter());
      break;
    case Granularity::Custom: break;
  }
  return start.to_string() + ":" + end.to_string();
}

Period Period::fiscal_year(int ending_year, int anchor_month) {
  // Anchored at `anchor_month`; labelled by the calendar year in which it ends.
  const Month start = anchor_month == 1 ? Month{ending_year, 1} : Month{ending_year - 1, anchor_month};
  return Period{start, start.plus(11), Granularity::FiscalYear};
}

Period Period::calendar_year(int year) { return Period{Month{year, 1}, Month{year, 12}, Granularity::CalendarYear}; }

Period Period::quarter(int year, int q) {
  if (q < 1 || q > 4) throw std::invalid_argument("quarter out of range");
  const Month start{year, (q - 1) * 3 + 1};
  return Period{start, start.plus(2), Granularity::Quarter};
}

Period Period::parse(std::string_view text, int fiscal_anchor_month) {
  if (text.size() == 6 && text.substr(0, 2) == "FY")
    return fiscal_year(parse_int(text.substr(2), "fiscal year"), fiscal_anchor_month);
  if (text.size() == 4) return calendar_year(parse_int(text, "year"));
  if (text.size() == 7 && text[4] == '-' && text[5] == 'Q')
    return quarter(parse_int(text.substr(0, 4), "quarter"), parse_int(text.substr(6, 1), "quarter"));
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    Period p{Month::parse(text.substr(0, colon)), Month::parse(text.substr(colon + 1)), Granularity::Custom};
    if (p.end < p.start) throw std::invalid_argument("period end precedes start: '" + std::string(text) + "'");
    return p;
  }
  throw std::invalid_argument("unrecognised period: '" + std::string(text) + "'");
}

}  // namespace capita
