#include "capita/money.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace capita {

std::int64_t Money::whole_rwf() const { return div_round_half_up(cents_, 100); }

std::string Money::to_string() const {
  const std::int64_t abs = cents_ < 0 ? -cents_ : cents_;
  char buf[40];
  if (abs % 100 == 0) {
    std::snprintf(buf, sizeof buf, "%s%lld", cents_ < 0 ? "-" : "",
                  static_cast<long long>(abs / 100));
  } else {
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", cents_ < 0 ? "-" : "",
                  static_cast<long long>(abs / 100), static_cast<long long>(abs % 100));
  }
  return buf;
}

Money Money::parse(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty currency amount");
  bool negative = false;
  if (text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) throw std::invalid_argument("malformed currency amount");
  if (frac.size() > 2) {
    // Accept trailing zeros past the cent ("12.500") but nothing finer.
    for (char c : frac.substr(2))
      if (c != '0') throw std::invalid_argument("currency amount finer than one cent");
    frac = frac.substr(0, 2);
  }
  std::int64_t w = 0;
  if (!whole.empty()) {
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
    if (ec != std::errc{} || p != whole.data() + whole.size())
      throw std::invalid_argument("malformed currency amount");
  }
  std::int64_t f = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    f *= 10;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') throw std::invalid_argument("malformed currency amount");
      f += frac[i] - '0';
    }
  }
  const std::int64_t cents = w * 100 + f;
  return Money::from_cents(negative ? -cents : cents);
}

}  // namespace capita
