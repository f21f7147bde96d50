#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace capita {

/// Currency amount in Rwandan francs, held as integer cents so national-scale
/// sums are exact and order-independent.
class Money {
public:
  constexpr Money() = default;

  static constexpr Money from_cents(std::int64_t cents) { return Money{cents}; }
  static constexpr Money from_rwf(std::int64_t rwf) { return Money{rwf * 100}; }
  /// Rounds half away from zero to the nearest cent.
  static Money from_double_rwf(double rwf) { return Money{std::llround(rwf * 100.0)}; }

  constexpr std::int64_t cents() const { return cents_; }
  constexpr double rwf() const { return static_cast<double>(cents_) / 100.0; }
  /// Whole RWF, half-up (half away from zero for negatives).
  std::int64_t whole_rwf() const;

  constexpr Money operator+(Money o) const { return Money{cents_ + o.cents_}; }
  constexpr Money operator-(Money o) const { return Money{cents_ - o.cents_}; }
  constexpr Money operator-() const { return Money{-cents_}; }
  constexpr Money operator*(std::int64_t k) const { return Money{cents_ * k}; }
  constexpr Money& operator+=(Money o) { cents_ += o.cents_; return *this; }
  constexpr Money& operator-=(Money o) { cents_ -= o.cents_; return *this; }

  constexpr auto operator<=>(const Money&) const = default;

  /// Canonical decimal text: "1250" for whole francs, otherwise two decimals ("1250.05").
  std::string to_string() const;
  /// Parses a plain decimal ("-12", "1250.5", "0.07"). Throws std::invalid_argument.
  static Money parse(std::string_view text);

private:
  constexpr explicit Money(std::int64_t c) : cents_(c) {}
  std::int64_t cents_ = 0;
};

/// Integer division rounded half away from zero. `den` must be positive.
constexpr std::int64_t div_round_half_up(std::int64_t num, std::int64_t den) {
  if (num >= 0) return (num + den / 2) / den;
  return -((-num + den / 2) / den);
}

}  // namespace capita
