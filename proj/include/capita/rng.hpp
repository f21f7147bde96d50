#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace capita {

/// Philox4x32-10, the counter-based generator used for
/// every random draw in this project.
///
///   key     = (k0, k1)            two 32-bit words
///   counter = (c0, c1, c2, c3)    four 32-bit words
///   round:  (hi0, lo0) = 0xD2511F53 * c0,  (hi1, lo1) = 0xCD9E8D57 * c2
///           c' = (hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0)
///   key schedule between rounds: k0 += 0x9E3779B9, k1 += 0xBB67AE85
///   ten rounds; the output block is the final counter state.
///
/// Stream layout: key = 64-bit seed (low word k0), c2/c3 = 64-bit stream id,
/// c0/c1 = 64-bit block index. Each block yields four 32-bit words consumed in
/// order. Because every value is a pure function of (seed, stream, position),
/// independent streams can be evaluated in any order or in parallel.
class Philox {
public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block bijection(Block counter, Key key);

  Philox(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();  // (first word << 32) | second word
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (cosine branch only; one normal per call).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Index drawn from non-negative weights (linear scan).
  std::size_t pick(std::span<const double> weights);

private:
  void refill();
  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buf_{};
  int pos_ = 4;
};

/// Stream id for substream `index` of a named purpose; keeps purposes disjoint.
constexpr std::uint64_t stream_id(std::uint32_t purpose, std::uint32_t index) {
  return (static_cast<std::uint64_t>(purpose) << 32) | index;
}

}  // namespace capita
