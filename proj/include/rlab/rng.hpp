#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace rlab {

using u128 = unsigned __int128;

inline constexpr std::string_view kGeneratorVersion = "splitmix64-counter/1";

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stateless random stream: word i is mix64(key + (i + 1) * golden), the
/// SplitMix64 output sequence with random access. A stream is identified by
/// (master_seed, stream_id), so replicate i of a run can be regenerated
/// without touching any other replicate.
class CounterStream {
 public:
  constexpr CounterStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
      : key_(mix64(master_seed + kGolden) ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL)) {}

  constexpr std::uint64_t word(std::uint64_t i) const noexcept {
    return mix64(key_ + (i + 1) * kGolden);
  }

  constexpr std::uint64_t word(u128 i) const noexcept {
    const auto lo = static_cast<std::uint64_t>(i);
    const auto hi = static_cast<std::uint64_t>(i >> 64);
    if (hi == 0) return word(lo);
    return mix64(word(lo) ^ mix64(hi * kGolden + 0x632BE59BD9B4E019ULL));
  }

  /// Rademacher sign of step `index` (1-based): bit (index-1) % 64 of word (index-1) / 64.
  constexpr int sign(u128 index) const noexcept {
    const u128 k = index - 1;
    const std::uint64_t w = word(k >> 6);
    return ((w >> static_cast<unsigned>(k & 63)) & 1U) ? 1 : -1;
  }

  /// Uniform double in [0, 1) from word i.
  constexpr double uniform(std::uint64_t i) const noexcept {
    return static_cast<double>(word(i) >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential view over a CounterStream; satisfies UniformRandomBitGenerator.
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  constexpr StreamEngine(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
      : stream_(master_seed, stream_id) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return stream_.word(counter_++); }

  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] (inclusive) by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>((*this)());
    const std::uint64_t limit = max() - max() % span;
    std::uint64_t w;
    do {
      w = (*this)();
    } while (w >= limit);
    return lo + static_cast<std::int64_t>(w % span);
  }

 private:
  CounterStream stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace rlab
