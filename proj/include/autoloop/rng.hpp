#pragma once

// Platform-stable random helpers. std::uniform_int_distribution and
// std::shuffle are implementation-defined, so generated workloads would
// differ between standard libraries; mt19937_64's raw output does not.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace autoloop {

class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  template <typename T>
  const T& pick(std::span<const T> items) {
    return items[below(items.size())];
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

  bool chance(std::uint64_t numerator, std::uint64_t denominator) {
    return below(denominator) < numerator;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace autoloop
