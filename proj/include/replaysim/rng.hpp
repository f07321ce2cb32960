#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace replaysim {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based stream: draw i is mix64(key + (i + 1) * golden). The key is
// the master seed folded with every label of the substream path, so draws
// never depend on which other streams were consumed or in what order.
class RngStream {
public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t master_seed = 0) : key_(mix64(master_seed ^ 0x5EEDULL)) {}

  RngStream child(std::string_view label) const {
    RngStream r;
    r.key_ = mix64(key_ ^ mix64(fnv1a64(label) + label.size() * kGolden64));
    return r;
  }

  RngStream child(std::uint64_t index) const { return child(std::to_string(index)); }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGolden64); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi); never returns hi.
  double uniform(double lo, double hi) {
    const double r = lo + (hi - lo) * uniform();
    return r < hi ? r : std::nextafter(hi, lo);
  }

  // Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Stream for master_seed along a label path such as {"trial", "3", "snr"}.
inline RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::string_view> path) {
  RngStream r(master_seed);
  for (auto label : path) r = r.child(label);
  return r;
}

inline RngStream derive_stream(std::uint64_t master_seed, const std::vector<std::string>& path) {
  RngStream r(master_seed);
  for (const auto& label : path) r = r.child(label);
  return r;
}

}  // namespace replaysim
