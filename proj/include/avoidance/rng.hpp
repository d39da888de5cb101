#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace avoidance {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Stafford mix13 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

/// Counter-based random stream keyed by (master_seed, stream_id).
///
/// The i-th output is a pure function of (master_seed, stream_id, i), so
/// replicas can be assigned to workers in any order without changing the
/// sampled values. Distinct (seed, stream) pairs give statistically
/// independent sequences.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : key_(detail::mix64(detail::mix64(master_seed + detail::kGolden) ^
                           detail::mix64(stream_id * detail::kGolden +
                                         0x2545f4914f6cdd1dULL))) {}

  std::uint64_t next_u64() {
    counter_ += detail::kGolden;
    return detail::mix64(key_ ^ counter_);
  }

  /// Uniform double in the open interval (0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  /// Derived stream for an independent purpose (quadrature nodes, inner
  /// Monte Carlo, ...). Forks of the same stream with distinct tags are
  /// independent of each other and of the parent.
  RngStream fork(std::uint64_t tag) const { return RngStream(key_, tag); }

  /// Poisson draw; exact inversion below mean 30, PTRS rejection above.
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) return poisson_inversion(mean);
    return poisson_ptrs(mean);
  }

 private:
  std::uint64_t poisson_inversion(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = next_double();
    while (prod > limit) {
      ++k;
      prod *= next_double();
    }
    return k;
  }

  // Hoermann's PTRS transformed rejection sampler.
  std::uint64_t poisson_ptrs(double mean) {
    const double log_mean = std::log(mean);
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = next_double() - 0.5;
      const double v = next_double();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          kf * log_mean - mean - std::lgamma(kf + 1.0)) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace avoidance
