#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "avoidance/errors.hpp"

namespace avoidance {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * M_SQRT1_2);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

/// Antiderivative of the standard normal CDF: ∫ Phi = x Phi(x) + phi(x),
/// normalized so it tends to 0 at -infinity.
inline double normal_cdf_antideriv(double x) {
  return x * normal_cdf(x) + normal_pdf(x);
}

struct Standardization {
  double mean = 0.0;
  double sd = 1.0;
};

/// (x - mean)/sd per element. Pass empty optional-like sd <= 0 analytic
/// parameters via the struct; empirical mode computes sample mean and the
/// unbiased sample SD.
inline std::vector<double> standardize(const std::vector<double>& samples,
                                       const Standardization& analytic) {
  if (!(analytic.sd > 0.0))
    throw DegenerateVarianceError("standardize: sd must be > 0");
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out[i] = (samples[i] - analytic.mean) / analytic.sd;
  return out;
}

inline Standardization empirical_moments(const std::vector<double>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("empirical_moments: need >= 2 samples");
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  if (!(var > 0.0))
    throw DegenerateVarianceError("empirical_moments: zero sample variance");
  return {mean, std::sqrt(var)};
}

inline std::vector<double> standardize_empirical(const std::vector<double>& s) {
  return standardize(s, empirical_moments(s));
}

/// Exact sup_x |F_m(x) - Phi(x)| over the real line, evaluated at the jump
/// points of the empirical CDF. Input is sorted ascending.
inline double kolmogorov_distance(const std::vector<double>& sorted) {
  if (sorted.empty())
    throw std::invalid_argument("kolmogorov_distance: empty input");
  const double m = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double phi = normal_cdf(sorted[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / m - phi);
    d = std::max(d, phi - static_cast<double>(i) / m);
  }
  return d;
}

/// Exact ∫ |F_m(x) - Phi(x)| dx, piecewise between order statistics with the
/// Phi antiderivative; at most one sign change per piece (F_m is constant
/// there), located by bisection. Input is sorted ascending.
inline double wasserstein1_distance(const std::vector<double>& sorted) {
  if (sorted.empty())
    throw std::invalid_argument("wasserstein1_distance: empty input");
  const double m = static_cast<double>(sorted.size());
  // Left tail: ∫_{-inf}^{x_(1)} Phi.
  double total = normal_cdf_antideriv(sorted.front());
  // Right tail: ∫_{x_(m)}^{inf} (1 - Phi).
  total += normal_cdf_antideriv(sorted.back()) - sorted.back();
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const double a = sorted[i], b = sorted[i + 1];
    if (!(a < b)) continue;
    const double level = (static_cast<double>(i) + 1.0) / m;
    auto piece = [&](double lo, double hi) {
      return level * (hi - lo) -
             (normal_cdf_antideriv(hi) - normal_cdf_antideriv(lo));
    };
    const double ha = level - normal_cdf(a);
    const double hb = level - normal_cdf(b);
    if (ha >= 0.0 && hb >= 0.0) {
      total += piece(a, b);
    } else if (ha <= 0.0 && hb <= 0.0) {
      total -= piece(a, b);
    } else {
      // h is strictly decreasing on the piece; bisect the root.
      double lo = a, hi = b;
      for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (level - normal_cdf(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      const double root = 0.5 * (lo + hi);
      total += piece(a, root) - piece(root, b);
    }
  }
  return total;
}

/// One row of a rate experiment.
struct DistanceRow {
  double scale = 0.0;
  double d_w = 0.0;
  double d_k = 0.0;
  double bound_w = 0.0;
  double bound_k = 0.0;
  std::uint64_t reps = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(distance) against log(scale).
inline RateFit rate_fit(const std::vector<double>& scales,
                        const std::vector<double>& distances) {
  if (scales.size() != distances.size() || scales.size() < 2)
    throw std::invalid_argument("rate_fit: need >= 2 matching rows");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(scales.size());
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0) || !(distances[i] > 0.0))
      throw std::invalid_argument("rate_fit: positive scales and distances required");
    const double x = std::log(scales[i]);
    const double y = std::log(distances[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("rate_fit: degenerate scales");
  const double slope = (n * sxy - sx * sy) / denom;
  return {slope, (sy - slope * sx) / n};
}

}  // namespace avoidance
