#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "avoidance/geometry.hpp"
#include "avoidance/malliavin.hpp"
#include "avoidance/ppp.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

/// Masses mu(A), mu(B), mu(A ∩ B) of two finite-measure sets.
struct MassConfig {
  double mA = 0.0;
  double mB = 0.0;
  double mAB = 0.0;

  double union_mass() const { return mA + mB - mAB; }
};

/// E[ 1(eta(A)=0) mehler(eta(B), mu(B)) ] = e^{-mu(A∪B)} (1-e^{-mu(A∩B)})/mu(A∩B),
/// with the removable singularity at mu(A∩B) = 0 handled by series.
inline double avoid_mehler_expectation(const MassConfig& cfg) {
  const double x = cfg.mAB;
  double ratio;
  if (x < 1e-4) {
    ratio = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
  } else {
    ratio = -std::expm1(-x) / x;
  }
  return std::exp(-cfg.union_mass()) * ratio;
}

/// Upper bound on the covariance of two Mehler-weighted avoidance
/// indicators: e^{-mu(A∪B∪C∪D)} when the supports overlap, else 0.
inline double covariance_upper_bound(double union_mass, bool overlap) {
  if (union_mass < 0.0)
    throw std::invalid_argument("covariance_upper_bound: negative mass");
  return overlap ? std::exp(-union_mass) : 0.0;
}

namespace detail {

inline Window bounding_window(std::span<const Ball> balls) {
  const int d = balls[0].dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const Ball& b : balls)
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], b.center[i] - b.radius - 1e-9);
      hi[i] = std::max(hi[i], b.center[i] + b.radius + 1e-9);
    }
  return Window(std::move(lo), std::move(hi));
}

inline std::size_t count_ball_points(const PointPattern& p, const Ball& b) {
  const double r2 = b.radius * b.radius;
  std::size_t c = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (squared_distance(p.point(i), b.center) < r2) ++c;
  return c;
}

}  // namespace detail

struct MomentCheck {
  McEstimate mc;
  double closed = 0.0;
};

/// Simulates eta at intensity lambda on a box containing A and B, averages
/// 1(eta(A)=0) mehler(eta(B), lambda l(B)), and returns it next to the
/// closed-form expectation.
inline MomentCheck mc_check_moment(const Ball& A, const Ball& B, double lambda,
                                   std::uint64_t reps, RngStream& stream) {
  const int d = A.dim();
  const Ball balls[] = {A, B};
  const Window box = detail::bounding_window(balls);
  const double volA = ball_volume(d, A.radius);
  const double volB = ball_volume(d, B.radius);
  const double volAB = two_ball_intersection_volume(
      d, A.radius, B.radius, distance(A.center, B.center));
  const double massB = lambda * volB;
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t i = 0; i < reps; ++i) {
    RngStream rep = stream.fork(i);
    PointPattern p = sample_homogeneous(box, lambda, rep);
    const double v = detail::count_ball_points(p, A) == 0
                         ? mehler_integral(detail::count_ball_points(p, B), massB)
                         : 0.0;
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(reps);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) / (n - 1.0));
  const MassConfig cfg{lambda * volA, massB, lambda * volAB};
  return {{mean, std::sqrt(var), reps}, avoid_mehler_expectation(cfg)};
}

struct CovarianceCheck {
  McEstimate mc_cov;
  double bound = 0.0;
};

/// MC covariance of the two Mehler-weighted indicators for (A,B) and (C,D)
/// against the e^{-mu(union)} overlap bound. SE by jackknife.
inline CovarianceCheck mc_check_covariance(const Ball& A, const Ball& B,
                                           const Ball& C, const Ball& D,
                                           double lambda, std::uint64_t reps,
                                           RngStream& stream) {
  if (reps < 3) throw std::invalid_argument("mc_check_covariance: reps >= 3");
  const int d = A.dim();
  const Ball balls[] = {A, B, C, D};
  const Window box = detail::bounding_window(balls);
  const double massB = lambda * ball_volume(d, B.radius);
  const double massD = lambda * ball_volume(d, D.radius);
  std::vector<double> xs(reps), ys(reps);
  for (std::uint64_t i = 0; i < reps; ++i) {
    RngStream rep = stream.fork(i);
    PointPattern p = sample_homogeneous(box, lambda, rep);
    xs[i] = detail::count_ball_points(p, A) == 0
                ? mehler_integral(detail::count_ball_points(p, B), massB)
                : 0.0;
    ys[i] = detail::count_ball_points(p, C) == 0
                ? mehler_integral(detail::count_ball_points(p, D), massD)
                : 0.0;
  }
  const double n = static_cast<double>(reps);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::uint64_t i = 0; i < reps; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxy += xs[i] * ys[i];
  }
  const double cov = (sxy - sx * sy / n) / (n - 1.0);
  // Jackknife: leave-one-out covariances from the running sums.
  double jk_sum = 0.0, jk_sum2 = 0.0;
  for (std::uint64_t i = 0; i < reps; ++i) {
    const double m = n - 1.0;
    const double c = ((sxy - xs[i] * ys[i]) -
                      (sx - xs[i]) * (sy - ys[i]) / m) /
                     (m - 1.0);
    jk_sum += c;
    jk_sum2 += c * c;
  }
  const double jk_mean = jk_sum / n;
  const double se =
      std::sqrt(std::max(0.0, (n - 1.0) / n * (jk_sum2 - n * jk_mean * jk_mean)));

  // Overlap of (A ∪ B) with (C ∪ D): some ball of the first pair meets some
  // ball of the second.
  bool overlap = false;
  for (const Ball* p : {&A, &B})
    for (const Ball* q : {&C, &D})
      if (distance(p->center, q->center) < p->radius + q->radius) overlap = true;
  RngStream vol_rng = stream.fork(reps + 1);
  const McEstimate union_vol =
      k_region_volume(balls, Combine::Union, 200000, vol_rng);
  const double bound = covariance_upper_bound(lambda * union_vol.value, overlap);
  return {{cov, se, reps}, bound};
}

}  // namespace avoidance
