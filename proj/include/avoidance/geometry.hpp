#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "avoidance/errors.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

/// Monte Carlo result: point estimate, standard error, sample count.
struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
};

/// Axis-aligned box with lower[i] < upper[i] in every coordinate.
struct Window {
  std::vector<double> lower;
  std::vector<double> upper;

  Window(std::vector<double> lo, std::vector<double> hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty())
      throw std::invalid_argument("Window: dimension mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("Window: lower must be < upper");
  }

  static Window unit_cube(int d) {
    return Window(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
  }

  static Window centered_cube(int d, double side) {
    return Window(std::vector<double>(d, -side / 2.0),
                  std::vector<double>(d, side / 2.0));
  }

  int dim() const { return static_cast<int>(lower.size()); }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
  }

  Window inflated(double margin) const {
    Window w = *this;
    for (std::size_t i = 0; i < lower.size(); ++i) {
      w.lower[i] -= margin;
      w.upper[i] += margin;
    }
    return w;
  }

  void sample_point(RngStream& rng, std::span<double> out) const {
    for (std::size_t i = 0; i < lower.size(); ++i)
      out[i] = rng.uniform(lower[i], upper[i]);
  }
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;

  int dim() const { return static_cast<int>(center.size()); }
};

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

/// Volume of the unit ball in dimension d.
inline double unit_ball_volume(int d) {
  if (d < 1) throw std::invalid_argument("unit_ball_volume: d must be >= 1");
  return std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

inline double ball_volume(int d, double r) {
  if (d < 1) throw std::invalid_argument("ball_volume: d must be >= 1");
  if (r < 0.0) throw std::invalid_argument("ball_volume: negative radius");
  return unit_ball_volume(d) * std::pow(r, d);
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0)
    throw std::invalid_argument("regularized_incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_cf(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Volume of the spherical cap {x in B(0,r) : x_1 >= h}; h may be negative
/// (cap larger than a hemisphere) and is clamped at +-r.
inline double spherical_cap_volume(int d, double r, double h) {
  if (r < 0.0) throw std::invalid_argument("spherical_cap_volume: negative radius");
  if (r == 0.0 || h >= r) return 0.0;
  const double full = ball_volume(d, r);
  if (h <= -r) return full;
  if (h < 0.0) return full - spherical_cap_volume(d, r, -h);
  const double x = 1.0 - (h / r) * (h / r);
  return 0.5 * full * regularized_incomplete_beta((d + 1) / 2.0, 0.5, x);
}

/// Exact lens volume of B(c1, r1) and B(c2, r2) with |c1 - c2| = dist.
inline double two_ball_intersection_volume(int d, double r1, double r2,
                                           double dist) {
  if (d < 1) throw std::invalid_argument("two_ball_intersection_volume: d >= 1");
  if (r1 < 0.0 || r2 < 0.0 || dist < 0.0)
    throw std::invalid_argument("two_ball_intersection_volume: negative input");
  if (r1 == 0.0 || r2 == 0.0) return 0.0;
  if (dist >= r1 + r2) return 0.0;
  if (dist <= std::fabs(r1 - r2))
    return ball_volume(d, std::min(r1, r2));
  // Separating hyperplane at signed offset a1 from center 1.
  const double a1 = (dist * dist - r2 * r2 + r1 * r1) / (2.0 * dist);
  const double a2 = dist - a1;
  return spherical_cap_volume(d, r1, a1) + spherical_cap_volume(d, r2, a2);
}

enum class Combine { Union, Intersection };

inline bool point_in_ball(std::span<const double> x, const Ball& b) {
  return squared_distance(x, b.center) < b.radius * b.radius;
}

/// Hit-or-miss volume of a union or intersection of balls. Exact shortcuts
/// for k <= 2; otherwise Monte Carlo over the bounding box of the union
/// (intersection: box of the smallest ball).
inline McEstimate k_region_volume(std::span<const Ball> balls, Combine comb,
                                  std::uint64_t budget, RngStream& rng) {
  if (balls.empty())
    throw std::invalid_argument("k_region_volume: empty ball list");
  if (budget < 1) throw std::invalid_argument("k_region_volume: budget >= 1");
  const int d = balls[0].dim();

  if (balls.size() == 1) {
    return {ball_volume(d, balls[0].radius), 0.0, 0};
  }
  if (d == 1) {
    // Exact interval arithmetic.
    if (comb == Combine::Intersection) {
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (const Ball& b : balls) {
        lo = std::max(lo, b.center[0] - b.radius);
        hi = std::min(hi, b.center[0] + b.radius);
      }
      return {std::max(0.0, hi - lo), 0.0, 0};
    }
    std::vector<std::pair<double, double>> iv;
    iv.reserve(balls.size());
    for (const Ball& b : balls)
      if (b.radius > 0.0)
        iv.emplace_back(b.center[0] - b.radius, b.center[0] + b.radius);
    std::sort(iv.begin(), iv.end());
    double total = 0.0, cur_lo = 0.0, cur_hi = -std::numeric_limits<double>::infinity();
    bool open = false;
    for (const auto& [lo, hi] : iv) {
      if (!open || lo > cur_hi) {
        if (open) total += cur_hi - cur_lo;
        cur_lo = lo;
        cur_hi = hi;
        open = true;
      } else {
        cur_hi = std::max(cur_hi, hi);
      }
    }
    if (open) total += cur_hi - cur_lo;
    return {total, 0.0, 0};
  }
  if (balls.size() == 2) {
    const double dist = distance(balls[0].center, balls[1].center);
    const double lens =
        two_ball_intersection_volume(d, balls[0].radius, balls[1].radius, dist);
    if (comb == Combine::Intersection) return {lens, 0.0, 0};
    const double uni = ball_volume(d, balls[0].radius) +
                       ball_volume(d, balls[1].radius) - lens;
    return {uni, 0.0, 0};
  }

  // Sampling box.
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  if (comb == Combine::Union) {
    for (const Ball& b : balls) {
      for (int i = 0; i < d; ++i) {
        lo[i] = std::min(lo[i], b.center[i] - b.radius);
        hi[i] = std::max(hi[i], b.center[i] + b.radius);
      }
    }
  } else {
    const Ball* smallest = &balls[0];
    for (const Ball& b : balls)
      if (b.radius < smallest->radius) smallest = &b;
    if (smallest->radius == 0.0) return {0.0, 0.0, 0};
    for (int i = 0; i < d; ++i) {
      lo[i] = smallest->center[i] - smallest->radius;
      hi[i] = smallest->center[i] + smallest->radius;
    }
    // Cheap disjointness check makes many kernel evaluations exact zeros.
    for (std::size_t a = 0; a < balls.size(); ++a)
      for (std::size_t b = a + 1; b < balls.size(); ++b) {
        const double dist = distance(balls[a].center, balls[b].center);
        if (dist >= balls[a].radius + balls[b].radius) return {0.0, 0.0, 0};
      }
  }
  double box_vol = 1.0;
  for (int i = 0; i < d; ++i) box_vol *= hi[i] - lo[i];

  std::uint64_t hits = 0;
  std::vector<double> x(d);
  for (std::uint64_t it = 0; it < budget; ++it) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    bool in;
    if (comb == Combine::Union) {
      in = false;
      for (const Ball& b : balls)
        if (point_in_ball(x, b)) {
          in = true;
          break;
        }
    } else {
      in = true;
      for (const Ball& b : balls)
        if (!point_in_ball(x, b)) {
          in = false;
          break;
        }
    }
    hits += in ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(budget);
  const double se = box_vol * std::sqrt(std::max(p * (1.0 - p), 0.0) /
                                        static_cast<double>(budget));
  return {box_vol * p, se, budget};
}

/// Volume of ball ∩ box; exact in d = 1, hit-or-miss over the ball otherwise.
inline McEstimate ball_box_intersection_volume(const Ball& b, const Window& w,
                                               std::uint64_t budget,
                                               RngStream& rng) {
  const int d = b.dim();
  if (b.radius == 0.0) return {0.0, 0.0, 0};
  if (d == 1) {
    const double lo = std::max(b.center[0] - b.radius, w.lower[0]);
    const double hi = std::min(b.center[0] + b.radius, w.upper[0]);
    return {std::max(0.0, hi - lo), 0.0, 0};
  }
  // Rejection sample inside the ball's bounding box.
  std::uint64_t hits = 0;
  std::vector<double> x(d);
  for (std::uint64_t it = 0; it < budget; ++it) {
    for (int i = 0; i < d; ++i)
      x[i] = rng.uniform(b.center[i] - b.radius, b.center[i] + b.radius);
    if (point_in_ball(x, b) && w.contains(x)) ++hits;
  }
  double box_vol = std::pow(2.0 * b.radius, d);
  const double p = static_cast<double>(hits) / static_cast<double>(budget);
  const double se = box_vol * std::sqrt(std::max(p * (1.0 - p), 0.0) /
                                        static_cast<double>(budget));
  return {box_vol * p, se, budget};
}

/// Uniform point in the ball B(center, r) by rejection from its box.
inline void sample_in_ball(const Ball& b, RngStream& rng,
                           std::span<double> out) {
  const int d = b.dim();
  for (;;) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      out[i] = rng.uniform(-b.radius, b.radius);
      s += out[i] * out[i];
    }
    if (s < b.radius * b.radius) break;
  }
  for (int i = 0; i < d; ++i) out[i] += b.center[i];
}

/// Shape family s -> Q(s): either a fixed ball B(0, t) for every mark, or
/// the ball B(0, s) of the mark itself.
struct ShapeFamily {
  enum class Kind { FixedBall, BallOfRadius };
  Kind kind = Kind::FixedBall;
  double fixed_radius = 0.0;  // only for FixedBall

  static ShapeFamily fixed_ball(double t) {
    if (t < 0.0) throw std::invalid_argument("fixed_ball: negative radius");
    return {Kind::FixedBall, t};
  }
  static ShapeFamily ball_of_radius() { return {Kind::BallOfRadius, 0.0}; }

  double radius(double mark) const {
    return kind == Kind::FixedBall ? fixed_radius : mark;
  }
};

/// Mark measure nu on the mark space: a Dirac unit mass, or the power-law
/// density p s^{p-1} on (0, inf).
struct MarkMeasure {
  enum class Kind { Dirac, PowerLaw };
  Kind kind = Kind::Dirac;
  double exponent = 1.0;  // p, for PowerLaw

  static MarkMeasure dirac() { return {Kind::Dirac, 0.0}; }
  static MarkMeasure power_law(double p) {
    if (p <= 0.0) throw std::invalid_argument("power_law: p must be > 0");
    return {Kind::PowerLaw, p};
  }

  /// nu-mass of (0, S] (Dirac: total mass 1, any S > 0).
  double mass(double truncation) const {
    if (kind == Kind::Dirac) return 1.0;
    return std::pow(truncation, exponent);
  }

  /// Sample from nu restricted to (0, S] and normalized; inverse CDF
  /// s = S u^{1/p} for the power law.
  double sample(double truncation, RngStream& rng) const {
    if (kind == Kind::Dirac) return 0.0;
    return truncation * std::pow(rng.next_double(), 1.0 / exponent);
  }
};

}  // namespace avoidance
