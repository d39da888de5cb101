#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "avoidance/functionals.hpp"
#include "avoidance/geometry.hpp"
#include "avoidance/ppp.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

/// ∫_0^1 t^k e^{-a t} dt. Alternating series for a < 1; otherwise the
/// lower-incomplete-gamma series e^{-a} Σ_j a^j / ((k+1)...(k+1+j)), whose
/// terms are positive (no cancellation).
inline double mehler_integral(std::uint64_t k, double a) {
  if (a < 0.0) throw std::invalid_argument("mehler_integral: a must be >= 0");
  const double kd = static_cast<double>(k);
  if (a < 1.0) {
    double term = 1.0 / (kd + 1.0), sum = term;
    for (int j = 1; j <= 60; ++j) {
      term *= -a * (kd + j) / (static_cast<double>(j) * (kd + j + 1.0));
      sum += term;
      if (std::fabs(term) < 1e-16 * std::fabs(sum)) break;
    }
    return sum;
  }
  double term = 1.0 / (kd + 1.0), sum = term;
  for (int j = 1; j < 10000; ++j) {
    term *= a / (kd + 1.0 + j);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return std::exp(-a) * sum;
}

/// n-th chaos term of the avoidance indicator 1(eta(A) = 0), as a function
/// of the observed count k = eta(A) and the mass a = mu(A):
///   (e^{-a}/n!) Σ_{j=0}^{n} (-1)^j C(n,j) C(k,j) j! a^{n-j}.
inline double chaos_term_indicator(int n, std::uint64_t k, double a) {
  if (n < 1) throw std::invalid_argument("chaos_term_indicator: n >= 1");
  const double kd = static_cast<double>(k);
  double sum = 0.0;
  if (n <= 20) {
    for (int j = 0; j <= n; ++j) {
      if (static_cast<std::uint64_t>(j) > k) break;
      // C(n,j) * k (k-1) ... (k-j+1)
      double coeff = 1.0;
      for (int i = 0; i < j; ++i)
        coeff *= (static_cast<double>(n - i) / static_cast<double>(i + 1)) *
                 (kd - i);
      const double term = coeff * std::pow(a, static_cast<double>(n - j));
      sum += (j % 2 == 0) ? term : -term;
    }
    double nfact = 1.0;
    for (int i = 2; i <= n; ++i) nfact *= i;
    return std::exp(-a) * sum / nfact;
  }
  // Log-space magnitudes for large orders.
  for (int j = 0; j <= n; ++j) {
    if (static_cast<std::uint64_t>(j) > k) break;
    double lg = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) -
                std::lgamma(n - j + 1.0) + std::lgamma(kd + 1.0) -
                std::lgamma(kd - j + 1.0);
    if (a > 0.0) lg += (n - j) * std::log(a);
    else if (n - j > 0) continue;
    const double term = std::exp(lg - std::lgamma(n + 1.0) - a);
    sum += (j % 2 == 0) ? term : -term;
  }
  return sum;
}

namespace detail {

/// Domain clipped to the axis box of B(z, reach); empty optional if disjoint.
inline std::optional<Window> clip_to_reach(const Window& domain,
                                           std::span<const double> z,
                                           double reach) {
  std::vector<double> lo(domain.dim()), hi(domain.dim());
  for (int i = 0; i < domain.dim(); ++i) {
    lo[i] = std::max(domain.lower[i], z[i] - reach);
    hi[i] = std::min(domain.upper[i], z[i] + reach);
    if (!(lo[i] < hi[i])) return std::nullopt;
  }
  return Window(std::move(lo), std::move(hi));
}

}  // namespace detail

/// Closed-form difference operator
///   D_z F = -∫ 1(eta(x + Q_s) = 0) 1(z in x + Q_s) dx dnu(s),
/// with the mark integral done analytically for power-law marks. `pattern`
/// is eta without the added point z.
inline double difference_operator(const ModelSpec& model,
                                  const PointPattern& pattern,
                                  const GridIndex& index,
                                  std::span<const double> z, double scale,
                                  const QuadratureSpec& quad, RngStream& rng) {
  const double shrink = model.shrink(scale);
  if (model.marks.kind == MarkMeasure::Kind::Dirac) {
    const double r = model.shapes.fixed_radius * shrink;
    auto region = detail::clip_to_reach(model.domain, z, r);
    if (!region) return 0.0;
    const double r2 = r * r;
    return -detail::integrate(*region, quad, rng,
                              [&](std::span<const double> x) {
                                if (squared_distance(x, z) >= r2) return 0.0;
                                Ball b{{x.begin(), x.end()}, r};
                                return index.count_in_ball(b) == 0 ? 1.0 : 0.0;
                              });
  }
  // Power-law marks: -scale^{p/d} ∫ max(0, nnd(x)^p - |x-z|^p) dx.
  const double p = model.marks.exponent;
  const double factor = std::pow(scale, p / model.dim);
  return -factor * detail::integrate(
                       model.domain, quad, rng, [&](std::span<const double> x) {
                         const double nn = index.nearest_distance(x);
                         const double dz = distance(x, z);
                         return dz < nn ? std::pow(nn, p) - std::pow(dz, p) : 0.0;
                       });
}

/// Pathwise difference F(eta + delta_z) - F(eta), with common quadrature
/// nodes on both evaluations.
inline double difference_operator_pathwise(const ModelSpec& model,
                                           const PointPattern& pattern,
                                           std::span<const double> z,
                                           double scale,
                                           const QuadratureSpec& quad,
                                           RngStream& rng) {
  PointPattern with_z = pattern;
  with_z.push_back(z);
  RngStream nodes = rng.fork(11);
  RngStream nodes_copy = nodes;
  const double before = avoidance_value(model, pattern, scale, quad, nodes);
  const double after = avoidance_value(model, with_z, scale, quad, nodes_copy);
  return after - before;
}

/// Truncation point for power-law mark sampling: the kernels carry an
/// e^{-omega_d s^d} kill factor, so marks beyond S contribute < 1e-7.
inline double mark_truncation(int d) {
  return std::pow(2.0 * std::log(1e7) / unit_ball_volume(d), 1.0 / d);
}

/// D_z L^{-1}(F - EF) = ∫ mehler(eta(x+Q_s), mu(x+Q_s)) 1(z in x+Q_s),
/// always >= 0. Power-law marks are sampled by inverse CDF on the
/// admissible range (|x-z| scale^{1/d}, S].
inline double inverse_ou_difference(const ModelSpec& model,
                                    const PointPattern& pattern,
                                    const GridIndex& index,
                                    std::span<const double> z, double scale,
                                    const QuadratureSpec& quad, RngStream& rng) {
  const int d = model.dim;
  const double shrink = model.shrink(scale);
  const double omega = unit_ball_volume(d);
  if (model.marks.kind == MarkMeasure::Kind::Dirac) {
    const double t = model.shapes.fixed_radius;
    const double r = t * shrink;
    auto region = detail::clip_to_reach(model.domain, z, r);
    if (!region) return 0.0;
    const double mass = omega * std::pow(t, d);  // scale * l(Q_scale) = l(Q)
    const double r2 = r * r;
    return detail::integrate(*region, quad, rng,
                             [&](std::span<const double> x) {
                               if (squared_distance(x, z) >= r2) return 0.0;
                               Ball b{{x.begin(), x.end()}, r};
                               return mehler_integral(index.count_in_ball(b), mass);
                             });
  }
  const double p = model.marks.exponent;
  const double S = mark_truncation(d);
  const double Sp = std::pow(S, p);
  return detail::integrate(
      model.domain, quad, rng, [&](std::span<const double> x) {
        const double s_lo = distance(x, z) / shrink;
        if (s_lo >= S) return 0.0;
        const double lo_p = std::pow(s_lo, p);
        const double s =
            std::pow(lo_p + rng.next_double() * (Sp - lo_p), 1.0 / p);
        Ball b{{x.begin(), x.end()}, s * shrink};
        return (Sp - lo_p) *
               mehler_integral(index.count_in_ball(b), omega * std::pow(s, d));
      });
}

/// Monte Carlo estimate of scale * ∫ D_z F * (-D_z L^{-1}(F - EF)) dz over
/// the pattern's (inflated) window; equals Var(F) in expectation. The two
/// factors use independent node streams so their product stays unbiased.
inline McEstimate inner_product_DF_DL(const ModelSpec& model,
                                      const PointPattern& pattern,
                                      const GridIndex& index, double scale,
                                      std::uint64_t z_budget,
                                      const QuadratureSpec& quad,
                                      RngStream& rng) {
  if (z_budget < 2)
    throw std::invalid_argument("inner_product_DF_DL: z_budget >= 2");
  const Window& zwin = pattern.window;
  const double zvol = zwin.volume();
  std::vector<double> z(model.dim);
  double sum = 0.0, sum2 = 0.0;
  RngStream z_rng = rng.fork(21);
  RngStream a_rng = rng.fork(22);
  RngStream b_rng = rng.fork(23);
  for (std::uint64_t i = 0; i < z_budget; ++i) {
    zwin.sample_point(z_rng, z);
    const double df =
        difference_operator(model, pattern, index, z, scale, quad, a_rng);
    const double dl =
        inverse_ou_difference(model, pattern, index, z, scale, quad, b_rng);
    const double v = scale * zvol * df * (-dl);
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(z_budget);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var), z_budget};
}

}  // namespace avoidance
