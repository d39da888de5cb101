#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "avoidance/errors.hpp"
#include "avoidance/functionals.hpp"
#include "avoidance/geometry.hpp"
#include "avoidance/malliavin.hpp"
#include "avoidance/parallel.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

namespace detail {

/// Deterministic chunked outer Monte Carlo loop: chunking depends on the
/// budget only, each chunk gets its own forked stream, chunks may run on any
/// number of workers.
template <class Kernel>
McEstimate outer_mc(std::uint64_t budget, RngStream& stream, unsigned workers,
                    Kernel&& kernel) {
  if (budget < 2) throw std::invalid_argument("outer_mc: budget >= 2");
  constexpr std::uint64_t kChunk = 4096;
  const std::uint64_t chunks = (budget + kChunk - 1) / kChunk;
  std::vector<double> sums(chunks, 0.0), sums2(chunks, 0.0);
  parallel_for(chunks, workers, [&](std::uint64_t c) {
    RngStream rng = stream.fork(c);
    const std::uint64_t lo = c * kChunk;
    const std::uint64_t hi = std::min(budget, lo + kChunk);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double v = kernel(rng);
      s += v;
      s2 += v * v;
    }
    sums[c] = s;
    sums2[c] = s2;
  });
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    sum += sums[c];
    sum2 += sums2[c];
  }
  const double n = static_cast<double>(budget);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var), budget};
}

/// Support scale of the shape family: grain radius for dirac marks, the mark
/// truncation point for power-law marks.
inline double support_scale(const ModelSpec& model) {
  return model.marks.kind == MarkMeasure::Kind::Dirac
             ? model.shapes.fixed_radius
             : mark_truncation(model.dim);
}

/// Draws a mark, accumulating the importance weight (total truncated
/// nu-mass; 1 for dirac marks).
inline double draw_mark(const ModelSpec& model, double truncation,
                        RngStream& rng, double& weight) {
  if (model.marks.kind == MarkMeasure::Kind::Dirac) return 0.0;
  weight *= model.marks.mass(truncation);
  return model.marks.sample(truncation, rng);
}

inline double shape_radius(const ModelSpec& model, double mark) {
  return model.shapes.radius(mark);
}

inline double exp_neg_union(std::span<const Ball> balls, RngStream& rng,
                            std::uint64_t inner_budget) {
  return std::exp(
      -k_region_volume(balls, Combine::Union, inner_budget, rng).value);
}

}  // namespace detail

/// V(z) of the pair kernel: ∫∫ e^{-l(Q(s)) - l(Q(t))} (e^{l(Q(0,s) ∩ Q(z,t))} - 1).
/// For dirac marks this is exact; power-law marks are sampled by the caller.
inline double pair_kernel_exact(int d, double r1, double r2, double dist) {
  const double lens = two_ball_intersection_volume(d, r1, r2, dist);
  if (lens == 0.0) return 0.0;
  return std::exp(-(ball_volume(d, r1) + ball_volume(d, r2))) * std::expm1(lens);
}

/// C1(lambda) = ∫_{U_lambda} V(z) dx dz, with U_lambda constraining
/// x + lambda^{-1/d} z to stay in the domain. Equals lambda Var(F_lambda).
inline McEstimate c1_lambda(const ModelSpec& model, double lambda,
                            std::uint64_t budget, RngStream& stream,
                            unsigned workers = 1) {
  if (lambda <= 0.0) throw std::invalid_argument("c1_lambda: lambda > 0");
  const int d = model.dim;
  const double K = detail::support_scale(model);
  const Ball zball{std::vector<double>(d, 0.0), 2.0 * K};
  const double zvol = ball_volume(d, 2.0 * K);
  const double shrink = std::pow(lambda, -1.0 / d);
  return detail::outer_mc(budget, stream, workers, [&](RngStream& rng) {
    std::vector<double> x(d), z(d), y(d);
    model.domain.sample_point(rng, x);
    sample_in_ball(zball, rng, z);
    for (int i = 0; i < d; ++i) y[i] = x[i] + shrink * z[i];
    if (!model.domain.contains(y)) return 0.0;
    double w = model.domain.volume() * zvol;
    const double s = detail::draw_mark(model, K, rng, w);
    const double t = detail::draw_mark(model, K, rng, w);
    const double dist = std::sqrt(squared_distance(z, std::vector<double>(d, 0.0)));
    return w * pair_kernel_exact(d, detail::shape_radius(model, s),
                                 detail::shape_radius(model, t), dist);
  });
}

/// C1 = l(domain) ∫_{R^d} V(z) dz (the lambda -> infinity limit).
inline McEstimate c1_limit(const ModelSpec& model, std::uint64_t budget,
                           RngStream& stream, unsigned workers = 1) {
  const int d = model.dim;
  const double K = detail::support_scale(model);
  const Ball zball{std::vector<double>(d, 0.0), 2.0 * K};
  const double zvol = ball_volume(d, 2.0 * K);
  return detail::outer_mc(budget, stream, workers, [&](RngStream& rng) {
    std::vector<double> z(d);
    sample_in_ball(zball, rng, z);
    double w = model.domain.volume() * zvol;
    const double s = detail::draw_mark(model, K, rng, w);
    const double t = detail::draw_mark(model, K, rng, w);
    const double dist = std::sqrt(squared_distance(z, std::vector<double>(d, 0.0)));
    return w * pair_kernel_exact(d, detail::shape_radius(model, s),
                                 detail::shape_radius(model, t), dist);
  });
}

enum class C2Kind { A, B, C, D, E };

/// Kernel integrals behind the Berry-Esseen constants. Free translation
/// variables are sampled uniformly on balls that provably contain the kernel
/// support (radii in units of the shape support scale):
///   a: e^{-l(∪_{0..2})} l(∩_{0..2}),                   z in 2K x 2K
///   b: e^{-l(∪_{0..3})} l(Q0∩Q1) l(Q2∩Q3) 1(overlap), z in 2K x 6K x 6K
///   c: e^{-l(∪_{0..3})} l(∩_{0..3}),                   z in (2K)^3
///   d: e^{-l(∪_{0..5})} l(∩_{0..2}) l(∩_{3..5}) 1(overlap), 2K,2K,6K,6K,6K
///   e: e^{-l(∪_{0..3})} l(∩_{0..2}) l(∩_{1..3}),       z in 2K x 2K x 4K
inline McEstimate c2_constant(C2Kind kind, const ModelSpec& model,
                              std::uint64_t budget, RngStream& stream,
                              unsigned workers = 1,
                              std::uint64_t inner_budget = 4096) {
  const int d = model.dim;
  const double K = detail::support_scale(model);
  std::vector<double> radii;  // support radii of the free z's, units of K
  switch (kind) {
    case C2Kind::A: radii = {2.0, 2.0}; break;
    case C2Kind::B: radii = {2.0, 6.0, 6.0}; break;
    case C2Kind::C: radii = {2.0, 2.0, 2.0}; break;
    case C2Kind::D: radii = {2.0, 2.0, 6.0, 6.0, 6.0}; break;
    case C2Kind::E: radii = {2.0, 2.0, 4.0}; break;
  }
  const std::size_t nz = radii.size();
  const std::size_t nballs = nz + 1;
  double zvol = 1.0;
  for (double r : radii) zvol *= ball_volume(d, r * K);

  auto overlap = [](std::span<const Ball> balls, std::size_t a0, std::size_t a1,
                    std::size_t b0, std::size_t b1) {
    for (std::size_t i = a0; i <= a1; ++i)
      for (std::size_t j = b0; j <= b1; ++j)
        if (distance(balls[i].center, balls[j].center) <
            balls[i].radius + balls[j].radius)
          return true;
    return false;
  };

  return detail::outer_mc(budget, stream, workers, [&](RngStream& rng) {
    double w = model.domain.volume() * zvol;
    std::vector<Ball> balls(nballs);
    balls[0].center.assign(d, 0.0);
    for (std::size_t i = 0; i < nz; ++i) {
      balls[i + 1].center.resize(d);
      Ball sup{std::vector<double>(d, 0.0), radii[i] * K};
      sample_in_ball(sup, rng, balls[i + 1].center);
    }
    for (std::size_t i = 0; i < nballs; ++i) {
      const double mark = detail::draw_mark(model, K, rng, w);
      balls[i].radius = detail::shape_radius(model, mark);
    }
    RngStream inner = rng.fork(detail::kGolden);
    auto inter = [&](std::size_t lo, std::size_t hi) {
      return k_region_volume({balls.data() + lo, hi - lo + 1},
                             Combine::Intersection, inner_budget, inner)
          .value;
    };
    switch (kind) {
      case C2Kind::A: {
        const double cap = inter(0, 2);
        if (cap == 0.0) return 0.0;
        return w * cap *
               detail::exp_neg_union({balls.data(), 3}, inner, inner_budget);
      }
      case C2Kind::B: {
        if (!overlap(balls, 0, 1, 2, 3)) return 0.0;
        const double i01 = two_ball_intersection_volume(
            d, balls[0].radius, balls[1].radius,
            distance(balls[0].center, balls[1].center));
        if (i01 == 0.0) return 0.0;
        const double i23 = two_ball_intersection_volume(
            d, balls[2].radius, balls[3].radius,
            distance(balls[2].center, balls[3].center));
        if (i23 == 0.0) return 0.0;
        return w * i01 * i23 *
               detail::exp_neg_union({balls.data(), 4}, inner, inner_budget);
      }
      case C2Kind::C: {
        const double cap = inter(0, 3);
        if (cap == 0.0) return 0.0;
        return w * cap *
               detail::exp_neg_union({balls.data(), 4}, inner, inner_budget);
      }
      case C2Kind::D: {
        if (!overlap(balls, 0, 2, 3, 5)) return 0.0;
        const double i012 = inter(0, 2);
        if (i012 == 0.0) return 0.0;
        const double i345 = inter(3, 5);
        if (i345 == 0.0) return 0.0;
        return w * i012 * i345 *
               detail::exp_neg_union({balls.data(), 6}, inner, inner_budget);
      }
      case C2Kind::E: {
        const double i012 = inter(0, 2);
        if (i012 == 0.0) return 0.0;
        const double i123 = inter(1, 3);
        if (i123 == 0.0) return 0.0;
        return w * i012 * i123 *
               detail::exp_neg_union({balls.data(), 4}, inner, inner_budget);
      }
    }
    return 0.0;
  });
}

/// Wasserstein bound of the standardized functional:
/// lambda^{-1/2} (C2a / C1(lambda)^{3/2} + C2b^{1/2} / C1(lambda)).
inline double wasserstein_bound(double c1_lam, double c2a, double c2b,
                                double lambda) {
  if (!(c1_lam > 0.0))
    throw DegenerateVarianceError("wasserstein_bound: C1(lambda) must be > 0");
  return (c2a / std::pow(c1_lam, 1.5) + std::sqrt(c2b) / c1_lam) /
         std::sqrt(lambda);
}

/// Cleaner variant lambda^{-1/2} (C2c^{1/2} + C2b^{1/2}) / C1(lambda).
inline double wasserstein_bound_clean(double c1_lam, double c2b, double c2c,
                                      double lambda) {
  if (!(c1_lam > 0.0))
    throw DegenerateVarianceError("wasserstein_bound_clean: C1(lambda) must be > 0");
  return (std::sqrt(c2c) + std::sqrt(c2b)) / (c1_lam * std::sqrt(lambda));
}

/// Kolmogorov bound:
/// C1(lambda)^{-1} lambda^{-1/2} [ (4+sqrt(2 pi))/8 C2a/C1^{1/2} + C2b^{1/2}
///   + (1/2) C2d^{1/2} / (lambda^{1/2} C1^{1/2}) + (C2c + 9 C2e)^{1/2} ].
inline double kolmogorov_bound(double c1_lam, double c2a, double c2b,
                               double c2c, double c2d, double c2e,
                               double lambda) {
  if (!(c1_lam > 0.0))
    throw DegenerateVarianceError("kolmogorov_bound: C1(lambda) must be > 0");
  const double root_c1 = std::sqrt(c1_lam);
  const double inner = (4.0 + std::sqrt(2.0 * M_PI)) / 8.0 * c2a / root_c1 +
                       std::sqrt(c2b) +
                       0.5 * std::sqrt(c2d) / (std::sqrt(lambda) * root_c1) +
                       std::sqrt(c2c + 9.0 * c2e);
  return inner / (c1_lam * std::sqrt(lambda));
}

/// Explicit rate constant for the germ-grain model, valid for
/// lambda > (2t)^d:
///   8^{d/2} e^{-omega t^d / 2} (1 + 3 omega^{1/2} t^{d/2})
///   / [ e^{-2 omega t^d} (1 - 2t/lambda^{1/d})^d omega t^d (e^{omega (t/2)^d} - 1) ].
inline double explicit_germ_constant(int d, double t, double lambda) {
  if (d < 1 || t <= 0.0)
    throw std::invalid_argument("explicit_germ_constant: d >= 1, t > 0");
  if (!(lambda > std::pow(2.0 * t, d)))
    throw OutOfRegimeError("explicit_germ_constant: requires lambda > (2t)^d");
  const double omega = unit_ball_volume(d);
  const double otd = omega * std::pow(t, d);
  const double numer = std::pow(8.0, d / 2.0) * std::exp(-otd / 2.0) *
                       (1.0 + 3.0 * std::sqrt(omega) * std::pow(t, d / 2.0));
  const double denom = std::exp(-2.0 * otd) *
                       std::pow(1.0 - 2.0 * t / std::pow(lambda, 1.0 / d), d) *
                       otd * std::expm1(omega * std::pow(t / 2.0, d));
  return numer / denom;
}

/// D1 = C1 - (∫ e^{-l(Q(s))/l(A)} l(Q(s)) dnu(s))^2; finite-measure marks only.
inline McEstimate d1_limit(const ModelSpec& model, std::uint64_t budget,
                           RngStream& stream, unsigned workers = 1) {
  if (model.marks.kind != MarkMeasure::Kind::Dirac)
    throw OutOfRegimeError("d1_limit: requires a finite mark measure");
  const McEstimate c1 = c1_limit(model, budget, stream, workers);
  const double q = ball_volume(model.dim, model.shapes.fixed_radius);
  const double correction = std::exp(-q / model.domain.volume()) * q;
  return {c1.value - correction * correction, c1.se, c1.n};
}

/// alpha_n = ∫ (1 - b)^n n b dx dnu(s) with b = l(Q_n(x,s) ∩ A)/l(A).
inline McEstimate alpha_n(const ModelSpec& model, std::uint64_t n,
                          std::uint64_t budget, RngStream& stream,
                          unsigned workers = 1,
                          std::uint64_t inner_budget = 4096) {
  if (model.marks.kind != MarkMeasure::Kind::Dirac)
    throw OutOfRegimeError("alpha_n: requires a finite mark measure");
  const int d = model.dim;
  const double r = model.shapes.fixed_radius *
                   std::pow(static_cast<double>(n), -1.0 / d);
  const double volA = model.domain.volume();
  const double nd = static_cast<double>(n);
  return detail::outer_mc(budget, stream, workers, [&](RngStream& rng) {
    std::vector<double> x(d);
    model.domain.sample_point(rng, x);
    Ball shape{{x.begin(), x.end()}, r};
    RngStream inner = rng.fork(detail::kGolden);
    const double cap =
        ball_box_intersection_volume(shape, model.domain, inner_budget, inner)
            .value;
    const double b = nd * cap / volA;
    if (b >= nd) return 0.0;
    return volA * std::pow(1.0 - b / nd, nd) * b;
  });
}

/// Evaluated constants and assembled bounds for one model at one scale.
struct ConstantsReport {
  std::string model_name;
  double lambda = 0.0;
  McEstimate c1_lam;
  McEstimate c1_lim;
  std::map<char, McEstimate> c2;
  McEstimate d1;
  bool d1_valid = false;
  McEstimate alpha;
  bool alpha_valid = false;
  double bound_wasserstein = 0.0;
  double bound_kolmogorov = 0.0;
};

inline ConstantsReport evaluate_constants(const ModelSpec& model, double lambda,
                                          std::uint64_t budget,
                                          std::uint64_t master_seed,
                                          unsigned workers = 1) {
  ConstantsReport rep;
  rep.model_name = model.kind == ModelKind::GermGrain     ? "germ-grain"
                   : model.kind == ModelKind::Quantization ? "quantization"
                                                           : "generic-avoidance";
  rep.lambda = lambda;
  RngStream s1(master_seed, 101), s2(master_seed, 102);
  rep.c1_lam = c1_lambda(model, lambda, budget, s1, workers);
  rep.c1_lim = c1_limit(model, budget, s2, workers);
  const std::array<C2Kind, 5> kinds{C2Kind::A, C2Kind::B, C2Kind::C, C2Kind::D,
                                    C2Kind::E};
  const std::array<char, 5> names{'a', 'b', 'c', 'd', 'e'};
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    RngStream s(master_seed, 110 + i);
    rep.c2[names[i]] = c2_constant(kinds[i], model, budget, s, workers);
  }
  if (model.marks.kind == MarkMeasure::Kind::Dirac) {
    RngStream s3(master_seed, 103), s4(master_seed, 104);
    rep.d1 = d1_limit(model, budget, s3, workers);
    rep.d1_valid = true;
    rep.alpha = alpha_n(model, static_cast<std::uint64_t>(lambda), budget, s4,
                        workers);
    rep.alpha_valid = true;
  }
  rep.bound_wasserstein = wasserstein_bound(rep.c1_lam.value,
                                            rep.c2.at('a').value,
                                            rep.c2.at('b').value, lambda);
  rep.bound_kolmogorov = kolmogorov_bound(
      rep.c1_lam.value, rep.c2.at('a').value, rep.c2.at('b').value,
      rep.c2.at('c').value, rep.c2.at('d').value, rep.c2.at('e').value, lambda);
  return rep;
}

}  // namespace avoidance
