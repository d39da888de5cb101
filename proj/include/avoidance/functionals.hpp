#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "avoidance/errors.hpp"
#include "avoidance/geometry.hpp"
#include "avoidance/parallel.hpp"
#include "avoidance/ppp.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

enum class ModelKind { GenericAvoidance, GermGrain, Quantization };
enum class ProcessKind { Poisson, Binomial };

/// Full description of an avoidance functional: domain, mark measure, shape
/// family, and how the underlying point process is generated.
struct ModelSpec {
  ModelKind kind = ModelKind::GermGrain;
  int dim = 1;
  Window domain;
  ShapeFamily shapes;
  MarkMeasure marks;
  ProcessKind process = ProcessKind::Poisson;
  double radius = 0.0;    // germ-grain grain radius t
  double exponent = 0.0;  // quantization exponent p

  static ModelSpec germ_grain(int d, double t) {
    ModelSpec m{ModelKind::GermGrain, d, Window::unit_cube(d),
                ShapeFamily::fixed_ball(t), MarkMeasure::dirac(),
                ProcessKind::Poisson, t, 0.0};
    return m;
  }

  static ModelSpec quantization(int d, double p) {
    ModelSpec m{ModelKind::Quantization, d, Window::unit_cube(d),
                ShapeFamily::ball_of_radius(), MarkMeasure::power_law(p),
                ProcessKind::Poisson, 0.0, p};
    return m;
  }

  /// Shape scaling factor: shapes are contracted by scale^{-1/d}.
  double shrink(double scale) const { return std::pow(scale, -1.0 / dim); }
};

enum class QuadMethod { MonteCarlo, Lattice, Exact };

struct QuadratureSpec {
  QuadMethod method = QuadMethod::MonteCarlo;
  std::uint64_t budget = 100000;
};

namespace detail {

/// Antiderivative of |t|^p: sign(t)|t|^{p+1}/(p+1).
inline double abs_pow_antideriv(double t, double p) {
  const double v = std::pow(std::fabs(t), p + 1.0) / (p + 1.0);
  return t >= 0.0 ? v : -v;
}

/// Integrates `f` over the window with the requested quadrature.
template <class F>
double integrate(const Window& w, const QuadratureSpec& q, RngStream& rng,
                 F&& f) {
  const int d = w.dim();
  std::vector<double> x(d);
  double sum = 0.0;
  if (q.method == QuadMethod::MonteCarlo) {
    for (std::uint64_t i = 0; i < q.budget; ++i) {
      w.sample_point(rng, x);
      sum += f(std::span<const double>(x));
    }
    return w.volume() * sum / static_cast<double>(q.budget);
  }
  if (q.method == QuadMethod::Lattice) {
    const auto side = static_cast<std::uint64_t>(
        std::ceil(std::pow(static_cast<double>(q.budget), 1.0 / d)));
    std::vector<std::uint64_t> idx(d, 0);
    std::uint64_t total = 1;
    for (int i = 0; i < d; ++i) total *= side;
    for (std::uint64_t it = 0; it < total; ++it) {
      for (int i = 0; i < d; ++i) {
        const double frac = (static_cast<double>(idx[i]) + 0.5) /
                            static_cast<double>(side);
        x[i] = w.lower[i] + frac * (w.upper[i] - w.lower[i]);
      }
      sum += f(std::span<const double>(x));
      int axis = 0;
      while (axis < d && ++idx[axis] == side) {
        idx[axis] = 0;
        ++axis;
      }
    }
    return w.volume() * sum / static_cast<double>(total);
  }
  throw std::invalid_argument("integrate: exact quadrature needs a model-specific path");
}

inline std::vector<double> sorted_coords_1d(const PointPattern& p) {
  std::vector<double> z(p.coords);
  std::sort(z.begin(), z.end());
  return z;
}

/// Length of [a,b] not covered by any interval [z - r, z + r].
inline double uncovered_length_1d(const std::vector<double>& sorted_z, double r,
                                  double a, double b) {
  double cur = a, uncov = 0.0;
  for (double z : sorted_z) {
    const double lo = z - r, hi = z + r;
    if (lo > cur) uncov += std::min(lo, b) - cur;
    cur = std::max(cur, hi);
    if (cur >= b) return uncov;
  }
  if (cur < b) uncov += b - cur;
  return uncov;
}

/// Exact ∫_a^b nnd(x)^p dx for a sorted 1-d pattern, with the largest
/// nearest-neighbor distance attained on [a,b] reported for margin checks.
inline double nearest_power_integral_1d(const std::vector<double>& z, double p,
                                        double a, double b, double* max_nnd) {
  if (z.empty()) throw EmptyPatternError("nearest_power_integral_1d: empty pattern");
  double integral = 0.0, worst = 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double mid_lo = i == 0 ? -inf : 0.5 * (z[i - 1] + z[i]);
    const double mid_hi = i + 1 == z.size() ? inf : 0.5 * (z[i] + z[i + 1]);
    const double lo = std::max(a, mid_lo), hi = std::min(b, mid_hi);
    if (lo >= hi) continue;
    integral += abs_pow_antideriv(hi - z[i], p) - abs_pow_antideriv(lo - z[i], p);
    worst = std::max({worst, std::fabs(lo - z[i]), std::fabs(hi - z[i])});
  }
  if (max_nnd) *max_nnd = worst;
  return integral;
}

}  // namespace detail

/// F_lambda on a realized pattern: integral over (x, s) of the indicator
/// that x + scale^{-1/d} Q(s) is avoided. For power-law marks the mark
/// integral is done analytically through the nearest-neighbor distance,
/// giving scale^{p/d} ∫ nnd(x)^p dx. The pattern must already cover the
/// domain inflated by the largest relevant shape radius.
inline double avoidance_value(const ModelSpec& model, const PointPattern& pattern,
                              const GridIndex& index, double scale,
                              const QuadratureSpec& quad, RngStream& rng) {
  const double shrink = model.shrink(scale);
  if (model.marks.kind == MarkMeasure::Kind::Dirac) {
    const double r = model.shapes.fixed_radius * shrink;
    if (quad.method == QuadMethod::Exact) {
      if (model.dim != 1)
        throw std::invalid_argument("avoidance_value: exact path is 1-d only");
      return detail::uncovered_length_1d(detail::sorted_coords_1d(pattern), r,
                                         model.domain.lower[0],
                                         model.domain.upper[0]);
    }
    return detail::integrate(model.domain, quad, rng,
                             [&](std::span<const double> x) {
                               Ball b{{x.begin(), x.end()}, r};
                               return index.count_in_ball(b) == 0 ? 1.0 : 0.0;
                             });
  }
  // Power-law marks: F = scale^{p/d} * ∫ nnd(x)^p dx.
  const double p = model.marks.exponent;
  if (pattern.size() == 0)
    throw EmptyPatternError("avoidance_value: empty pattern for quantization");
  const double factor = std::pow(scale, p / model.dim);
  if (quad.method == QuadMethod::Exact) {
    if (model.dim != 1)
      throw std::invalid_argument("avoidance_value: exact path is 1-d only");
    return factor * detail::nearest_power_integral_1d(
                        detail::sorted_coords_1d(pattern), p,
                        model.domain.lower[0], model.domain.upper[0], nullptr);
  }
  return factor * detail::integrate(model.domain, quad, rng,
                                    [&](std::span<const double> x) {
                                      return std::pow(index.nearest_distance(x), p);
                                    });
}

inline double avoidance_value(const ModelSpec& model, const PointPattern& pattern,
                              double scale, const QuadratureSpec& quad,
                              RngStream& rng) {
  GridIndex index(pattern);
  return avoidance_value(model, pattern, index, scale, quad, rng);
}

/// Volume of (∪_z B(z, t)) ∩ box. The pattern should be sampled on the box
/// inflated by t so exterior germs contribute.
inline double germ_grain_volume(const PointPattern& pattern, double t,
                                const Window& box, const QuadratureSpec& quad,
                                RngStream& rng) {
  if (pattern.size() == 0) return 0.0;
  if (quad.method == QuadMethod::Exact) {
    if (box.dim() != 1)
      throw std::invalid_argument("germ_grain_volume: exact path is 1-d only");
    return box.volume() - detail::uncovered_length_1d(
                              detail::sorted_coords_1d(pattern), t,
                              box.lower[0], box.upper[0]);
  }
  GridIndex index(pattern);
  const double uncovered =
      detail::integrate(box, quad, rng, [&](std::span<const double> x) {
        Ball b{{x.begin(), x.end()}, t};
        return index.count_in_ball(b) == 0 ? 1.0 : 0.0;
      });
  return box.volume() - uncovered;
}

/// ∫_{[0,1]^d} nnd(x)^p dx on a given pattern (no inflation management).
inline double quantization_error(const PointPattern& pattern, double p,
                                 const QuadratureSpec& quad, RngStream& rng) {
  if (pattern.size() == 0)
    throw EmptyPatternError("quantization_error: empty pattern");
  const Window unit = Window::unit_cube(pattern.dim);
  if (quad.method == QuadMethod::Exact) {
    if (pattern.dim != 1)
      throw std::invalid_argument("quantization_error: exact path is 1-d only");
    return detail::nearest_power_integral_1d(detail::sorted_coords_1d(pattern),
                                             p, 0.0, 1.0, nullptr);
  }
  GridIndex index(pattern);
  return detail::integrate(unit, quad, rng, [&](std::span<const double> x) {
    return std::pow(index.nearest_distance(x), p);
  });
}

/// Initial inflation margin for the quantization model: twice the radius at
/// which a ball is empty with probability lambda^{-2}, floored so small
/// lambda still gets a usable window.
inline double quantization_margin(int d, double lambda) {
  const double r =
      2.0 * std::pow(d * std::log(std::max(lambda, 2.72)) /
                         (unit_ball_volume(d) * lambda),
                     1.0 / d);
  return std::max(r, 0.05);
}

namespace detail {

/// Adds the Poisson points of the annulus inflated(new_margin) \
/// inflated(old_margin) to the pattern (exact by Poisson independence).
inline void extend_pattern_annulus(PointPattern& pattern, const Window& domain,
                                   double lambda, double old_margin,
                                   double new_margin, RngStream& rng) {
  const Window outer = domain.inflated(new_margin);
  const Window inner = domain.inflated(old_margin);
  const double annulus_vol = outer.volume() - inner.volume();
  const std::uint64_t n = rng.poisson(lambda * annulus_vol);
  std::vector<double> x(domain.dim());
  for (std::uint64_t i = 0; i < n; ++i) {
    do {
      outer.sample_point(rng, x);
    } while (inner.contains(x));
    pattern.push_back(x);
  }
  pattern.window = outer;
}

/// One quantization replicate: sample on an inflated window and enlarge it
/// until every quadrature node's nearest neighbor is strictly inside, so the
/// computed distances agree with the infinite-volume process. Returns F.
inline double quantization_replicate(const ModelSpec& model, double lambda,
                                     const QuadratureSpec& quad,
                                     RngStream& rep) {
  const int d = model.dim;
  double margin = quantization_margin(d, lambda);
  RngStream pattern_rng = rep.fork(1);
  PointPattern pattern = sample_homogeneous(model.domain.inflated(margin),
                                            lambda, pattern_rng);
  RngStream extend_rng = rep.fork(2);
  const double p = model.marks.exponent;
  const double factor = std::pow(lambda, p / d);

  if (quad.method == QuadMethod::Exact) {
    if (d != 1)
      throw std::invalid_argument("quantization_replicate: exact path is 1-d only");
    for (int round = 0; round < 40; ++round) {
      auto z = sorted_coords_1d(pattern);
      if (z.empty()) {
        if (margin > 64.0)
          throw EmptyPatternError("quantization_replicate: empty pattern");
      } else {
        double worst = 0.0;
        const double value =
            nearest_power_integral_1d(z, p, 0.0, 1.0, &worst);
        if (worst < margin) return factor * value;
      }
      extend_pattern_annulus(pattern, model.domain, lambda, margin,
                             2.0 * margin, extend_rng);
      margin *= 2.0;
    }
    throw EmptyPatternError("quantization_replicate: window inflation did not converge");
  }

  // Draw the nodes once; enlarging the window only refines distances for
  // nodes whose neighbor was not yet certainly found.
  RngStream node_rng = rep.fork(3);
  std::vector<double> nodes(quad.budget * d);
  for (std::uint64_t i = 0; i < quad.budget; ++i)
    model.domain.sample_point(node_rng, {nodes.data() + i * d,
                                         static_cast<std::size_t>(d)});
  for (int round = 0; round < 40; ++round) {
    if (pattern.size() == 0) {
      if (margin > 64.0)
        throw EmptyPatternError("quantization_replicate: empty pattern");
    } else {
      GridIndex index(pattern);
      double sum = 0.0, worst = 0.0;
      for (std::uint64_t i = 0; i < quad.budget; ++i) {
        const double nn = index.nearest_distance(
            {nodes.data() + i * d, static_cast<std::size_t>(d)});
        worst = std::max(worst, nn);
        sum += std::pow(nn, p);
      }
      if (worst < margin)
        return factor * sum / static_cast<double>(quad.budget);
    }
    extend_pattern_annulus(pattern, model.domain, lambda, margin, 2.0 * margin,
                           extend_rng);
    margin *= 2.0;
  }
  throw EmptyPatternError("quantization_replicate: window inflation did not converge");
}

}  // namespace detail

/// Headline functional value of one replicate with stream (seed, index):
/// Poisson germ-grain G = lambda (1 - F); binomial germ-grain G = covered
/// fraction 1 - F; quantization H = lambda^{-p/d} F; generic avoidance F.
inline double single_replicate_value(const ModelSpec& model, double scale,
                                     std::uint64_t master_seed,
                                     std::uint64_t replicate,
                                     const QuadratureSpec& quad) {
  RngStream rep(master_seed, replicate);
  if (model.kind == ModelKind::Quantization) {
    if (model.process != ProcessKind::Poisson)
      throw std::invalid_argument("quantization supports Poisson sampling only");
    const double f = detail::quantization_replicate(model, scale, quad, rep);
    return std::pow(scale, -model.exponent / model.dim) * f;
  }
  const double r = model.shapes.fixed_radius * model.shrink(scale);
  RngStream pattern_rng = rep.fork(1);
  PointPattern pattern =
      model.process == ProcessKind::Poisson
          ? sample_homogeneous(model.domain.inflated(r), scale, pattern_rng)
          : sample_binomial(model.domain,
                            static_cast<std::uint64_t>(std::llround(scale)),
                            pattern_rng);
  RngStream quad_rng = rep.fork(3);
  const double f = avoidance_value(model, pattern, scale, quad, quad_rng);
  if (model.kind == ModelKind::GermGrain) {
    const double total = model.domain.volume();
    return model.process == ProcessKind::Poisson ? scale * (total - f)
                                                 : total - f;
  }
  return f;
}

/// reps i.i.d. functional values; replicate i uses stream (master_seed, i);
/// output order is the replicate order regardless of worker count.
inline std::vector<double> replicate_functional(const ModelSpec& model,
                                                double scale, std::uint64_t reps,
                                                std::uint64_t master_seed,
                                                const QuadratureSpec& quad,
                                                unsigned workers) {
  if (reps < 1) throw std::invalid_argument("replicate_functional: reps >= 1");
  std::vector<double> out(reps);
  parallel_for(reps, workers, [&](std::uint64_t i) {
    out[i] = single_replicate_value(model, scale, master_seed, i, quad);
  });
  return out;
}

/// Closed-form mean of the headline functional.
inline double closed_form_mean(const ModelSpec& model, double scale) {
  if (model.kind == ModelKind::GermGrain) {
    const double mass = ball_volume(model.dim, model.shapes.fixed_radius);
    const double covered = 1.0 - std::exp(-mass);
    return model.process == ProcessKind::Poisson ? scale * covered : covered;
  }
  if (model.kind == ModelKind::Quantization) {
    const double pd = model.exponent / model.dim;
    return std::pow(scale, -pd) * std::pow(unit_ball_volume(model.dim), -pd) *
           std::tgamma(1.0 + pd);
  }
  // Generic avoidance, dirac marks: E F = vol(domain) e^{-l(Q)}.
  if (model.marks.kind != MarkMeasure::Kind::Dirac)
    throw std::invalid_argument("closed_form_mean: unsupported model");
  return model.domain.volume() *
         std::exp(-ball_volume(model.dim, model.shapes.fixed_radius));
}

}  // namespace avoidance
