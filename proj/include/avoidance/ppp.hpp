#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "avoidance/errors.hpp"
#include "avoidance/geometry.hpp"
#include "avoidance/rng.hpp"

namespace avoidance {

/// Finite point set together with its generating window.
struct PointPattern {
  int dim = 0;
  Window window;
  std::vector<double> coords;  // flattened, size = count * dim

  explicit PointPattern(Window w) : dim(w.dim()), window(std::move(w)) {}

  std::size_t size() const { return coords.size() / dim; }

  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * dim, static_cast<std::size_t>(dim)};
  }

  void push_back(std::span<const double> x) {
    coords.insert(coords.end(), x.begin(), x.end());
  }
};

/// Uniform-grid spatial index over a pattern: O(1) expected cost for ball
/// counts and nearest-neighbor queries at ~1 point per cell.
class GridIndex {
 public:
  explicit GridIndex(const PointPattern& pattern)
      : pattern_(&pattern), dim_(pattern.dim) {
    const double vol = pattern.window.volume();
    const double n = static_cast<double>(std::max<std::size_t>(pattern.size(), 1));
    cell_side_ = std::pow(vol / n, 1.0 / dim_);
    origin_ = pattern.window.lower;
    cells_.resize(dim_);
    for (int i = 0; i < dim_; ++i) {
      const double extent = pattern.window.upper[i] - pattern.window.lower[i];
      cells_[i] = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::ceil(extent / cell_side_)));
    }
    for (std::size_t p = 0; p < pattern.size(); ++p)
      buckets_[cell_key(pattern.point(p))].push_back(p);
  }

  /// Number of pattern points strictly inside the open ball.
  std::size_t count_in_ball(const Ball& b) const {
    const double r2 = b.radius * b.radius;
    std::size_t count = 0;
    visit_cells_in_box(b.center, b.radius, [&](std::uint64_t key) {
      auto it = buckets_.find(key);
      if (it == buckets_.end()) return;
      for (std::size_t p : it->second)
        if (squared_distance(pattern_->point(p), b.center) < r2) ++count;
    });
    return count;
  }

  /// Exact min Euclidean distance from x to the pattern, by expanding-ring
  /// search over grid shells.
  double nearest_distance(std::span<const double> x) const {
    if (pattern_->size() == 0)
      throw EmptyPatternError("nearest_distance: empty pattern");
    double best2 = std::numeric_limits<double>::infinity();
    for (std::int64_t ring = 0;; ++ring) {
      // Once a candidate is found, any point in a farther shell is at least
      // (ring - 1) * cell_side away; stop when that exceeds the incumbent.
      if (std::isfinite(best2)) {
        const double guard = static_cast<double>(ring - 1) * cell_side_;
        if (guard > 0.0 && guard * guard > best2) break;
      }
      bool any_cell = false;
      visit_shell(x, ring, [&](std::uint64_t key, bool in_range) {
        if (in_range) any_cell = true;
        auto it = buckets_.find(key);
        if (it == buckets_.end()) return;
        for (std::size_t p : it->second)
          best2 = std::min(best2, squared_distance(pattern_->point(p), x));
      });
      if (!any_cell && std::isfinite(best2)) break;
      if (!any_cell && ring > max_ring()) {
        // Query far outside the indexed window: fall back to a linear scan.
        for (std::size_t p = 0; p < pattern_->size(); ++p)
          best2 = std::min(best2, squared_distance(pattern_->point(p), x));
        break;
      }
    }
    return std::sqrt(best2);
  }

 private:
  std::int64_t max_ring() const {
    std::int64_t m = 0;
    for (int i = 0; i < dim_; ++i) m = std::max(m, cells_[i]);
    return m + 2;
  }

  std::int64_t cell_coord(double v, int axis) const {
    auto c = static_cast<std::int64_t>(std::floor((v - origin_[axis]) / cell_side_));
    return std::clamp<std::int64_t>(c, 0, cells_[axis] - 1);
  }

  std::int64_t raw_coord(double v, int axis) const {
    return static_cast<std::int64_t>(std::floor((v - origin_[axis]) / cell_side_));
  }

  std::uint64_t pack(std::span<const std::int64_t> c) const {
    // FNV-style combine over clamped per-axis coordinates.
    std::uint64_t h = 1469598103934665603ULL;
    for (int i = 0; i < dim_; ++i) {
      h ^= static_cast<std::uint64_t>(c[i]) + 0x9e3779b97f4a7c15ULL;
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::uint64_t cell_key(std::span<const double> x) const {
    std::int64_t c[8];
    for (int i = 0; i < dim_; ++i) c[i] = cell_coord(x[i], i);
    return pack({c, static_cast<std::size_t>(dim_)});
  }

  template <class Visit>
  void visit_cells_in_box(std::span<const double> center, double radius,
                          Visit&& visit) const {
    std::int64_t lo[8], hi[8], cur[8];
    for (int i = 0; i < dim_; ++i) {
      lo[i] = std::clamp<std::int64_t>(raw_coord(center[i] - radius, i), 0,
                                       cells_[i] - 1);
      hi[i] = std::clamp<std::int64_t>(raw_coord(center[i] + radius, i), 0,
                                       cells_[i] - 1);
      cur[i] = lo[i];
    }
    for (;;) {
      visit(pack({cur, static_cast<std::size_t>(dim_)}));
      int axis = 0;
      while (axis < dim_ && ++cur[axis] > hi[axis]) {
        cur[axis] = lo[axis];
        ++axis;
      }
      if (axis == dim_) break;
    }
  }

  /// Visits the cells whose Chebyshev distance (in cell units) from x's cell
  /// is exactly `ring`; reports whether each cell is inside the grid.
  template <class Visit>
  void visit_shell(std::span<const double> x, std::int64_t ring,
                   Visit&& visit) const {
    std::int64_t base[8];
    for (int i = 0; i < dim_; ++i) base[i] = raw_coord(x[i], i);
    std::int64_t off[8], cur[8];
    for (int i = 0; i < dim_; ++i) off[i] = -ring;
    for (;;) {
      std::int64_t cheb = 0;
      for (int i = 0; i < dim_; ++i)
        cheb = std::max<std::int64_t>(cheb, off[i] < 0 ? -off[i] : off[i]);
      if (cheb == ring) {
        bool inside = true;
        for (int i = 0; i < dim_; ++i) {
          cur[i] = base[i] + off[i];
          if (cur[i] < 0 || cur[i] >= cells_[i]) inside = false;
        }
        if (inside) visit(pack({cur, static_cast<std::size_t>(dim_)}), true);
      }
      int axis = 0;
      while (axis < dim_ && ++off[axis] > ring) {
        off[axis] = -ring;
        ++axis;
      }
      if (axis == dim_) break;
    }
  }

  const PointPattern* pattern_;
  int dim_;
  double cell_side_;
  std::vector<double> origin_;
  std::vector<std::int64_t> cells_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

inline PointPattern sample_homogeneous(const Window& window, double intensity,
                                       RngStream& stream) {
  if (intensity <= 0.0)
    throw std::invalid_argument("sample_homogeneous: intensity must be > 0");
  PointPattern p(window);
  const std::uint64_t n = stream.poisson(intensity * window.volume());
  p.coords.reserve(n * p.dim);
  std::vector<double> x(p.dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    window.sample_point(stream, x);
    p.push_back(x);
  }
  return p;
}

/// Exactly n i.i.d. uniform points. For k <= n and the same stream, the
/// first k points coincide (prefix coupling used by the Poissonization
/// experiments).
inline PointPattern sample_binomial(const Window& window, std::uint64_t n,
                                    RngStream& stream) {
  PointPattern p(window);
  p.coords.reserve(n * p.dim);
  std::vector<double> x(p.dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    window.sample_point(stream, x);
    p.push_back(x);
  }
  return p;
}

/// Thinning of a homogeneous process at lambda_max: keep x with probability
/// intensity_fn(x) / lambda_max.
inline PointPattern sample_thinned(
    const Window& window, double lambda_max,
    const std::function<double(std::span<const double>)>& intensity_fn,
    RngStream& stream) {
  PointPattern dense = sample_homogeneous(window, lambda_max, stream);
  PointPattern p(window);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto x = dense.point(i);
    const double lam = intensity_fn(x);
    if (lam > lambda_max)
      throw ContractViolationError("sample_thinned: intensity exceeds lambda_max");
    if (stream.next_double() < lam / lambda_max) p.push_back(x);
  }
  return p;
}

inline std::size_t count_in_ball(const PointPattern&, const GridIndex& index,
                                 const Ball& ball) {
  return index.count_in_ball(ball);
}

inline double nearest_distance(const PointPattern& pattern,
                               const GridIndex& index,
                               std::span<const double> x) {
  if (pattern.size() == 0)
    throw EmptyPatternError("nearest_distance: empty pattern");
  return index.nearest_distance(x);
}

}  // namespace avoidance
