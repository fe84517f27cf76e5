#pragma once

// Path space utilities on finite windows: the compactified metric, the
// shearing and diffusive scaling map, distances between paths and between
// finite path sets, the eta count, the separation battery and the FKG check.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "percweb/error.hpp"
#include "percweb/explore.hpp"
#include "percweb/lattice.hpp"
#include "percweb/oracle.hpp"
#include "percweb/parallel.hpp"
#include "percweb/stats.hpp"

namespace percweb {

/// (tanh(x) / (1 + |t|), tanh(t)); rows t = +-inf collapse to u = 0.
struct CompactifiedPoint {
  double u = 0;
  double v = 0;

  static CompactifiedPoint of(double x, double t) {
    if (std::isinf(t)) return {0.0, t > 0 ? 1.0 : -1.0};
    return {std::tanh(x) / (1.0 + std::abs(t)), std::tanh(t)};
  }
};

inline double rho(CompactifiedPoint a, CompactifiedPoint b) {
  return std::max(std::abs(a.v - b.v), std::abs(a.u - b.u));
}

inline double rho(double x1, double t1, double x2, double t2) {
  return rho(CompactifiedPoint::of(x1, t1), CompactifiedPoint::of(x2, t2));
}

/// Piecewise-linear path through (times[k], values[k]), starting at
/// times[0]. Beyond the last sample the path is held constant.
class RescaledPath {
 public:
  RescaledPath() = default;
  RescaledPath(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty() || times_.size() != values_.size())
      fail(ErrorCode::InvalidArgument, "path needs matching nonempty times and values");
    for (std::size_t k = 1; k < times_.size(); ++k)
      if (!(times_[k] > times_[k - 1])) fail(ErrorCode::InvalidArgument, "path times must increase");
  }

  /// Integer lattice trajectory x(j), j = t0, t0 + 1, ...
  static RescaledPath from_lattice(std::int64_t t0, std::span<const std::int64_t> xs) {
    std::vector<double> t(xs.size()), v(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      t[k] = static_cast<double>(t0 + static_cast<std::int64_t>(k));
      v[k] = static_cast<double>(xs[k]);
    }
    return {std::move(t), std::move(v)};
  }

  double sigma() const { return times_.front(); }
  double end_time() const { return times_.back(); }
  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return values_; }

  /// pi(t v sigma) with constant extension past the end.
  double at(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto k = static_cast<std::size_t>(it - times_.begin());
    const double t0 = times_[k - 1], t1 = times_[k];
    if (t == t0) return values_[k - 1];
    const double w = (t - t0) / (t1 - t0);
    return values_[k - 1] + w * (values_[k] - values_[k - 1]);
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Image under (x, t) -> (sqrt(eps) / b * (x - a t), eps t).
inline RescaledPath shear_rescale(const RescaledPath& path, double a, double b, double eps) {
  if (!(b > 0) || !(eps > 0)) fail(ErrorCode::InvalidArgument, "shear_rescale needs b > 0 and eps > 0");
  const double s = std::sqrt(eps) / b;
  std::vector<double> t(path.times().size()), v(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double tt = path.times()[k];
    t[k] = eps * tt;
    v[k] = s * (path.values()[k] - a * tt);
  }
  return {std::move(t), std::move(v)};
}

inline RescaledPath shear_rescale(std::int64_t t0, std::span<const std::int64_t> xs, double a, double b,
                                  double eps) {
  return shear_rescale(RescaledPath::from_lattice(t0, xs), a, b, eps);
}

inline RescaledPath shear_rescale(const RightBoundaryTrajectory& r, double a, double b, double eps) {
  return shear_rescale(r.start.t, r.values, a, b, eps);
}

inline constexpr int kDistanceGridPerUnit = 16;
inline constexpr int kDistanceStepsPerUnitValue = 64;

/// Path metric. The sup runs over every breakpoint of either path, t = 0,
/// and a grid of 16 points per unit time on [min sigma, max end]. Steep
/// segments are subdivided further so neither path moves more than 1/64
/// between evaluation points. Outside [min sigma, max end] both paths are
/// constant and the weight 1 / (1 + |t|) only shrinks away from t = 0.
inline double path_distance(const RescaledPath& p1, const RescaledPath& p2) {
  const double lo = std::min(p1.sigma(), p2.sigma());
  const double hi = std::max(p1.end_time(), p2.end_time());
  std::vector<double> ts(p1.times().begin(), p1.times().end());
  ts.insert(ts.end(), p2.times().begin(), p2.times().end());
  ts.push_back(0.0);  // the weight peaks here even outside [lo, hi]
  const auto steps = static_cast<std::int64_t>(std::ceil((hi - lo) * kDistanceGridPerUnit));
  for (std::int64_t k = 0; k <= steps; ++k)
    ts.push_back(std::min(hi, lo + static_cast<double>(k) / kDistanceGridPerUnit));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  auto term = [&](double t) {
    return std::abs(std::tanh(p1.at(t)) - std::tanh(p2.at(t))) / (1.0 + std::abs(t));
  };
  double d = std::abs(std::tanh(p1.sigma()) - std::tanh(p2.sigma()));
  for (std::size_t k = 0; k < ts.size(); ++k) {
    d = std::max(d, term(ts[k]));
    if (k + 1 == ts.size()) break;
    const double a = ts[k], b = ts[k + 1];
    const double move = std::max(std::abs(p1.at(b) - p1.at(a)), std::abs(p2.at(b) - p2.at(a)));
    const auto m = static_cast<std::int64_t>(std::ceil(move * kDistanceStepsPerUnitValue));
    for (std::int64_t i = 1; i < m; ++i) d = std::max(d, term(a + (b - a) * static_cast<double>(i) / static_cast<double>(m)));
  }
  return d;
}

/// Hausdorff distance between finite path sets under path_distance.
inline double set_distance(std::span<const RescaledPath> k1, std::span<const RescaledPath> k2) {
  if (k1.empty() || k2.empty()) fail(ErrorCode::InvalidArgument, "set_distance needs nonempty sets");
  double h = 0;
  auto one_side = [&h](std::span<const RescaledPath> a, std::span<const RescaledPath> b) {
    for (const auto& pa : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& pb : b) {
        best = std::min(best, path_distance(pa, pb));
        if (best <= h) break;  // cannot raise the running sup
      }
      h = std::max(h, best);
    }
  };
  one_side(k1, k2);
  one_side(k2, k1);
  return h;
}

template <class P>
concept TimedPath = requires(const P& p, double t) {
  { p.sigma() } -> std::convertible_to<double>;
  { p.at(t) } -> std::convertible_to<double>;
};

/// Number of distinct positions at t0 + t among paths with sigma <= t0 and
/// position at t0 in [a, b].
template <TimedPath P>
std::int64_t eta_count(std::span<const P> paths, double t0, double t, double a, double b) {
  std::set<double> hit;
  for (const auto& p : paths) {
    if (p.sigma() > t0) continue;
    const double x = p.at(t0);
    if (x < a || x > b) continue;
    hit.insert(p.at(t0 + t));
  }
  return static_cast<std::int64_t>(hit.size());
}

inline std::int64_t eta_count(std::span<const RescaledPath> paths, double t0, double t, double a, double b) {
  return eta_count<RescaledPath>(paths, t0, t, a, b);
}

/// r_i(n) for the half-line clusters at (xs[i], 0) in one configuration, xs
/// increasing. Cluster i is explored only until its right boundary meets
/// that of cluster i - 1; from then on the two coincide.
inline std::vector<std::int64_t> family_right_boundaries(const Config& cfg, std::span<const std::int64_t> xs,
                                                         std::int64_t n, ExploreOptions opts = {}) {
  std::vector<std::int64_t> out(xs.size());
  std::vector<std::int64_t> prev;  // r_{i-1}(j), j = 0 .. n
  Config src = cfg;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0 && xs[i] <= xs[i - 1]) fail(ErrorCode::InvalidArgument, "start positions must increase");
    ClusterState s({xs[i], 0}, opts);
    std::vector<std::int64_t> cur{xs[i]};
    cur.reserve(static_cast<std::size_t>(n + 1));
    for (std::int64_t j = 0; j < n; ++j) {
      if (i > 0 && cur.back() <= prev[static_cast<std::size_t>(j)]) {
        cur.insert(cur.end(), prev.begin() + j + 1, prev.end());
        break;
      }
      s.advance_level(src);
      cur.push_back(s.right_at(j + 1));
    }
    out[i] = cur.back();
    prev.swap(cur);
  }
  return out;
}

struct BatteryRow {
  double delta = 0;
  double t = 0;
  std::int64_t lattice_gap = 0;
  std::int64_t steps = 0;
  double estimate = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::int64_t n = 0;
  double baseline = 0;  // erf(delta / (2 sqrt t)), the Brownian limit
};

/// x_eps = ceil(delta sigma / sqrt(eps)) + 2, or + 3 if that is odd.
inline std::int64_t b1_gap(double delta, double sigma, double eps) {
  auto x = static_cast<std::int64_t>(std::ceil(delta * sigma / std::sqrt(eps))) + 2;
  if (x % 2) ++x;
  return x;
}

/// P(eta_R(0, floor(t / eps); 0, x_eps) >= 2) for each delta, i.e. the
/// probability that r_0 and r_{x_eps} have not coalesced by floor(t / eps).
inline std::vector<BatteryRow> b1_battery(double p, double eps, double t, std::span<const double> delta_list,
                                          std::int64_t replicas, double sigma, std::uint64_t seed,
                                          int workers = 1, std::uint64_t first_replica = 0) {
  if (!(eps > 0) || !(t > 0) || !(sigma > 0) || replicas <= 0)
    fail(ErrorCode::InvalidArgument, "b1_battery needs eps, t, sigma and replicas positive");
  const auto steps = static_cast<std::int64_t>(std::floor(t / eps));
  std::vector<BatteryRow> rows;
  for (double delta : delta_list) {
    if (!(delta > 0)) fail(ErrorCode::InvalidArgument, "delta must be positive");
    const std::int64_t gap = b1_gap(delta, sigma, eps);
    const std::int64_t xs[2] = {0, gap};
    auto apart = parallel_map(replicas, workers, [&](std::int64_t r) {
      const Config cfg(seed, p, replica_stream(first_replica + static_cast<std::uint64_t>(r)));
      const auto ends = family_right_boundaries(cfg, xs, steps);
      return static_cast<int>(ends[0] != ends[1]);
    });
    std::int64_t k = 0;
    for (int a : apart) k += a;
    const auto ci = stats::wilson(k, replicas);
    rows.push_back({delta, t, gap, steps, static_cast<double>(k) / static_cast<double>(replicas), ci.low, ci.high,
                    replicas, oracle::cbm_baseline(delta, t)});
  }
  return rows;
}

struct FkgResult {
  std::int64_t n = 0;
  std::int64_t x = 0;
  std::int64_t replicas = 0;
  double p3 = 0;            // P(eta >= 3)
  double p2 = 0;            // P(eta >= 2)
  stats::Interval p3_ci;
  stats::Interval p2_ci;
  stats::Interval p2_squared_ci;
  double margin() const { return p2 * p2 - p3; }
  /// The data do not contradict P(eta >= 3) <= P(eta >= 2)^2: the lower
  /// Wilson bound of the left side does not exceed the squared upper bound
  /// of the right side.
  bool holds() const { return p3_ci.low <= p2_squared_ci.high; }
};

/// eta_R(0, n; 0, 2x) over the clusters r_0, ..., r_x started at (2i, 0).
inline std::int64_t eta_family(const Config& cfg, std::int64_t n, std::int64_t x) {
  std::vector<std::int64_t> xs;
  for (std::int64_t i = 0; i <= x; ++i) xs.push_back(2 * i);
  const auto ends = family_right_boundaries(cfg, xs, n);
  std::int64_t eta = 1;
  for (std::size_t i = 1; i < ends.size(); ++i) eta += ends[i] != ends[i - 1];
  return eta;
}

inline FkgResult b2_fkg_check(double p, std::int64_t n, std::int64_t x, std::int64_t replicas, std::uint64_t seed,
                              int workers = 1, std::uint64_t first_replica = 0) {
  if (x < 1 || n < 0 || replicas <= 0) fail(ErrorCode::InvalidArgument, "b2_fkg_check needs x >= 1 and replicas > 0");
  auto etas = parallel_map(replicas, workers, [&](std::int64_t r) {
    return eta_family(Config(seed, p, replica_stream(first_replica + static_cast<std::uint64_t>(r))), n, x);
  });
  std::int64_t ge2 = 0, ge3 = 0;
  for (auto e : etas) {
    ge2 += e >= 2;
    ge3 += e >= 3;
  }
  FkgResult out;
  out.n = n;
  out.x = x;
  out.replicas = replicas;
  const double rr = static_cast<double>(replicas);
  out.p2 = static_cast<double>(ge2) / rr;
  out.p3 = static_cast<double>(ge3) / rr;
  out.p2_ci = stats::wilson(ge2, replicas);
  out.p3_ci = stats::wilson(ge3, replicas);
  out.p2_squared_ci = {out.p2_ci.low * out.p2_ci.low, out.p2_ci.high * out.p2_ci.high};
  return out;
}

}  // namespace percweb
