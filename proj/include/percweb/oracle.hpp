#pragma once

// Brute-force references on finite boxes. Nothing here shares code with the
// exploration process; the two are compared for exact integer equality.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "percweb/error.hpp"
#include "percweb/lattice.hpp"

namespace percweb::oracle {

/// Materialized edge statuses for every even site with x in [x_min, x_max]
/// and t in [t_min, t_max).
class BoxConfig {
 public:
  BoxConfig(std::int64_t x_min, std::int64_t x_max, std::int64_t t_min, std::int64_t t_max)
      : x_min_(x_min), x_max_(x_max), t_min_(t_min), t_max_(t_max) {
    if (x_max < x_min || t_max < t_min) fail(ErrorCode::InvalidArgument, "empty box");
    open_.assign(cells() * 2, 0);
  }

  BoxConfig(const Config& cfg, std::int64_t x_min, std::int64_t x_max, std::int64_t t_min,
            std::int64_t t_max)
      : BoxConfig(x_min, x_max, t_min, t_max) {
    for (std::int64_t t = t_min; t < t_max; ++t)
      for (std::int64_t x = x_min; x <= x_max; ++x) {
        if (!is_even_site(x, t)) continue;
        set(x, t, Direction::UpRight, cfg.is_open(x, t, Direction::UpRight));
        set(x, t, Direction::UpLeft, cfg.is_open(x, t, Direction::UpLeft));
      }
  }

  std::int64_t x_min() const { return x_min_; }
  std::int64_t x_max() const { return x_max_; }
  std::int64_t t_min() const { return t_min_; }
  std::int64_t t_max() const { return t_max_; }

  bool contains(std::int64_t x, std::int64_t t) const {
    return x >= x_min_ && x <= x_max_ && t >= t_min_ && t < t_max_;
  }

  bool open(std::int64_t x, std::int64_t t, Direction d) const {
    return contains(x, t) && open_[slot(x, t, d)] != 0;
  }
  void set(std::int64_t x, std::int64_t t, Direction d, bool is_open) {
    if (!contains(x, t)) fail(ErrorCode::InvalidArgument, "edge outside box");
    open_[slot(x, t, d)] = is_open ? 1 : 0;
  }

 private:
  std::size_t cells() const {
    return static_cast<std::size_t>((x_max_ - x_min_ + 1) * (t_max_ - t_min_));
  }
  std::size_t slot(std::int64_t x, std::int64_t t, Direction d) const {
    const auto c = static_cast<std::size_t>((t - t_min_) * (x_max_ - x_min_ + 1) + (x - x_min_));
    return 2 * c + static_cast<std::size_t>(d);
  }

  std::int64_t x_min_, x_max_, t_min_, t_max_;
  std::vector<std::uint8_t> open_;
};

/// Box wide enough for a half-line start at (start_x, t0) explored to level n.
inline BoxConfig make_box(const Config& cfg, std::int64_t start_x, std::int64_t t0, std::int64_t n,
                          std::int64_t slack = 16) {
  const std::int64_t h = n - t0;
  return BoxConfig(cfg, start_x - 2 * h - slack, start_x + h + 1, t0, std::max(n, t0 + 1));
}

struct BoxBoundary {
  std::int64_t t0 = 0;
  std::vector<std::int64_t> r;      // r(j), j = t0 .. t0 + r.size() - 1
  std::optional<std::int64_t> dead;  // first level with no reachable site
};

namespace detail {

/// reach[k][x - x_min]: reachable at level t0 + k from the even sites of
/// [x_min, start_x] x {t0}, using only edges inside the box.
inline std::vector<std::vector<std::uint8_t>> reachability(const BoxConfig& box,
                                                           std::int64_t start_x, std::int64_t t0,
                                                           std::int64_t n) {
  const auto w = static_cast<std::size_t>(box.x_max() - box.x_min() + 1);
  std::vector<std::vector<std::uint8_t>> reach(static_cast<std::size_t>(n - t0 + 1),
                                               std::vector<std::uint8_t>(w, 0));
  for (std::int64_t x = box.x_min(); x <= start_x; ++x)
    if (is_even_site(x, t0)) reach[0][static_cast<std::size_t>(x - box.x_min())] = 1;
  for (std::int64_t t = t0; t < n; ++t) {
    const auto& cur = reach[static_cast<std::size_t>(t - t0)];
    auto& nxt = reach[static_cast<std::size_t>(t - t0 + 1)];
    for (std::int64_t x = box.x_min(); x <= box.x_max(); ++x) {
      if (!cur[static_cast<std::size_t>(x - box.x_min())]) continue;
      if (x + 1 <= box.x_max() && box.open(x, t, Direction::UpRight))
        nxt[static_cast<std::size_t>(x + 1 - box.x_min())] = 1;
      if (x - 1 >= box.x_min() && box.open(x, t, Direction::UpLeft))
        nxt[static_cast<std::size_t>(x - 1 - box.x_min())] = 1;
    }
  }
  return reach;
}

inline void check_box(const BoxConfig& box, std::int64_t start_x, std::int64_t t0, std::int64_t n) {
  if (!is_even_site(start_x, t0)) fail(ErrorCode::InvalidSite, "odd start site");
  if (t0 < box.t_min() || n > box.t_max() || n < t0)
    fail(ErrorCode::InvalidArgument, "levels outside box");
  if (start_x < box.x_min() || start_x + (n - t0) > box.x_max())
    fail(ErrorCode::BoxTooNarrow, "box does not cover the right light cone");
}

}  // namespace detail

/// Level-by-level reachability from the seed row, keeping the per-level
/// maximum. Truncating the half-line at the left wall is exact as long as
/// r(j) >= x_min + (j - t0): a path from further left cannot get that far.
inline BoxBoundary dp_right_boundary(const BoxConfig& box, std::int64_t start_x, std::int64_t t0,
                                     std::int64_t n) {
  detail::check_box(box, start_x, t0, n);
  const auto reach = detail::reachability(box, start_x, t0, n);
  BoxBoundary out;
  out.t0 = t0;
  for (std::int64_t t = t0; t <= n; ++t) {
    const auto& row = reach[static_cast<std::size_t>(t - t0)];
    std::optional<std::int64_t> best;
    for (std::int64_t x = box.x_max(); x >= box.x_min(); --x)
      if (row[static_cast<std::size_t>(x - box.x_min())]) {
        best = x;
        break;
      }
    if (!best) {
      out.dead = t;
      return out;
    }
    if (*best < box.x_min() + (t - t0))
      fail(ErrorCode::BoxTooNarrow, "right boundary reached the left wall at level " + std::to_string(t));
    out.r.push_back(*best);
  }
  return out;
}

/// Rightmost open path from the half-line to level n, by greedy backtracking
/// from (r(n), n): at every level prefer the up-left predecessor (x + 1),
/// which is the right-hand one.
inline std::vector<std::int64_t> dp_rightmost_path(const BoxConfig& box, std::int64_t start_x,
                                                   std::int64_t t0, std::int64_t n) {
  const auto b = dp_right_boundary(box, start_x, t0, n);
  if (b.dead) fail(ErrorCode::NoPath, "no open path reaches level " + std::to_string(n));
  const auto reach = detail::reachability(box, start_x, t0, n);
  auto reachable = [&](std::int64_t x, std::int64_t t) {
    return x >= box.x_min() && x <= box.x_max() &&
           reach[static_cast<std::size_t>(t - t0)][static_cast<std::size_t>(x - box.x_min())];
  };
  std::vector<std::int64_t> path(static_cast<std::size_t>(n - t0 + 1));
  std::int64_t x = b.r.back();
  path.back() = x;
  for (std::int64_t t = n - 1; t >= t0; --t) {
    if (reachable(x + 1, t) && box.open(x + 1, t, Direction::UpLeft))
      x = x + 1;
    else if (reachable(x - 1, t) && box.open(x - 1, t, Direction::UpRight))
      x = x - 1;
    else
      fail(ErrorCode::NoPath, "backtracking lost the path");
    path[static_cast<std::size_t>(t - t0)] = x;
  }
  return path;
}

inline BoxBoundary dp_right_boundary(const Config& cfg, LatticeSite z, std::int64_t n) {
  return dp_right_boundary(make_box(cfg, z.x, z.t, n), z.x, z.t, n);
}

inline std::vector<std::int64_t> dp_rightmost_path(const Config& cfg, LatticeSite z, std::int64_t n) {
  return dp_rightmost_path(make_box(cfg, z.x, z.t, n), z.x, z.t, n);
}

/// Does the open cluster of z reach level `horizon`? Plain forward
/// breadth-first sweep over the lazily evaluated configuration.
inline bool survives_to(const Config& cfg, LatticeSite z, std::int64_t horizon) {
  require_even(z);
  std::vector<std::int64_t> cur{z.x}, nxt;
  for (std::int64_t t = z.t; t < horizon; ++t) {
    nxt.clear();
    for (std::int64_t x : cur) {
      if (cfg.is_open(x, t, Direction::UpLeft) && (nxt.empty() || nxt.back() != x - 1))
        nxt.push_back(x - 1);
      if (cfg.is_open(x, t, Direction::UpRight)) nxt.push_back(x + 1);
    }
    if (nxt.empty()) return false;
    cur.swap(nxt);
  }
  return true;
}

/// P(kappa(delta) > t) for two coalescing Brownian motions started delta apart.
inline double cbm_baseline(double delta, double t) {
  if (!(delta > 0) || !(t > 0)) fail(ErrorCode::InvalidArgument, "delta and t must be positive");
  return std::erf(delta / (2.0 * std::sqrt(t)));
}

struct WalkSurvival {
  double survival = 0;
  std::int64_t replicas = 0;
  std::int64_t steps_per_unit = 0;
  std::int64_t lattice_gap = 0;
};

/// Monte Carlo estimate of the same survival probability from two
/// independent simple random walks with `steps_per_unit` steps per unit time:
/// the walks start round(delta * sqrt(steps_per_unit)) apart (made even) and
/// coalesce when they meet. Bits are drawn directly from mt19937_64 so the
/// result is platform-independent.
inline WalkSurvival coalescing_walk_survival(double delta, double t, std::int64_t replicas,
                                             std::uint64_t seed,
                                             std::int64_t steps_per_unit = 400) {
  if (replicas <= 0 || steps_per_unit <= 0) fail(ErrorCode::InvalidArgument, "bad walk parameters");
  std::int64_t gap = std::llround(delta * std::sqrt(static_cast<double>(steps_per_unit)));
  if (gap % 2) ++gap;
  if (gap <= 0) gap = 2;
  const double eff_steps = static_cast<double>(gap * gap) / (delta * delta);
  const auto steps = static_cast<std::int64_t>(std::floor(t * eff_steps));
  std::mt19937_64 eng(seed);
  std::int64_t alive = 0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    std::int64_t d = gap;
    std::uint64_t bits = 0;
    int left = 0;
    for (std::int64_t s = 0; s < steps && d > 0; ++s) {
      if (left == 0) {
        bits = eng();
        left = 32;
      }
      // difference of two independent +-1 steps: +2, 0, 0, -2
      const unsigned two = bits & 3u;
      bits >>= 2;
      --left;
      d += two == 0 ? 2 : (two == 3 ? -2 : 0);
    }
    alive += d > 0;
  }
  return {static_cast<double>(alive) / static_cast<double>(replicas), replicas,
          static_cast<std::int64_t>(eff_steps), gap};
}

}  // namespace percweb::oracle
