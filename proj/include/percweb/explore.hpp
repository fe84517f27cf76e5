#pragma once

// Exploration clusters: the depth-first, right-to-left discovery of the
// rightmost open path from the half-line (-inf, x] x {t} to a target level,
// together with the right boundary r(j) = max{y : (-inf, x] x {t} -> (y, j)}.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "percweb/error.hpp"
#include "percweb/lattice.hpp"

namespace percweb {

/// Anything that answers "is this edge open?". Config is the canonical
/// model; coupled constructions plug in switching sources.
template <class S>
concept EdgeSource = requires(S& s, const EdgeRef& e) {
  { s(e) } -> std::convertible_to<bool>;
};

struct ExploreOptions {
  /// Number of exhausted starting sites (x - 2k, t) tolerated before the
  /// exploration is declared runaway.
  std::int64_t scan_guard = 10'000;
  /// Record the per-level evolution of the left boundary so that every
  /// intermediate path l^n can be replayed later.
  bool record_history = false;
};

/// Compact log of the left-boundary process. For each level n the DFS stack
/// is the path l^n; between consecutive levels only a suffix changes. We keep
/// the depth that survived and the x coordinates pushed afterwards.
class LeftBoundaryHistory {
 public:
  void begin(std::int64_t x0) {
    keep_.clear();
    pushed_offset_.clear();
    pushed_.clear();
    keep_.push_back(0);
    pushed_offset_.push_back(0);
    pushed_.push_back(x0);
    pushed_offset_.push_back(pushed_.size());
  }

  void record(std::size_t keep_depth, std::span<const std::int64_t> pushed) {
    keep_.push_back(keep_depth);
    pushed_.insert(pushed_.end(), pushed.begin(), pushed.end());
    pushed_offset_.push_back(pushed_.size());
  }

  /// Number of recorded levels (origin level included).
  std::size_t levels() const { return keep_.size(); }
  std::size_t keep(std::size_t k) const { return keep_[k]; }
  std::span<const std::int64_t> pushed(std::size_t k) const {
    return {pushed_.data() + pushed_offset_[k], pushed_offset_[k + 1] - pushed_offset_[k]};
  }

 private:
  std::vector<std::size_t> keep_;
  std::vector<std::size_t> pushed_offset_;
  std::vector<std::int64_t> pushed_;
};

/// Steps through a LeftBoundaryHistory level by level, exposing l^n.
class LeftBoundaryCursor {
 public:
  LeftBoundaryCursor(const LeftBoundaryHistory& h, std::int64_t t0) : h_(&h), t0_(t0) { load(0); }

  std::int64_t level() const { return t0_ + static_cast<std::int64_t>(k_); }
  bool can_advance() const { return k_ + 1 < h_->levels(); }
  void advance() {
    if (!can_advance()) fail(ErrorCode::InvalidArgument, "history exhausted");
    load(k_ + 1);
  }
  /// l^n(j) for j in [t0, level()], indexed by j - t0.
  std::span<const std::int64_t> path() const { return path_; }
  std::int64_t at(std::int64_t j) const { return path_[static_cast<std::size_t>(j - t0_)]; }
  /// Entries of path() below this index are unchanged by the last advance().
  std::size_t low_water() const { return low_water_; }
  std::int64_t origin_time() const { return t0_; }

 private:
  void load(std::size_t k) {
    k_ = k;
    low_water_ = h_->keep(k);
    path_.resize(low_water_);
    auto p = h_->pushed(k);
    path_.insert(path_.end(), p.begin(), p.end());
  }

  const LeftBoundaryHistory* h_;
  std::int64_t t0_;
  std::size_t k_ = 0;
  std::size_t low_water_ = 0;
  std::vector<std::int64_t> path_;
};

/// One exploration cluster C_z(n).
///
/// Invariants maintained by advance_level():
///  - every explored edge was queried exactly once;
///  - stack_ holds l^n: frame k sits at level origin.t + k;
///  - r_[k] = max x over visited vertices at level origin.t + k.
class ClusterState {
 public:
  static constexpr std::uint8_t kRightExplored = 1;
  static constexpr std::uint8_t kRightOpen = 2;
  static constexpr std::uint8_t kLeftExplored = 4;
  static constexpr std::uint8_t kLeftOpen = 8;

  explicit ClusterState(LatticeSite origin, ExploreOptions opts = {})
      : origin_(origin), opts_(opts) {
    require_even(origin);
    if (opts_.scan_guard < 0) fail(ErrorCode::InvalidArgument, "negative scan guard");
    levels_.emplace_back();
    levels_[0].push_back({origin.x, 0});
    r_.push_back(origin.x);
    stack_.push_back({origin.x, 0});
    if (opts_.record_history) history_.begin(origin.x);
  }

  LatticeSite origin() const { return origin_; }
  std::int64_t level() const { return origin_.t + static_cast<std::int64_t>(r_.size()) - 1; }
  std::int64_t scan_offset() const { return scan_offset_; }

  /// r(j) for j in [origin.t, level()], indexed by j - origin.t.
  std::span<const std::int64_t> right_boundary() const { return r_; }
  std::int64_t right_at(std::int64_t j) const { return r_[index(j)]; }

  /// l^n(j) for the current level n.
  std::int64_t left_at(std::int64_t j) const { return stack_[index(j)].x; }
  std::vector<std::int64_t> left_boundary() const {
    std::vector<std::int64_t> out;
    out.reserve(stack_.size());
    for (const auto& f : stack_) out.push_back(f.x);
    return out;
  }
  /// Stack entries below this depth were untouched by the last advance.
  std::size_t low_water() const { return low_water_; }

  std::uint64_t queries() const { return queries_; }
  std::size_t open_edge_count() const { return count_edges(true); }
  std::size_t closed_edge_count() const { return count_edges(false); }
  std::size_t visited_count() const {
    std::size_t n = 0;
    for (const auto& lvl : levels_) n += lvl.size();
    return n;
  }

  /// Status of e if this cluster explored it.
  std::optional<bool> explored_status(const EdgeRef& e) const {
    const std::int64_t k = e.from.t - origin_.t;
    if (k < 0 || k >= static_cast<std::int64_t>(levels_.size())) return std::nullopt;
    for (const auto& v : levels_[static_cast<std::size_t>(k)]) {
      if (v.x != e.from.x) continue;
      if (e.dir == Direction::UpRight) {
        if (v.flags & kRightExplored) return (v.flags & kRightOpen) != 0;
      } else {
        if (v.flags & kLeftExplored) return (v.flags & kLeftOpen) != 0;
      }
      return std::nullopt;
    }
    return std::nullopt;
  }

  /// Visits (x, t, flags) for every visited vertex.
  template <class F>
  void for_each_vertex(F&& f) const {
    for (std::size_t k = 0; k < levels_.size(); ++k)
      for (const auto& v : levels_[k]) f(v.x, origin_.t + static_cast<std::int64_t>(k), v.flags);
  }

  const LeftBoundaryHistory& history() const { return history_; }

  /// Extends the exploration by one level, reading edge statuses from src.
  template <EdgeSource Source>
  void advance_level(Source& src) {
    const std::int64_t target_k = static_cast<std::int64_t>(r_.size());
    levels_.emplace_back();
    r_.push_back(std::numeric_limits<std::int64_t>::min());
    std::size_t low = stack_.size();

    while (true) {
      const std::size_t depth = stack_.size() - 1;
      if (static_cast<std::int64_t>(depth) == target_k) break;
      Frame& top = stack_.back();
      const std::int64_t t = origin_.t + static_cast<std::int64_t>(depth);
      if (top.next < 2) {
        const Direction dir = top.next == 0 ? Direction::UpRight : Direction::UpLeft;
        ++top.next;
        const std::int64_t x = top.x;
        const bool open = static_cast<bool>(src(EdgeRef{{x, t}, dir}));
        ++queries_;
        mark(depth, x, dir, open);
        if (open) {
          const std::int64_t nx = x + (dir == Direction::UpRight ? 1 : -1);
          if (visit(depth + 1, nx)) stack_.push_back({nx, 0});
        }
        continue;
      }
      stack_.pop_back();
      low = std::min(low, stack_.size());
      if (stack_.empty()) {
        ++scan_offset_;
        if (scan_offset_ > opts_.scan_guard)
          fail(ErrorCode::ScanLimitExceeded,
               "exhausted " + std::to_string(scan_offset_) + " starting sites from (" +
                   std::to_string(origin_.x) + ", " + std::to_string(origin_.t) + ")");
        const std::int64_t rx = origin_.x - 2 * scan_offset_;
        levels_[0].push_back({rx, 0});
        stack_.push_back({rx, 0});
        low = 0;
      }
    }
    low_water_ = low;
    if (opts_.record_history) {
      pushed_scratch_.clear();
      for (std::size_t k = low; k < stack_.size(); ++k) pushed_scratch_.push_back(stack_[k].x);
      history_.record(low, pushed_scratch_);
    }
  }

  void advance_to(std::int64_t n, const Config& cfg) {
    Config src = cfg;
    while (level() < n) advance_level(src);
  }

 private:
  struct Vertex {
    std::int64_t x;
    std::uint8_t flags;
  };
  struct Frame {
    std::int64_t x;
    std::uint8_t next;  // 0: up-right pending, 1: up-left pending, 2: done
  };

  std::size_t index(std::int64_t j) const {
    const std::int64_t k = j - origin_.t;
    if (k < 0 || k >= static_cast<std::int64_t>(r_.size()))
      fail(ErrorCode::InvalidArgument, "level " + std::to_string(j) + " outside explored range");
    return static_cast<std::size_t>(k);
  }

  Vertex* find(std::size_t k, std::int64_t x) {
    for (auto& v : levels_[k])
      if (v.x == x) return &v;
    return nullptr;
  }

  void mark(std::size_t k, std::int64_t x, Direction dir, bool open) {
    Vertex* v = find(k, x);
    if (dir == Direction::UpRight)
      v->flags |= kRightExplored | (open ? kRightOpen : 0);
    else
      v->flags |= kLeftExplored | (open ? kLeftOpen : 0);
  }

  /// Returns true if (x, level k) was not visited before.
  bool visit(std::size_t k, std::int64_t x) {
    if (find(k, x)) return false;
    levels_[k].push_back({x, 0});
    r_[k] = std::max(r_[k], x);
    return true;
  }

  std::size_t count_edges(bool open) const {
    std::size_t n = 0;
    for (const auto& lvl : levels_)
      for (const auto& v : lvl) {
        if (v.flags & kRightExplored) n += ((v.flags & kRightOpen) != 0) == open;
        if (v.flags & kLeftExplored) n += ((v.flags & kLeftOpen) != 0) == open;
      }
    return n;
  }

  LatticeSite origin_;
  ExploreOptions opts_;
  std::vector<std::vector<Vertex>> levels_;
  std::vector<std::int64_t> r_;
  std::vector<Frame> stack_;
  std::int64_t scan_offset_ = 0;
  std::size_t low_water_ = 0;
  std::uint64_t queries_ = 0;
  LeftBoundaryHistory history_;
  std::vector<std::int64_t> pushed_scratch_;
};

inline ClusterState explore_to_level(LatticeSite z, std::int64_t n, const Config& cfg,
                                     ExploreOptions opts = {}) {
  require_even(z);
  if (n < z.t) fail(ErrorCode::InvalidArgument, "target level precedes the start time");
  ClusterState s(z, opts);
  s.advance_to(n, cfg);
  return s;
}

struct RightBoundaryTrajectory {
  LatticeSite start;
  std::vector<std::int64_t> values;  // r(j), j = start.t .. end_time()

  std::int64_t end_time() const { return start.t + static_cast<std::int64_t>(values.size()) - 1; }
  std::int64_t at(std::int64_t j) const { return values[static_cast<std::size_t>(j - start.t)]; }
};

/// Finite-horizon surrogate of the rightmost infinite open path from
/// (-inf, x] x {t}: the rightmost open path reaching level `horizon`.
struct GammaApprox {
  LatticeSite start;
  std::int64_t horizon = 0;
  std::vector<std::int64_t> values;  // gamma^H(j), j = start.t .. horizon

  std::int64_t at(std::int64_t j) const { return values[static_cast<std::size_t>(j - start.t)]; }
};

inline RightBoundaryTrajectory right_boundary_of(const ClusterState& s) {
  auto r = s.right_boundary();
  return {s.origin(), {r.begin(), r.end()}};
}

inline GammaApprox gamma_of(const ClusterState& s) {
  return {s.origin(), s.level(), s.left_boundary()};
}

inline GammaApprox gamma_approx(LatticeSite z, std::int64_t horizon, const Config& cfg,
                                ExploreOptions opts = {}) {
  return gamma_of(explore_to_level(z, horizon, cfg, opts));
}

/// gamma^H <= l^n <= r on [origin.t, level].
inline bool boundary_ordering_check(std::span<const std::int64_t> right,
                                    std::span<const std::int64_t> left, const GammaApprox& g,
                                    LatticeSite origin) {
  if (!(g.start == origin) || right.size() != left.size() || g.values.size() < right.size())
    fail(ErrorCode::InvalidArgument, "trajectories do not share origin and domain");
  for (std::size_t k = 0; k < right.size(); ++k)
    if (!(g.values[k] <= left[k] && left[k] <= right[k])) return false;
  return true;
}

inline bool boundary_ordering_check(const ClusterState& s, const GammaApprox& g) {
  if (g.horizon < s.level()) fail(ErrorCode::InvalidArgument, "gamma horizon below cluster level");
  const auto left = s.left_boundary();
  return boundary_ordering_check(s.right_boundary(), left, g, s.origin());
}

}  // namespace percweb
