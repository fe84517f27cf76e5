#pragma once

// Several exploration clusters built from independent configurations and
// glued into one joint law: cluster k reads its private stream until its
// exploration first touches an edge already explored by clusters 0..k-1,
// and from then on reads the shared ledger (or the primary stream for
// fresh edges). Each cluster then is the exploration cluster of a single
// combined configuration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "percweb/error.hpp"
#include "percweb/explore.hpp"
#include "percweb/lattice.hpp"
#include "percweb/oracle.hpp"
#include "percweb/parallel.hpp"

namespace percweb {

struct CoupleOptions {
  std::int64_t survival_margin = 500;
  std::int64_t scan_guard = 10'000;
  bool record_history = true;
};

/// Coalescence times of one ordered pair; nullopt means NotYet at the
/// run's horizon.
struct CoalescenceTimes {
  std::optional<std::int64_t> kappa_rl;
  std::optional<std::int64_t> kappa_rr;
  std::optional<std::int64_t> kappa_gamma_gamma;
  bool gamma_provisional = false;  // merge within the survival margin of the horizon
  bool kappa_rl_computed = false;  // needs left-boundary history
};

enum class PairStructure {
  EqualTime,    // same start time, left = smaller x
  Ordered,      // unequal times, one of the one-sided ordering events holds
  Unstructured  // unequal times, neither event holds
};

struct PairRecord {
  std::size_t left = 0;   // plays z1
  std::size_t right = 0;  // plays z2
  std::int64_t common_start = 0;
  PairStructure structure = PairStructure::EqualTime;
  CoalescenceTimes times;
};

struct CoupledCluster {
  LatticeSite start;
  Config private_config;
  std::optional<std::int64_t> switch_level;  // iota; nullopt if never switched
  RightBoundaryTrajectory right;
  GammaApprox gamma;  // rightmost path to the horizon
  LeftBoundaryHistory history;
  std::uint64_t queries = 0;
};

struct CoupledRun {
  std::int64_t horizon = 0;
  Config primary;
  std::vector<CoupledCluster> clusters;
  std::vector<PairRecord> pairs;

  const PairRecord& pair(std::size_t a, std::size_t b) const {
    for (const auto& p : pairs)
      if ((p.left == a && p.right == b) || (p.left == b && p.right == a)) return p;
    fail(ErrorCode::InvalidArgument, "no such pair");
  }
};

namespace detail {

/// Reads the private stream until the first query of an edge known to an
/// earlier cluster, then the ledger of earlier clusters, then the primary
/// stream.
class SwitchingSource {
 public:
  SwitchingSource(Config own, Config primary, std::span<const ClusterState> earlier)
      : own_(own), primary_(primary), earlier_(earlier) {}

  bool operator()(const EdgeRef& e) {
    if (!switched_) {
      if (!known(e)) return own_(e);
      switched_ = true;
    }
    if (auto s = known(e)) return *s;
    return primary_(e);
  }

  bool switched() const { return switched_; }

 private:
  std::optional<bool> known(const EdgeRef& e) const {
    for (const auto& c : earlier_)
      if (auto s = c.explored_status(e)) return s;
    return std::nullopt;
  }

  Config own_;
  Config primary_;
  std::span<const ClusterState> earlier_;
  bool switched_ = false;
};

inline std::optional<std::int64_t> first_level(std::int64_t from, std::int64_t to, auto&& pred) {
  for (std::int64_t n = from; n <= to; ++n)
    if (pred(n)) return n;
  return std::nullopt;
}

/// min{n >= T : l^n_right(i) <= r_left(i) for some i in [T, n]}, replaying
/// the right cluster's left-boundary history incrementally.
inline std::optional<std::int64_t> kappa_rl(const CoupledCluster& left, const CoupledCluster& right,
                                            std::int64_t common_start, std::int64_t horizon) {
  LeftBoundaryCursor cur(right.history, right.start.t);
  while (cur.level() < common_start) cur.advance();
  std::vector<std::uint8_t> hit;
  std::int64_t hits = 0;
  bool first = true;
  for (std::int64_t n = common_start;; ) {
    const auto path = cur.path();
    const auto t0 = right.start.t;
    // levels whose entry may have changed
    std::int64_t from = first ? common_start : std::max(common_start, t0 + static_cast<std::int64_t>(cur.low_water()));
    first = false;
    hit.resize(static_cast<std::size_t>(n - common_start + 1), 0);
    for (std::int64_t i = from; i <= n; ++i) {
      auto& h = hit[static_cast<std::size_t>(i - common_start)];
      const std::uint8_t now = path[static_cast<std::size_t>(i - t0)] <= left.right.at(i);
      hits += static_cast<std::int64_t>(now) - static_cast<std::int64_t>(h);
      h = now;
    }
    if (hits > 0) return n;
    if (n == horizon) return std::nullopt;
    cur.advance();
    ++n;
  }
}

}  // namespace detail

inline PairRecord make_pair_record(const std::vector<CoupledCluster>& cl, std::size_t a, std::size_t b,
                                   std::int64_t horizon, const CoupleOptions& opts) {
  const auto& A = cl[a];
  const auto& B = cl[b];
  PairRecord rec;
  rec.common_start = std::max(A.start.t, B.start.t);
  const std::int64_t T = rec.common_start;
  if (A.start.t == B.start.t) {
    rec.structure = PairStructure::EqualTime;
    rec.left = A.start.x <= B.start.x ? a : b;
  } else if (A.right.at(T) <= B.gamma.at(T)) {
    rec.structure = PairStructure::Ordered;
    rec.left = a;
  } else if (B.right.at(T) <= A.gamma.at(T)) {
    rec.structure = PairStructure::Ordered;
    rec.left = b;
  } else {
    rec.structure = PairStructure::Unstructured;
    rec.left = A.right.at(T) <= B.right.at(T) ? a : b;
  }
  rec.right = rec.left == a ? b : a;
  const auto& L = cl[rec.left];
  const auto& R = cl[rec.right];
  auto& k = rec.times;
  k.kappa_rr = detail::first_level(T, horizon, [&](std::int64_t n) { return R.right.at(n) <= L.right.at(n); });
  k.kappa_gamma_gamma =
      detail::first_level(T, horizon, [&](std::int64_t n) { return R.gamma.at(n) <= L.gamma.at(n); });
  k.gamma_provisional = k.kappa_gamma_gamma && *k.kappa_gamma_gamma > horizon - opts.survival_margin;
  if (R.history.levels() > 0) {
    k.kappa_rl = detail::kappa_rl(L, R, T, horizon);
    k.kappa_rl_computed = true;
  }
  return rec;
}

/// Inductive construction over `starts` (ordered by (t, x)). Cluster k uses
/// stream replica_stream(replica, k) privately; stream offset 0 is the
/// primary configuration.
inline CoupledRun run_coupled_many(std::span<const LatticeSite> starts, std::int64_t horizon,
                                   std::uint64_t seed, double p, std::uint64_t replica = 0,
                                   CoupleOptions opts = {}) {
  if (starts.size() < 2) fail(ErrorCode::InvalidArgument, "need at least two starts");
  if (starts.size() > kStreamsPerReplica) fail(ErrorCode::InvalidArgument, "too many starts for one replica");
  for (std::size_t k = 0; k < starts.size(); ++k) {
    require_even(starts[k]);
    if (horizon < starts[k].t) fail(ErrorCode::InvalidArgument, "horizon precedes a start time");
    if (k > 0 && (starts[k].t < starts[k - 1].t ||
                  (starts[k].t == starts[k - 1].t && starts[k].x < starts[k - 1].x)))
      fail(ErrorCode::InvalidArgument, "starts must be ordered by (t, x)");
  }
  CoupledRun run;
  run.horizon = horizon;
  run.primary = Config(seed, p, replica_stream(replica, 0));
  std::vector<ClusterState> built;
  built.reserve(starts.size());
  const ExploreOptions eo{opts.scan_guard, opts.record_history};
  for (std::size_t k = 0; k < starts.size(); ++k) {
    CoupledCluster c;
    c.start = starts[k];
    c.private_config = Config(seed, p, replica_stream(replica, k));
    ClusterState s(starts[k], eo);
    detail::SwitchingSource src(c.private_config, run.primary, built);
    while (s.level() < horizon) {
      const bool before = src.switched();
      s.advance_level(src);
      if (!before && src.switched()) c.switch_level = s.level();
    }
    c.right = right_boundary_of(s);
    c.gamma = gamma_of(s);
    c.history = s.history();
    c.queries = s.queries();
    run.clusters.push_back(std::move(c));
    built.push_back(std::move(s));
  }
  for (std::size_t a = 0; a < starts.size(); ++a)
    for (std::size_t b = a + 1; b < starts.size(); ++b)
      run.pairs.push_back(make_pair_record(run.clusters, a, b, horizon, opts));
  return run;
}

inline CoupledRun run_coupled_pair(LatticeSite z1, LatticeSite z2, std::int64_t horizon, std::uint64_t seed,
                                   double p, std::uint64_t replica = 0, CoupleOptions opts = {}) {
  if (z1.t == z2.t && z1.x > z2.x) fail(ErrorCode::InvalidArgument, "equal-time starts need z1.x <= z2.x");
  if (z2.t < z1.t) fail(ErrorCode::InvalidArgument, "z1 must not start after z2");
  const LatticeSite s[2] = {z1, z2};
  return run_coupled_many(s, horizon, seed, p, replica, opts);
}

/// kappa_rr of the coupled pair (z1, z2), exploring the second cluster only
/// until the right boundaries meet. nullopt when they have not met by
/// `horizon`.
inline std::optional<std::int64_t> coupled_kappa_rr(LatticeSite z1, LatticeSite z2, std::int64_t horizon,
                                                    std::uint64_t seed, double p, std::uint64_t replica = 0,
                                                    std::int64_t scan_guard = 10'000) {
  if (z1.t != z2.t || z1.x > z2.x) fail(ErrorCode::InvalidArgument, "need equal times and z1.x <= z2.x");
  const Config primary(seed, p, replica_stream(replica, 0));
  std::vector<ClusterState> first;
  first.push_back(explore_to_level(z1, horizon, primary, {scan_guard, false}));
  ClusterState s(z2, {scan_guard, false});
  detail::SwitchingSource src(Config(seed, p, replica_stream(replica, 1)), primary, first);
  for (std::int64_t n = z1.t;; ++n) {
    if (s.right_at(n) <= first[0].right_at(n)) return n;
    if (n == horizon) return std::nullopt;
    s.advance_level(src);
  }
}

struct ClauseResult {
  bool pass = true;
  std::optional<std::int64_t> first_violation;

  void violate(std::int64_t level) {
    if (pass) first_violation = level;
    pass = false;
  }
};

struct PairCheck {
  std::size_t left = 0, right = 0;
  ClauseResult coalescence;  // (i)   kappa_rr = kappa_rl, right boundaries merge
  ClauseResult left_merge;   // (ii)  left boundaries agree on [kappa_rr, n]
  ClauseResult gamma_merge;  // (iii) gamma merges at kappa_gg <= kappa_rr
  ClauseResult ordering;     // r_left <= r_right before kappa_rr

  bool pass() const { return coalescence.pass && left_merge.pass && gamma_merge.pass && ordering.pass; }
};

/// Checks the coalescence-structure clauses on one pair of a coupled run.
/// Pairs with unequal start times where neither one-sided ordering event
/// holds raise PreconditionNotMet.
inline PairCheck check_pair(const CoupledRun& run, const PairRecord& rec) {
  if (rec.structure == PairStructure::Unstructured)
    fail(ErrorCode::PreconditionNotMet,
         "clusters " + std::to_string(rec.left) + " and " + std::to_string(rec.right) +
             " start at different times without an ordering event");
  const auto& L = run.clusters[rec.left];
  const auto& R = run.clusters[rec.right];
  if (L.history.levels() == 0 || R.history.levels() == 0)
    fail(ErrorCode::InvalidArgument, "run was built without left-boundary history");
  const std::int64_t T = rec.common_start, H = run.horizon;
  const auto& k = rec.times;
  PairCheck out;
  out.left = rec.left;
  out.right = rec.right;

  // (i)
  if (k.kappa_rr != k.kappa_rl) out.coalescence.violate(k.kappa_rr.value_or(k.kappa_rl.value_or(H)));
  if (k.kappa_rr)
    for (std::int64_t n = *k.kappa_rr; n <= H; ++n)
      if (L.right.at(n) != R.right.at(n)) {
        out.coalescence.violate(n);
        break;
      }
  const std::int64_t merge = k.kappa_rr.value_or(H + 1);
  for (std::int64_t n = T; n < merge; ++n)
    if (L.right.at(n) > R.right.at(n)) {
      out.ordering.violate(n);
      break;
    }

  // (ii), replaying both left-boundary processes in lockstep
  if (k.kappa_rr) {
    const std::int64_t kr = *k.kappa_rr;
    LeftBoundaryCursor cl(L.history, L.start.t), cr(R.history, R.start.t);
    while (cl.level() < kr) cl.advance();
    while (cr.level() < kr) cr.advance();
    std::vector<std::uint8_t> bad;
    std::int64_t nbad = 0;
    for (std::int64_t n = kr;; ++n) {
      std::int64_t from = kr;
      if (n > kr)
        from = std::max(kr, std::min(L.start.t + static_cast<std::int64_t>(cl.low_water()),
                                     R.start.t + static_cast<std::int64_t>(cr.low_water())));
      bad.resize(static_cast<std::size_t>(n - kr + 1), 0);
      for (std::int64_t i = from; i <= n; ++i) {
        auto& b = bad[static_cast<std::size_t>(i - kr)];
        const std::uint8_t now = cl.at(i) != cr.at(i);
        nbad += static_cast<std::int64_t>(now) - static_cast<std::int64_t>(b);
        b = now;
      }
      if (nbad > 0) {
        out.left_merge.violate(n);
        break;
      }
      if (n == H) break;
      cl.advance();
      cr.advance();
    }
  }

  // (iii)
  const auto kg_alt = detail::first_level(T, H, [&](std::int64_t n) { return R.gamma.at(n) <= L.right.at(n); });
  if (kg_alt != k.kappa_gamma_gamma) out.gamma_merge.violate(kg_alt.value_or(H));
  if (k.kappa_rr && (!k.kappa_gamma_gamma || *k.kappa_gamma_gamma > *k.kappa_rr))
    out.gamma_merge.violate(*k.kappa_rr);
  if (k.kappa_gamma_gamma)
    for (std::int64_t n = *k.kappa_gamma_gamma; n <= H; ++n)
      if (L.gamma.at(n) != R.gamma.at(n)) {
        out.gamma_merge.violate(n);
        break;
      }
  return out;
}

inline std::vector<PairCheck> check_coalescence_structure(const CoupledRun& run) {
  std::vector<PairCheck> out;
  for (const auto& rec : run.pairs) out.push_back(check_pair(run, rec));
  return out;
}

struct SurvivalRow {
  double eps = 0;
  double t = 0;
  double empirical_survival = 0;
  double baseline_erf = 0;
  std::int64_t n_replicas = 0;
  std::int64_t n_censored = 0;
};

/// Empirical P(eps * kappa_rr > t) for starts (0, 0) and (gap, 0), against
/// erf(delta / (2 sqrt t)) with delta = gap * sqrt(eps) / sigma_hat. Pairs
/// that have not met by the horizon ceil(max t / eps) count as surviving.
inline std::vector<SurvivalRow> coalescence_survival_curve(std::int64_t gap, double p, std::span<const double> eps_list,
                                                           std::span<const double> t_grid, std::int64_t replicas,
                                                           double sigma_hat, std::uint64_t seed, int workers = 1,
                                                           std::uint64_t first_replica = 0) {
  if (gap <= 0 || gap % 2) fail(ErrorCode::InvalidArgument, "lattice gap must be even and positive");
  if (replicas <= 0 || !(sigma_hat > 0)) fail(ErrorCode::InvalidArgument, "need replicas and sigma_hat > 0");
  if (t_grid.empty() || eps_list.empty()) fail(ErrorCode::InvalidArgument, "empty grid");
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  std::vector<SurvivalRow> rows;
  for (double eps : eps_list) {
    if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
    const auto horizon = static_cast<std::int64_t>(std::ceil(t_max / eps));
    auto kappas = parallel_map(replicas, workers, [&](std::int64_t r) {
      return coupled_kappa_rr({0, 0}, {gap, 0}, horizon, seed, p, first_replica + static_cast<std::uint64_t>(r));
    });
    const double delta = static_cast<double>(gap) * std::sqrt(eps) / sigma_hat;
    for (double t : t_grid) {
      SurvivalRow row;
      row.eps = eps;
      row.t = t;
      row.n_replicas = replicas;
      std::int64_t alive = 0;
      for (const auto& k : kappas) {
        if (!k) {
          ++row.n_censored;
          ++alive;
        } else if (eps * static_cast<double>(*k) > t) {
          ++alive;
        }
      }
      row.empirical_survival = static_cast<double>(alive) / static_cast<double>(replicas);
      row.baseline_erf = t > 0 ? oracle::cbm_baseline(delta, t) : 1.0;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace percweb
