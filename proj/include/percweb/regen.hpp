#pragma once

// Break points along right-boundary trajectories and the renewal estimators
// of the drift alpha and diffusivity sigma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "percweb/error.hpp"
#include "percweb/explore.hpp"
#include "percweb/lattice.hpp"
#include "percweb/parallel.hpp"
#include "percweb/stats.hpp"

namespace percweb {

/// One break-point increment. For the first record X and tau are measured
/// from the start site; later ones from the previous break point.
struct RegenRecord {
  std::int64_t T = 0;
  std::int64_t X = 0;
  std::int64_t tau = 0;

  friend bool operator==(const RegenRecord&, const RegenRecord&) = default;
};

/// Rejects trajectories whose rightward steps exceed one.
inline void validate_right_boundary(const RightBoundaryTrajectory& traj) {
  for (std::size_t k = 1; k < traj.values.size(); ++k)
    if (traj.values[k] - traj.values[k - 1] > 1)
      fail(ErrorCode::InvalidArgument,
           "right boundary jumps right by more than one at level " +
               std::to_string(traj.start.t + static_cast<std::int64_t>(k)));
}

/// Break points of r on [start.t, end] given a cluster explored to a horizon
/// beyond `end`. (r(n), n) reaches the horizon level exactly when the
/// rightmost path to the horizon passes through it, i.e. when l^H(n) = r(n).
inline std::vector<RegenRecord> break_points_from(const ClusterState& explored, std::int64_t end) {
  if (explored.level() <= end) fail(ErrorCode::InvalidArgument, "survival horizon must exceed the trajectory end");
  const auto origin = explored.origin();
  std::vector<RegenRecord> out;
  std::int64_t prev_t = origin.t, prev_x = origin.x;
  for (std::int64_t j = origin.t; j <= end; ++j) {
    const std::int64_t r = explored.right_at(j);
    if (explored.left_at(j) != r) continue;
    out.push_back({j, r - prev_x, j - prev_t});
    prev_t = j;
    prev_x = r;
  }
  return out;
}

/// Break points along `traj`, detected by survival of (r(n), n) to level
/// `survival_horizon`. The trajectory must be the right boundary of
/// `cfg` started at traj.start; the tail after the last break point is an
/// incomplete increment and produces no record.
inline std::vector<RegenRecord> detect_break_points(const RightBoundaryTrajectory& traj,
                                                    const Config& cfg,
                                                    std::int64_t survival_horizon,
                                                    ExploreOptions opts = {}) {
  if (traj.values.empty()) fail(ErrorCode::InvalidArgument, "empty trajectory");
  if (survival_horizon <= traj.end_time())
    fail(ErrorCode::InvalidArgument, "survival horizon must exceed the trajectory end");
  validate_right_boundary(traj);
  const auto explored = explore_to_level(traj.start, survival_horizon, cfg, opts);
  for (std::int64_t j = traj.start.t; j <= traj.end_time(); ++j)
    if (explored.right_at(j) != traj.at(j))
      fail(ErrorCode::InvalidArgument, "trajectory is not the right boundary of this configuration");
  return break_points_from(explored, traj.end_time());
}

/// Records with i >= 2, the i.i.d. part.
inline std::span<const RegenRecord> stationary_records(std::span<const RegenRecord> all) {
  return all.empty() ? all : all.subspan(1);
}

/// Power sums of (X, tau); merging is associative.
struct RegenMoments {
  double n = 0, sx = 0, st = 0, sxx = 0, sxt = 0, stt = 0;

  void add(const RegenRecord& r) {
    const double x = static_cast<double>(r.X), t = static_cast<double>(r.tau);
    n += 1;
    sx += x;
    st += t;
    sxx += x * x;
    sxt += x * t;
    stt += t * t;
  }
  RegenMoments& operator+=(const RegenMoments& o) {
    n += o.n;
    sx += o.sx;
    st += o.st;
    sxx += o.sxx;
    sxt += o.sxt;
    stt += o.stt;
    return *this;
  }

  double alpha() const { return sx / st; }

  /// Plug-in form of E[(X E[tau] - tau E[X])^2] / E[tau]^3.
  double sigma2() const {
    const double mx = sx / n, mt = st / n;
    const double num = mt * mt * (sxx / n) - 2 * mt * mx * (sxt / n) + mx * mx * (stt / n);
    return std::max(0.0, num) / (mt * mt * mt);
  }
};

struct DriftDiffusivity {
  double alpha_hat = 0;
  double alpha_se = 0;
  double sigma_hat = 0;
  double sigma_se = 0;
  std::int64_t n_records = 0;
};

inline constexpr int kBatchCount = 30;

/// Ratio estimators of alpha and sigma with batch-means standard errors
/// over min(30, n) contiguous batches. The caller passes only stationary
/// (i >= 2) records.
inline DriftDiffusivity estimate_alpha_sigma(std::span<const RegenRecord> records) {
  if (records.size() < 2) fail(ErrorCode::InsufficientData, "need at least two regeneration records");
  RegenMoments all;
  for (const auto& r : records) all.add(r);
  DriftDiffusivity out;
  out.n_records = static_cast<std::int64_t>(records.size());
  out.alpha_hat = all.alpha();
  out.sigma_hat = std::sqrt(all.sigma2());

  const std::size_t b = std::min<std::size_t>(kBatchCount, records.size());
  std::vector<double> alphas, sigmas;
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t lo = records.size() * k / b, hi = records.size() * (k + 1) / b;
    RegenMoments m;
    for (std::size_t i = lo; i < hi; ++i) m.add(records[i]);
    alphas.push_back(m.alpha());
    sigmas.push_back(std::sqrt(m.sigma2()));
  }
  const double bb = static_cast<double>(b);
  out.alpha_se = std::sqrt(stats::variance(alphas) / bb);
  out.sigma_se = std::sqrt(stats::variance(sigmas) / bb);
  return out;
}

/// Independent configurations for replicas [first, first + count).
inline std::vector<Config> replica_configs(std::uint64_t seed, double p, std::int64_t first,
                                           std::int64_t count) {
  std::vector<Config> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t r = first; r < first + count; ++r)
    out.emplace_back(seed, p, replica_stream(static_cast<std::uint64_t>(r)));
  return out;
}

struct ReplicaEstimate {
  DriftDiffusivity estimate;
  std::vector<std::int64_t> endpoints;  // r(n) per replica
  std::vector<double> slopes;           // r(n) / n per replica
};

/// Pools the stationary break-point records of one cluster per
/// configuration, each explored to n + margin with break points taken on
/// [0, n]. Records are concatenated in replica order.
inline ReplicaEstimate estimate_from_replicas(std::span<const Config> configs, std::int64_t n,
                                              std::int64_t margin, int workers = 1) {
  if (configs.empty() || n <= 0 || margin <= 0)
    fail(ErrorCode::InvalidArgument, "need replicas, n > 0 and margin > 0");
  struct One {
    std::vector<RegenRecord> records;
    std::int64_t end = 0;
  };
  auto runs = parallel_map(static_cast<std::int64_t>(configs.size()), workers, [&](std::int64_t i) {
    const auto s = explore_to_level({0, 0}, n + margin, configs[static_cast<std::size_t>(i)]);
    auto recs = break_points_from(s, n);
    const auto st = stationary_records(recs);
    return One{{st.begin(), st.end()}, s.right_at(n)};
  });
  ReplicaEstimate out;
  std::vector<RegenRecord> pooled;
  for (const auto& r : runs) {
    pooled.insert(pooled.end(), r.records.begin(), r.records.end());
    out.endpoints.push_back(r.end);
    out.slopes.push_back(static_cast<double>(r.end) / static_cast<double>(n));
  }
  out.estimate = estimate_alpha_sigma(pooled);
  return out;
}

struct CltResult {
  double ks = 0;
  std::int64_t samples = 0;
  bool low_resolution = false;
  std::vector<double> normalized;
};

/// KS distance between the law of (r(n) - alpha n) / (sigma sqrt n) over the
/// given configurations (one cluster from the origin each) and the standard
/// normal. n < 100 is flagged as low resolution but still computed.
inline CltResult clt_check(std::span<const Config> configs, std::int64_t n, double alpha,
                           double sigma, int workers = 1) {
  if (configs.empty()) fail(ErrorCode::InvalidArgument, "no configurations");
  if (!(sigma > 0) || n <= 0) fail(ErrorCode::InvalidArgument, "sigma and n must be positive");
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  auto values = parallel_map(static_cast<std::int64_t>(configs.size()), workers, [&](std::int64_t i) {
    const auto s = explore_to_level({0, 0}, n, configs[static_cast<std::size_t>(i)]);
    return (static_cast<double>(s.right_at(n)) - alpha * static_cast<double>(n)) / scale;
  });
  CltResult out;
  out.samples = static_cast<std::int64_t>(values.size());
  out.low_resolution = n < 100;
  out.ks = stats::ks_normal(values);
  out.normalized = std::move(values);
  return out;
}

struct ErrorGapEvents {
  bool sup_error = false;  // sup_{[0, window]} |r - gamma| >= threshold
  bool long_gap = false;   // r != gamma on some [t, t + threshold] with t in [0, window]
};

/// Both events on integer data starting at time 0. r and gamma are linear
/// between integer times and r >= gamma, so they differ on the open interval
/// between consecutive coincidence times and nowhere else. The data must
/// cover [0, window + threshold + 1].
inline ErrorGapEvents error_gap_events(std::span<const std::int64_t> r,
                                       std::span<const std::int64_t> gamma, double window,
                                       double threshold) {
  const auto last = static_cast<std::int64_t>(std::floor(window));
  const auto need = static_cast<std::size_t>(std::ceil(window + threshold)) + 2;
  if (r.size() < need || gamma.size() < need)
    fail(ErrorCode::InvalidArgument, "trajectory too short for the requested window");
  ErrorGapEvents ev;
  for (std::int64_t j = 0; j <= last; ++j)
    if (static_cast<double>(std::abs(r[static_cast<std::size_t>(j)] - gamma[static_cast<std::size_t>(j)])) >= threshold)
      ev.sup_error = true;

  // Maximal intervals where r != gamma: [0, c_first) when r(0) != gamma(0),
  // (c_k, c_k+1) for coincidences two or more steps apart, and (c_last, end).
  // [t, t + threshold] fits inside (a, b) with t in [0, window] iff
  // a < window and a < b - threshold; for the interval closed at 0 iff
  // threshold < b.
  const auto size = static_cast<std::int64_t>(need);
  auto fits = [&](double a, double b, bool closed_at_zero) {
    return closed_at_zero ? threshold < b : (a < window && a < b - threshold);
  };
  std::int64_t prev = -1;
  for (std::int64_t j = 0; j < size && !ev.long_gap; ++j) {
    if (r[static_cast<std::size_t>(j)] != gamma[static_cast<std::size_t>(j)]) continue;
    if (prev < 0 && j > 0)
      ev.long_gap = fits(0.0, static_cast<double>(j), true);
    else if (prev >= 0 && j - prev >= 2)
      ev.long_gap = fits(static_cast<double>(prev), static_cast<double>(j), false);
    prev = j;
  }
  if (!ev.long_gap && prev < size - 1) {
    // runs past the end of the data, which extends beyond window + threshold
    const double b = static_cast<double>(size);
    ev.long_gap = prev < 0 ? fits(0.0, b, true) : fits(static_cast<double>(prev), b, false);
  }
  return ev;
}

struct ErrorGapRow {
  double eps = 0;
  double window = 0;
  double threshold = 0;
  std::int64_t replicas = 0;
  std::int64_t sup_error_count = 0;
  std::int64_t long_gap_count = 0;
  stats::Interval sup_error_ci;
  stats::Interval long_gap_ci;

  double sup_error_freq() const { return static_cast<double>(sup_error_count) / static_cast<double>(replicas); }
  double long_gap_freq() const { return static_cast<double>(long_gap_count) / static_cast<double>(replicas); }
};

/// Frequencies of the sup-error and no-meeting-gap events over windows
/// [0, L / eps] with threshold eps^-delta. gamma is approximated by the
/// rightmost path to `margin` levels past the longest window; all eps values
/// share the same replicas.
inline std::vector<ErrorGapRow> error_gap_frequencies(std::span<const Config> configs,
                                                      std::span<const double> eps_list, double delta,
                                                      double L, std::int64_t margin = 500,
                                                      int workers = 1) {
  if (!(delta > 0 && delta < 1) || !(L > 0)) fail(ErrorCode::InvalidArgument, "need 0 < delta < 1 and L > 0");
  if (eps_list.empty() || configs.empty()) fail(ErrorCode::InvalidArgument, "empty eps list or replica set");
  std::vector<ErrorGapRow> rows;
  std::int64_t longest = 0;
  for (double eps : eps_list) {
    if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
    ErrorGapRow row;
    row.eps = eps;
    row.window = L / eps;
    row.threshold = std::pow(eps, -delta);
    row.replicas = static_cast<std::int64_t>(configs.size());
    rows.push_back(row);
    longest = std::max(longest, static_cast<std::int64_t>(std::ceil(row.window + row.threshold)) + 2);
  }
  const std::int64_t horizon = longest + margin;
  auto events = parallel_map(static_cast<std::int64_t>(configs.size()), workers, [&](std::int64_t i) {
    const auto s = explore_to_level({0, 0}, horizon, configs[static_cast<std::size_t>(i)]);
    const auto gamma = s.left_boundary();
    std::vector<ErrorGapEvents> ev;
    for (const auto& row : rows) ev.push_back(error_gap_events(s.right_boundary(), gamma, row.window, row.threshold));
    return ev;
  });
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& ev : events) {
      rows[k].sup_error_count += ev[k].sup_error;
      rows[k].long_gap_count += ev[k].long_gap;
    }
    rows[k].sup_error_ci = stats::wilson(rows[k].sup_error_count, rows[k].replicas);
    rows[k].long_gap_ci = stats::wilson(rows[k].long_gap_count, rows[k].replicas);
  }
  return rows;
}

}  // namespace percweb
