#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "percweb/couple.hpp"
#include "percweb/metrics.hpp"

using namespace percweb;

namespace {

RescaledPath random_path(std::mt19937_64& rng, double t0 = 0.0) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int len = 2 + static_cast<int>(rng() % 20);
  std::vector<double> t, v;
  double tt = t0 + u(rng);
  for (int k = 0; k < len; ++k) {
    t.push_back(tt);
    v.push_back(u(rng));
    tt += 0.1 + std::abs(u(rng)) / 3;
  }
  return {t, v};
}

std::vector<std::int64_t> random_walk(std::mt19937_64& rng, std::size_t len) {
  std::vector<std::int64_t> x{0};
  for (std::size_t k = 1; k < len; ++k) x.push_back(x.back() + (rng() % 2 ? 1 : -1));
  return x;
}

TEST(Rho, CompactificationLimits) {
  EXPECT_DOUBLE_EQ(rho(1.0, 2.0, 1.0, 2.0), 0.0);
  const auto inf = CompactifiedPoint::of(5.0, INFINITY);
  const auto inf2 = CompactifiedPoint::of(-7.0, INFINITY);
  EXPECT_DOUBLE_EQ(rho(inf, inf2), 0.0);
  EXPECT_DOUBLE_EQ(CompactifiedPoint::of(INFINITY, 0).u, 1.0);
  EXPECT_DOUBLE_EQ(rho(0, -INFINITY, 0, INFINITY), 2.0);
  const auto p = CompactifiedPoint::of(1e6, 3.0);
  EXPECT_LT(p.u, 1.0);
}

TEST(Shear, IdentityAndDriftRemoval) {
  const std::vector<std::int64_t> xs{0, 1, 0, -1, 0, 1};
  const auto id = shear_rescale(3, xs, 0.0, 1.0, 1.0);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    EXPECT_DOUBLE_EQ(id.times()[k], 3.0 + static_cast<double>(k));
    EXPECT_DOUBLE_EQ(id.values()[k], static_cast<double>(xs[k]));
  }
  const RescaledPath drift({0, 1, 2, 3}, {0.0, 0.5, 1.0, 1.5});
  const auto flat = shear_rescale(drift, 0.5, 0.9, 0.01);
  for (double v : flat.values()) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(flat.sigma(), 0.0);
  EXPECT_DOUBLE_EQ(flat.end_time(), 0.03);
}

TEST(Shear, RejectsBadScales) {
  const std::vector<std::int64_t> xs{0, 1};
  EXPECT_THROW((void)shear_rescale(0, xs, 0.0, 0.0, 1.0), Error);
  EXPECT_THROW((void)shear_rescale(0, xs, 0.0, 1.0, -1.0), Error);
}

TEST(Shear, CompositionIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto xs = random_walk(rng, 200);
    const double a = u(rng) - 1.0, b = u(rng), eps = u(rng) / 100;
    const auto direct = shear_rescale(5, xs, a, b, eps);
    const auto two = shear_rescale(shear_rescale(5, xs, a, 1.0, 1.0), 0.0, b, eps);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      EXPECT_NEAR(direct.values()[k], two.values()[k], 1e-12);
      EXPECT_NEAR(direct.times()[k], two.times()[k], 1e-12);
    }
  }
}

TEST(PathDistance, ConstantPaths) {
  const RescaledPath zero({0.0, 1000.0}, {0.0, 0.0}), one({0.0, 1000.0}, {1.0, 1.0});
  EXPECT_NEAR(path_distance(zero, one), std::tanh(1.0), 1e-15);
  EXPECT_NEAR(path_distance(zero, one), 0.7615941559557649, 1e-15);
  EXPECT_DOUBLE_EQ(path_distance(zero, zero), 0.0);
}

TEST(PathDistance, StartTimesAndExtension) {
  // Same values, different start: only the start-time term and the
  // pre-start freeze differ.
  const RescaledPath a({0.0, 1.0}, {0.0, 0.0}), b({2.0, 3.0}, {0.0, 0.0});
  EXPECT_NEAR(path_distance(a, b), std::tanh(2.0), 1e-15);
  // A path ending early is held at its last value.
  const RescaledPath c({0.0, 1.0}, {0.0, 1.0}), d({0.0, 10.0}, {0.0, 10.0});
  EXPECT_GT(path_distance(c, d), 0.0);
}

// Between grid points the true sup of a piecewise-linear difference can
// exceed the sampled one only by the change over one grid cell.
TEST(PathDistance, GridErrorIsSmall) {
  const RescaledPath a({0.0, 1.0}, {0.0, 0.0}), b({0.0, 0.5, 1.0}, {0.0, 0.3, 0.0});
  double dense = 0;
  for (int k = 0; k <= 100000; ++k) {
    const double t = k / 100000.0;
    dense = std::max(dense, std::abs(std::tanh(a.at(t)) - std::tanh(b.at(t))) / (1 + t));
  }
  EXPECT_NEAR(path_distance(a, b), dense, 0.3 / kDistanceGridPerUnit);
  EXPECT_LE(path_distance(a, b), dense + 1e-15);
}

TEST(PathDistance, MetricAxioms) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_path(rng), q = random_path(rng), r = random_path(rng);
    const double pq = path_distance(p, q), qp = path_distance(q, p);
    EXPECT_DOUBLE_EQ(pq, qp);
    EXPECT_DOUBLE_EQ(path_distance(p, p), 0.0);
    EXPECT_GE(pq, 0.0);
    // Each distance is a max over its own grid; allow the grid error.
    EXPECT_LE(path_distance(p, r), pq + path_distance(q, r) + 0.05);
  }
}

double naive_hausdorff(std::span<const RescaledPath> a, std::span<const RescaledPath> b) {
  double h = 0;
  for (const auto& x : a) {
    double m = INFINITY;
    for (const auto& y : b) m = std::min(m, path_distance(x, y));
    h = std::max(h, m);
  }
  for (const auto& y : b) {
    double m = INFINITY;
    for (const auto& x : a) m = std::min(m, path_distance(x, y));
    h = std::max(h, m);
  }
  return h;
}

TEST(SetDistance, AgreesWithTheDoubleLoop) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RescaledPath> a, b;
    const int na = 1 + static_cast<int>(rng() % 8), nb = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < na; ++i) a.push_back(random_path(rng));
    for (int i = 0; i < nb; ++i) b.push_back(random_path(rng));
    EXPECT_DOUBLE_EQ(set_distance(a, b), naive_hausdorff(a, b));
    EXPECT_DOUBLE_EQ(set_distance(a, b), set_distance(b, a));
    EXPECT_DOUBLE_EQ(set_distance(a, a), 0.0);
  }
}

TEST(SetDistance, ContainmentAndErrors) {
  std::mt19937_64 rng(13);
  std::vector<RescaledPath> big;
  for (int i = 0; i < 6; ++i) big.push_back(random_path(rng));
  const std::vector<RescaledPath> small(big.begin(), big.begin() + 3);
  double expect = 0;
  for (std::size_t i = 3; i < big.size(); ++i) {
    double m = INFINITY;
    for (const auto& s : small) m = std::min(m, path_distance(big[i], s));
    expect = std::max(expect, m);
  }
  EXPECT_DOUBLE_EQ(set_distance(small, big), expect);
  EXPECT_THROW((void)set_distance({}, big), Error);
}

TEST(Eta, SmallCases) {
  const std::vector<RescaledPath> none;
  EXPECT_EQ(eta_count(std::span<const RescaledPath>(none), 0.0, 1.0, -1.0, 1.0), 0);
  const std::vector<RescaledPath> one{RescaledPath({0.0, 5.0}, {0.0, 2.0})};
  EXPECT_EQ(eta_count(std::span<const RescaledPath>(one), 0.0, 1.0, -1.0, 1.0), 1);
  EXPECT_EQ(eta_count(std::span<const RescaledPath>(one), 0.0, 1.0, 0.5, 1.0), 0);
  // A path starting after t0 is excluded.
  const std::vector<RescaledPath> late{RescaledPath({1.0, 5.0}, {0.0, 2.0})};
  EXPECT_EQ(eta_count(std::span<const RescaledPath>(late), 0.0, 1.0, -1.0, 1.0), 0);
}

struct LatticePath {
  std::int64_t t0;
  std::vector<std::int64_t> xs;
  double sigma() const { return static_cast<double>(t0); }
  double at(double t) const {
    const auto k = static_cast<std::size_t>(std::clamp<double>(t - static_cast<double>(t0), 0, static_cast<double>(xs.size() - 1)));
    return static_cast<double>(xs[k]);
  }
};

// Coalescing lattice families from one configuration: eta against a direct
// distinct count, monotonicity in t and in [a, b].
TEST(Eta, LatticeFamilies) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Config cfg(seed, 0.8, 2);
    std::vector<LatticePath> paths;
    for (std::int64_t x = 0; x <= 12; x += 2) {
      const auto s = explore_to_level({x, 0}, 60, cfg);
      paths.push_back({0, {s.right_boundary().begin(), s.right_boundary().end()}});
    }
    std::set<std::int64_t> direct;
    for (const auto& p : paths) direct.insert(p.xs[60]);
    const auto all = eta_count<LatticePath>(paths, 0.0, 60.0, 0.0, 12.0);
    EXPECT_EQ(all, static_cast<std::int64_t>(direct.size()));
    std::int64_t prev = 1 << 30;
    for (int t = 1; t <= 60; t += 7) {
      const auto e = eta_count<LatticePath>(paths, 0.0, t, 0.0, 12.0);
      EXPECT_LE(e, prev);
      prev = e;
    }
    EXPECT_LE(eta_count<LatticePath>(paths, 0.0, 30.0, 2.0, 8.0), eta_count<LatticePath>(paths, 0.0, 30.0, 0.0, 12.0));
    EXPECT_LE(eta_count<LatticePath>(std::span(paths).first(3), 0.0, 30.0, 0.0, 12.0),
              eta_count<LatticePath>(paths, 0.0, 30.0, 0.0, 12.0));
  }
}

TEST(Family, ShortcutMatchesFullExplorations) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Config cfg(seed, 0.75, 6);
    const std::vector<std::int64_t> xs{0, 2, 4, 8, 10, 20};
    const auto fast = family_right_boundaries(cfg, xs, 300);
    for (std::size_t i = 0; i < xs.size(); ++i)
      EXPECT_EQ(fast[i], explore_to_level({xs[i], 0}, 300, cfg).right_at(300)) << seed << " " << i;
  }
}

TEST(Separation, FarApartAndLongTimes) {
  const double deltas[] = {0.5, 2.0};
  const auto rows = b1_battery(0.8, 0.01, 0.5, deltas, 400, 0.87, 3);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[0].estimate, rows[1].estimate);
  EXPECT_EQ(rows[0].steps, 50);
  EXPECT_EQ(rows[0].lattice_gap % 2, 0);
  for (const auto& r : rows) {
    EXPECT_LE(r.ci_low, r.estimate);
    EXPECT_GE(r.ci_high, r.estimate);
  }
  const double small[] = {0.05};
  const auto late = b1_battery(0.8, 0.01, 200.0, small, 200, 0.87, 3);
  EXPECT_LT(late[0].estimate, 0.05);
}

TEST(Separation, SmallDeltaTrend) {
  const double deltas[] = {0.8, 0.4, 0.2, 0.1};
  const auto rows = b1_battery(0.8, 0.0025, 1.0, deltas, 600, 0.87, 8);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].ci_low, rows[i - 1].ci_high);
  EXPECT_LT(rows.back().estimate, rows.front().estimate);
}

// P(eta >= 2) for starts 0 and x_eps against the random-walk limit.
TEST(Separation, AgreesWithTheWalkOracle) {
  const double sigma = 0.8711;
  const double deltas[] = {1.0};
  const auto rows = b1_battery(0.8, 0.0005, 1.0, deltas, 4000, sigma, 21);
  const double eff_delta = static_cast<double>(rows[0].lattice_gap) * std::sqrt(0.0005) / sigma;
  const auto w = oracle::coalescing_walk_survival(eff_delta, 1.0, 200'000, 22);
  EXPECT_NEAR(rows[0].estimate, w.survival, 0.03);
}

TEST(Fkg, DegenerateCases) {
  const auto x1 = b2_fkg_check(0.8, 100, 1, 200, 1);
  EXPECT_DOUBLE_EQ(x1.p3, 0.0);
  EXPECT_TRUE(x1.holds());
  const auto full = b2_fkg_check(1.0, 50, 5, 20, 1);
  EXPECT_DOUBLE_EQ(full.p3, 1.0);
  EXPECT_DOUBLE_EQ(full.p2, 1.0);
  EXPECT_DOUBLE_EQ(full.margin(), 0.0);
  EXPECT_TRUE(full.holds());
  EXPECT_THROW((void)b2_fkg_check(0.8, 10, 0, 10, 1), Error);
}

TEST(Fkg, EtaFamilyAgainstDirectCount) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Config cfg(seed, 0.8, replica_stream(seed));
    std::set<std::int64_t> ends;
    for (std::int64_t i = 0; i <= 6; ++i) ends.insert(explore_to_level({2 * i, 0}, 200, cfg).right_at(200));
    EXPECT_EQ(eta_family(cfg, 200, 6), static_cast<std::int64_t>(ends.size()));
  }
}

}  // namespace
