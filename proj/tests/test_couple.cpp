#include <gtest/gtest.h>

#include <algorithm>

#include "percweb/couple.hpp"
#include "percweb/stats.hpp"

using namespace percweb;

namespace {

TEST(Coupled, ParallelBoundariesAtFullDensity) {
  const auto run = run_coupled_pair({0, 0}, {4, 0}, 300, 1, 1.0);
  const auto& k = run.pairs.at(0).times;
  EXPECT_FALSE(k.kappa_rr);
  EXPECT_FALSE(k.kappa_rl);
  EXPECT_FALSE(k.kappa_gamma_gamma);
  for (std::int64_t n = 0; n <= 300; ++n) {
    EXPECT_EQ(run.clusters[0].right.at(n), n);
    EXPECT_EQ(run.clusters[1].right.at(n), 4 + n);
  }
  const auto checks = check_coalescence_structure(run);
  ASSERT_EQ(checks.size(), 1u);
  EXPECT_TRUE(checks[0].pass());
}

TEST(Coupled, IdenticalStartsCoalesceImmediately) {
  const auto run = run_coupled_pair({2, 4}, {2, 4}, 500, 9, 0.8);
  const auto& k = run.pairs.at(0).times;
  ASSERT_TRUE(k.kappa_rr && k.kappa_rl && k.kappa_gamma_gamma);
  EXPECT_EQ(*k.kappa_rr, 4);
  EXPECT_EQ(*k.kappa_rl, 4);
  EXPECT_EQ(*k.kappa_gamma_gamma, 4);
  EXPECT_EQ(run.clusters[0].right.values, run.clusters[1].right.values);
  EXPECT_EQ(run.clusters[0].gamma.values, run.clusters[1].gamma.values);
  // The first query happens while advancing from level 4 to level 5.
  EXPECT_EQ(run.clusters[1].switch_level, std::optional<std::int64_t>(5));
  EXPECT_TRUE(check_coalescence_structure(run)[0].pass());
}

TEST(Coupled, AllStartsEqual) {
  const LatticeSite starts[] = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
  const auto run = run_coupled_many(starts, 200, 4, 0.8);
  EXPECT_EQ(run.pairs.size(), 6u);
  for (const auto& p : run.pairs) EXPECT_EQ(p.times.kappa_rr, std::optional<std::int64_t>(0));
  for (const auto& c : run.clusters) EXPECT_EQ(c.right.values, run.clusters[0].right.values);
}

TEST(Coupled, ArgumentErrors) {
  EXPECT_THROW((void)run_coupled_pair({4, 0}, {0, 0}, 10, 1, 0.8), Error);
  EXPECT_THROW((void)run_coupled_pair({0, 0}, {2, 0}, -1, 1, 0.8), Error);
  EXPECT_THROW((void)run_coupled_pair({0, 2}, {2, 0}, 10, 1, 0.8), Error);
  const LatticeSite one[] = {{0, 0}};
  EXPECT_THROW((void)run_coupled_many(one, 10, 1, 0.8), Error);
  std::vector<LatticeSite> many(65, LatticeSite{0, 0});
  EXPECT_THROW((void)run_coupled_many(many, 10, 1, 0.8), Error);
}

// Before its switch level a cluster sees only its private stream, so its
// boundaries agree with a standalone exploration of that stream.
TEST(Coupled, PreSwitchEqualsStandalone) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto run = run_coupled_pair({0, 0}, {6, 0}, 800, seed, 0.8, 3);
    const auto& c = run.clusters[1];
    const auto alone = explore_to_level({6, 0}, 800, c.private_config);
    const std::int64_t until = c.switch_level ? *c.switch_level - 1 : 800;
    for (std::int64_t j = 0; j <= until; ++j) EXPECT_EQ(c.right.at(j), alone.right_at(j)) << seed << " " << j;
    // Cluster 0 is the standalone exploration of the primary stream.
    const auto first = explore_to_level({0, 0}, 800, run.primary);
    EXPECT_EQ(run.clusters[0].right.values, std::vector<std::int64_t>(first.right_boundary().begin(),
                                                                      first.right_boundary().end()));
  }
}

TEST(Coupled, ReplayIsBitExact) {
  const LatticeSite starts[] = {{0, 0}, {4, 0}, {11, 3}};
  const auto a = run_coupled_many(starts, 1000, 77, 0.8, 5);
  const auto b = run_coupled_many(starts, 1000, 77, 0.8, 5);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.clusters[k].right.values, b.clusters[k].right.values);
    EXPECT_EQ(a.clusters[k].gamma.values, b.clusters[k].gamma.values);
    EXPECT_EQ(a.clusters[k].switch_level, b.clusters[k].switch_level);
    EXPECT_EQ(a.clusters[k].queries, b.clusters[k].queries);
  }
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].times.kappa_rr, b.pairs[i].times.kappa_rr);
    EXPECT_EQ(a.pairs[i].times.kappa_rl, b.pairs[i].times.kappa_rl);
    EXPECT_EQ(a.pairs[i].times.kappa_gamma_gamma, b.pairs[i].times.kappa_gamma_gamma);
  }
}

TEST(Coupled, EqualTimeClausesHold) {
  int resolved = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto run = run_coupled_pair({0, 0}, {2, 0}, 2000, seed, 0.8);
    const auto& rec = run.pairs[0];
    resolved += rec.times.kappa_rr.has_value();
    const auto c = check_pair(run, rec);
    EXPECT_TRUE(c.coalescence.pass) << seed;
    EXPECT_TRUE(c.left_merge.pass) << seed;
    EXPECT_TRUE(c.gamma_merge.pass) << seed;
    EXPECT_TRUE(c.ordering.pass) << seed;
    if (rec.times.kappa_rr && rec.times.kappa_gamma_gamma) {
      EXPECT_LE(*rec.times.kappa_gamma_gamma, *rec.times.kappa_rr);
    }
  }
  EXPECT_GT(resolved, 150);
}

TEST(Coupled, CheckerCatchesCorruption) {
  auto run = run_coupled_pair({0, 0}, {2, 0}, 1000, 3, 0.8);
  ASSERT_TRUE(run.pairs[0].times.kappa_rr);
  const auto k = *run.pairs[0].times.kappa_rr;
  run.clusters[1].right.values[static_cast<std::size_t>(k + 5)] += 2;
  const auto c = check_pair(run, run.pairs[0]);
  EXPECT_FALSE(c.coalescence.pass);
  EXPECT_EQ(c.coalescence.first_violation, std::optional<std::int64_t>(k + 5));
}

TEST(Coupled, ThreeClusterBound) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const LatticeSite starts[] = {{0, 0}, {2, 0}, {6, 0}};
    const auto run = run_coupled_many(starts, 3000, seed, 0.8);
    const auto k12 = run.pair(0, 1).times.kappa_rr, k13 = run.pair(0, 2).times.kappa_rr,
               k23 = run.pair(1, 2).times.kappa_rr;
    if (k13 && k23) {
      ASSERT_TRUE(k12);
      EXPECT_LE(*k12, std::max(*k13, *k23));
    }
    for (const auto& c : check_coalescence_structure(run)) EXPECT_TRUE(c.pass()) << seed;
  }
}

// The second cluster of a coupled pair has the law of a standalone cluster.
TEST(Coupled, MarginalLawOfTheSecondCluster) {
  std::vector<double> coupled, alone;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    const auto run = run_coupled_pair({0, 0}, {2, 0}, 1000, 31, 0.8, r, {.record_history = false});
    coupled.push_back(static_cast<double>(run.clusters[1].right.at(1000)));
    const auto s = explore_to_level({2, 0}, 1000, Config(32, 0.8, replica_stream(r)));
    alone.push_back(static_cast<double>(s.right_at(1000)));
  }
  EXPECT_LT(stats::ks_two_sample(coupled, alone), stats::ks_two_sample_critical(1000, 1000, 0.01));
}

// A later cluster whose start lies strictly inside the earlier cluster's
// sandwich has neither one-sided ordering event.
TEST(Coupled, UnstructuredUnequalTimesAreRefused) {
  std::optional<std::uint64_t> found;
  for (std::uint64_t seed = 0; seed < 500 && !found; ++seed) {
    const Config primary(seed, 0.8, 0);
    const auto s = explore_to_level({0, 0}, 400, primary);
    const std::int64_t T = 40;
    const std::int64_t lo = s.left_at(T), hi = s.right_at(T);
    if (hi - lo < 6) continue;
    std::int64_t x = lo + 2;
    if ((x + T) % 2) ++x;
    const auto run = run_coupled_pair({0, 0}, {x, T}, 400, seed, 0.8);
    if (run.pairs[0].structure == PairStructure::Unstructured) found = seed;
    else
      for (const auto& c : check_coalescence_structure(run)) EXPECT_TRUE(c.pass());
  }
  ASSERT_TRUE(found);
  const auto s = explore_to_level({0, 0}, 400, Config(*found, 0.8, 0));
  std::int64_t x = s.left_at(40) + 2;
  if ((x + 40) % 2) ++x;
  const auto run = run_coupled_pair({0, 0}, {x, 40}, 400, *found, 0.8);
  try {
    (void)check_coalescence_structure(run);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionNotMet);
  }
}

TEST(Coupled, ProvisionalNearTheHorizon) {
  bool saw = false;
  for (std::uint64_t seed = 0; seed < 300 && !saw; ++seed) {
    const auto run = run_coupled_pair({0, 0}, {20, 0}, 400, seed, 0.8, 0, {.survival_margin = 200});
    const auto& k = run.pairs[0].times;
    if (k.kappa_gamma_gamma) {
      EXPECT_EQ(k.gamma_provisional, *k.kappa_gamma_gamma > 200);
      saw |= k.gamma_provisional;
    }
  }
  EXPECT_TRUE(saw);
}

TEST(Coupled, FastKappaMatchesTheFullRun) {
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto run = run_coupled_pair({0, 0}, {8, 0}, 1500, 44, 0.8, r, {.record_history = false});
    EXPECT_EQ(coupled_kappa_rr({0, 0}, {8, 0}, 1500, 44, 0.8, r), run.pairs[0].times.kappa_rr);
  }
}

TEST(Survival, CurveShapeAndCensoring) {
  const double eps[] = {0.01};
  const double ts[] = {0.001, 0.5, 1.0, 3.0};
  const auto rows = coalescence_survival_curve(10, 0.8, eps, ts, 400, 0.87, 5);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_DOUBLE_EQ(rows[0].empirical_survival, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].empirical_survival, rows[i - 1].empirical_survival);
  for (const auto& r : rows) {
    EXPECT_EQ(r.n_replicas, 400);
    EXPECT_LE(static_cast<double>(r.n_censored) / 400.0, r.empirical_survival);
  }
  EXPECT_NEAR(rows[2].baseline_erf, oracle::cbm_baseline(10 * 0.1 / 0.87, 1.0), 1e-15);
  EXPECT_THROW((void)coalescence_survival_curve(3, 0.8, eps, ts, 10, 0.87, 5), Error);
}

}  // namespace
