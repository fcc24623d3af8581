// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mmjoin/bench.hpp"
#include "mmjoin/costmodel.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/optimizer.hpp"

namespace mmjoin {
namespace {

StatsInstance random_instance(std::mt19937_64& rng, size_t n, double m_lo = 0.05, double m_hi = 1.0,
                              double fo_hi = 8) {
  TreeSpec t = make_tree_spec(Shape{ShapeKind::RandomTree, n, 0}, rng());
  std::uniform_real_distribution<double> m(m_lo, m_hi), fo(1, fo_hi);
  for (size_t i = 1; i < n; ++i) {
    t.m[i] = m(rng);
    t.fanout[i].a = fo(rng);
  }
  return make_stats_instance(t, 1000);
}

// Permutation oracle: cheapest weighted plan cost over every valid order.
double brute_force(const StatsTree& st, Strategy s, const Weights& w = {},
                   const std::vector<std::vector<NodeId>>* kids = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<NodeId> nodes;
  for (NodeId v = 0; v < st.size(); ++v) {
    if (v != st.root()) nodes.push_back(v);
  }
  do {
    if (!is_valid_order(st.tree, nodes)) continue;
    best = std::min(best, plan_cost(st, nodes, s, w, kids).weighted);
  } while (std::next_permutation(nodes.begin(), nodes.end()));
  return best;
}

TEST(Exhaustive, MatchesBruteForceForAllStrategies) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 40; ++i) {
    const StatsInstance si = random_instance(rng, 2 + rng() % 6);
    for (Strategy s : {Strategy::STD, Strategy::COM, Strategy::BVP_STD, Strategy::BVP_COM}) {
      const OptResult r = optimize_exhaustive(si.tree, s);
      EXPECT_EQ(r.cost.weighted, brute_force(si.tree, s)) << to_string(s) << " instance " << i;
      EXPECT_TRUE(is_valid_order(si.tree.tree, r.order));
    }
  }
}

TEST(Exhaustive, BitvectorDpMatchesBruteForcePerDriver) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 10; ++i) {
    const StatsInstance si = random_instance(rng, 7);
    for (NodeId d = 0; d < si.graph.size(); ++d) {
      const StatsTree st = make_stats_tree(root_at(si.graph, d), si.stats);
      for (Strategy s : {Strategy::BVP_STD, Strategy::BVP_COM}) {
        EXPECT_EQ(optimize_exhaustive(st, s).cost.weighted, brute_force(st, s));
      }
    }
  }
}

TEST(Exhaustive, DriverSearchWorkIsLinearInDrivers) {
  std::mt19937_64 rng(33);
  const StatsInstance si = random_instance(rng, 6);
  OptimizerConfig cfg;
  cfg.strategy = Strategy::BVP_COM;
  const OptResult all = optimize_all_drivers(si.graph, si.stats, cfg);
  EXPECT_EQ(all.search.driver_searches, si.graph.size());
  size_t expanded = 0;
  double best = std::numeric_limits<double>::infinity();
  for (NodeId d = 0; d < si.graph.size(); ++d) {
    const OptResult r = optimize(make_stats_tree(root_at(si.graph, d), si.stats), cfg);
    expanded += r.search.subsets_expanded;
    best = std::min(best, r.cost.weighted);
  }
  EXPECT_EQ(all.search.subsets_expanded, expanded);
  EXPECT_EQ(all.cost.weighted, best);
  EXPECT_EQ(all.per_driver.size(), si.graph.size());
}

TEST(Exhaustive, StdStarFollowsRankOrder) {
  // Star with unit probe costs: ascending (s - 1) is optimal for flat probes.
  TreeSpec t = make_tree_spec(Shape{ShapeKind::Star, 6, 0}, 1);
  const std::vector<double> m{1, 0.3, 0.9, 0.5, 0.2, 0.7}, fo{1, 4, 1, 3, 2, 1.5};
  for (size_t i = 1; i < 6; ++i) {
    t.m[i] = m[i];
    t.fanout[i].a = fo[i];
  }
  const StatsInstance si = make_stats_instance(t, 1000);
  std::vector<NodeId> want;
  for (NodeId v = 1; v < 6; ++v) want.push_back(v);
  std::sort(want.begin(), want.end(), [&](NodeId a, NodeId b) { return m[a] * fo[a] < m[b] * fo[b]; });
  Weights w;
  w.w_emit = 0;
  EXPECT_EQ(optimize_exhaustive(si.tree, Strategy::STD, w).order, want);
  EXPECT_EQ(optimize_greedy(si.tree, Algorithm::GreedyRank, Strategy::STD, w).order, want);
}

TEST(Exhaustive, TooManyRelations) {
  std::mt19937_64 rng(34);
  const StatsInstance si = random_instance(rng, 9);
  EXPECT_THROW(optimize_exhaustive(si.tree, Strategy::COM, {}, 8), TooManyRelations);
  EXPECT_NO_THROW(optimize_exhaustive(si.tree, Strategy::COM, {}, 9));
}

TEST(Exhaustive, DeterministicTieBreaking) {
  TreeSpec t = make_tree_spec(Shape{ShapeKind::Star, 5, 0}, 1);
  for (size_t i = 1; i < 5; ++i) t.m[i] = 0.5;
  const StatsInstance si = make_stats_instance(t, 100);
  const auto a = optimize_exhaustive(si.tree, Strategy::COM).order;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(optimize_exhaustive(si.tree, Strategy::COM).order, a);
}

TEST(Greedy, ValidOrdersNeverBeatOptimum) {
  std::mt19937_64 rng(35);
  for (int i = 0; i < 30; ++i) {
    const StatsInstance si = random_instance(rng, 2 + rng() % 7);
    const double opt = optimize_exhaustive(si.tree, Strategy::COM).cost.weighted;
    for (Algorithm a : {Algorithm::GreedyRank, Algorithm::GreedyTuples, Algorithm::GreedySurvival}) {
      const OptResult r = optimize_greedy(si.tree, a, Strategy::COM);
      EXPECT_TRUE(is_valid_order(si.tree.tree, r.order));
      EXPECT_GE(r.cost.weighted, opt * (1 - 1e-12));
      EXPECT_EQ(r.cost.weighted, plan_cost(si.tree, r.order, Strategy::COM).weighted);
    }
  }
}

TEST(Greedy, AlgorithmNames) {
  for (Algorithm a : {Algorithm::Exhaustive, Algorithm::GreedyRank, Algorithm::GreedyTuples, Algorithm::GreedySurvival,
                      Algorithm::SjRules}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  EXPECT_THROW(parse_algorithm("annealing"), Error);
}

TEST(Counterexample, CostsDifferAndPreferenceFlips) {
  const AsiInstance x = asi_counterexample(2, 8);
  const double a = cost_com(x.instance.tree, x.order_a).hash_probes;
  const double b = cost_com(x.instance.tree, x.order_b).hash_probes;
  EXPECT_NE(a, b);
  const AsiInstance y = asi_counterexample(8, 2);
  const double a2 = cost_com(y.instance.tree, y.order_a).hash_probes;
  const double b2 = cost_com(y.instance.tree, y.order_b).hash_probes;
  EXPECT_NE(a2, b2);
  EXPECT_NE(a < b, a2 < b2);
}

TEST(Adversarial, EveryGreedyHeuristicIsFarFromOptimal) {
  for (double f : {10.0, 100.0}) {
    const AdversarialInstance adv = adversarial_instance(f);
    EXPECT_GE(adv.ratio_rank, f);
    EXPECT_GE(adv.ratio_tuples, f);
    EXPECT_GE(adv.ratio_survival, f);
    // Independent recomputation of one ratio.
    const OptResult g = optimize_greedy(adv.instance.tree, Algorithm::GreedySurvival, Strategy::COM);
    EXPECT_NEAR(g.cost.weighted / adv.optimal.cost.weighted, adv.ratio_survival, 1e-9 * adv.ratio_survival);
  }
  EXPECT_THROW(adversarial_instance(1.0), GeneratorError);
}

TEST(SemiJoin, RulesMatchBruteForcePhaseTwo) {
  std::mt19937_64 rng(36);
  for (int i = 0; i < 30; ++i) {
    const StatsInstance si = random_instance(rng, 2 + rng() % 6);
    const auto kids = sj_child_order(si.tree);
    for (bool com : {false, true}) {
      const OptResult r = optimize_sj(si.tree, com);
      ASSERT_TRUE(r.sj_plan.has_value());
      const double bf = brute_force(si.tree, com ? Strategy::SJ_COM : Strategy::SJ_STD, {}, &kids);
      EXPECT_NEAR(r.cost.weighted, bf, 1e-9 * bf) << (com ? "sj+com" : "sj+std");
    }
  }
}

TEST(SemiJoin, ChildOrderIsAscendingReducedMatch) {
  std::mt19937_64 rng(37);
  const StatsInstance si = random_instance(rng, 7);
  const auto kids = sj_child_order(si.tree);
  const auto red = reduced_edges(si.tree);
  for (const auto& list : kids) {
    for (size_t i = 1; i < list.size(); ++i) EXPECT_LE(red[list[i - 1]].m, red[list[i]].m);
  }
}

TEST(Kbz, RespectsPrecedence) {
  std::mt19937_64 rng(38);
  for (int i = 0; i < 20; ++i) {
    const StatsInstance si = random_instance(rng, 2 + rng() % 8);
    EXPECT_TRUE(is_valid_order(si.tree.tree, kbz_order(si.tree)));
  }
}

}  // namespace
}  // namespace mmjoin
