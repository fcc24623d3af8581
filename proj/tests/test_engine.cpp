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
#include <map>
#include <random>
#include <set>

#include "mmjoin/bench.hpp"
#include "mmjoin/engine.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/factorized.hpp"

namespace mmjoin {
namespace {

Relation make_relation(const std::string& name, const std::vector<std::pair<std::string, std::vector<int64_t>>>& cols) {
  Relation r(name);
  for (const auto& [c, v] : cols) r.add_column({c, ColumnType::Int64, v});
  return r;
}

std::vector<uint32_t> rows_of(size_t n) {
  std::vector<uint32_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<uint32_t>(i);
  return out;
}

TEST(HashTable, MatchesSortMergeOracle) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const size_t nb = 1 + rng() % 500, np = 1 + rng() % 500;
    std::vector<int64_t> bk(nb), bk2(nb), pk(np), pk2(np);
    for (size_t i = 0; i < nb; ++i) bk[i] = static_cast<int64_t>(rng() % 60), bk2[i] = static_cast<int64_t>(rng() % 2);
    for (size_t i = 0; i < np; ++i) pk[i] = static_cast<int64_t>(rng() % 80), pk2[i] = static_cast<int64_t>(rng() % 2);
    const Relation build = make_relation("B", {{"k", bk}, {"j", bk2}});
    const Relation probe = make_relation("P", {{"k", pk}, {"j", pk2}});
    const std::vector<std::string> attrs{"k", "j"};
    const HashTable ht(RelationView{&build, {}}, attrs);

    // Oracle: sort build rows by key, then binary search each probe key.
    std::vector<std::pair<std::pair<int64_t, int64_t>, uint32_t>> sorted;
    for (uint32_t i = 0; i < nb; ++i) sorted.push_back({{bk[i], bk2[i]}, i});
    std::sort(sorted.begin(), sorted.end());

    const auto rows = rows_of(np);
    std::vector<uint64_t> hashes(np);
    hash_rows(probe, attrs, rows.data(), np, ht.seed(), hashes.data());
    std::vector<const int64_t*> keys{pk.data(), pk2.data()};
    std::vector<uint32_t> counts(np), matches;
    EXPECT_EQ(ht.probe(hashes.data(), keys, nullptr, np, counts.data(), matches), np);
    size_t pos = 0;
    for (size_t i = 0; i < np; ++i) {
      const std::pair<int64_t, int64_t> key{pk[i], pk2[i]};
      auto lo = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(key, 0u));
      std::multiset<uint32_t> want;
      for (; lo != sorted.end() && lo->first == key; ++lo) want.insert(lo->second);
      EXPECT_EQ(counts[i], want.size());
      std::multiset<uint32_t> got(matches.begin() + static_cast<std::ptrdiff_t>(pos),
                                  matches.begin() + static_cast<std::ptrdiff_t>(pos + counts[i]));
      EXPECT_EQ(got, want);
      pos += counts[i];
      EXPECT_EQ(ht.chain_length(hashes[i], {pk[i], pk2[i]}), want.size());
    }
    EXPECT_EQ(ht.reachable_rows(), ht.size());
  }
}

TEST(HashTable, ChainHeadIsLastInsertedRow) {
  const Relation build = make_relation("R2", {{"A", {1, 2, 1, 1, 1}}});
  const HashTable ht(RelationView{&build, {}}, {"A"});
  const uint64_t h = kernels::hash_key(1, ht.seed());
  std::vector<uint32_t> chain;
  for (uint32_t e = ht.head(h); e != HashTable::kEnd; e = ht.next(e)) {
    if (ht.key(0, e) == 1) chain.push_back(ht.row_id(e));
  }
  EXPECT_EQ(chain, (std::vector<uint32_t>{4, 3, 2, 0}));
}

TEST(HashTable, SemiProbeAndRestrictedView) {
  const Relation build = make_relation("B", {{"k", {5, 6, 7, 8}}});
  const HashTable ht(RelationView{&build, std::vector<uint32_t>{1, 3}}, {"k"});
  EXPECT_EQ(ht.size(), 2u);
  const std::vector<int64_t> pk{5, 6, 7, 8};
  std::vector<uint64_t> h(4);
  for (size_t i = 0; i < 4; ++i) h[i] = kernels::hash_key(pk[i], ht.seed());
  std::vector<uint8_t> active{1, 1, 0, 1};
  EXPECT_EQ(ht.semi_probe(h.data(), {pk.data()}, active.data(), 4), 3u);
  EXPECT_EQ(active, (std::vector<uint8_t>{0, 1, 0, 1}));
}

TEST(BitVector, NoFalseNegatives) {
  std::mt19937_64 rng(52);
  std::vector<int64_t> keys(3000);
  for (auto& k : keys) k = static_cast<int64_t>(rng());
  const Relation r = make_relation("R", {{"k", keys}});
  for (double bpk : {1.0, 4.0, 8.0, 16.0}) {
    const BitVectorFilter f(RelationView{&r, {}}, {"k"}, bpk);
    for (int64_t k : keys) EXPECT_TRUE(f.test(kernels::hash_key(k)));
    EXPECT_GT(f.fill_ratio(), 0);
    EXPECT_LE(f.fill_ratio(), 1);
    EXPECT_GE(static_cast<double>(f.bits()), bpk * 3000 / 2);
    // Absent keys pass at about the fill ratio.
    size_t pass = 0;
    const size_t trials = 20000;
    for (size_t i = 0; i < trials; ++i) pass += f.test(kernels::hash_key(static_cast<int64_t>(rng())));
    EXPECT_NEAR(static_cast<double>(pass) / trials, f.fill_ratio(), 0.02);
  }
}

TEST(Factorized, CountsPrefixSumsAndExpansion) {
  // Five driver rows; matches per row 4, 0, 2, 1, 1 in the first group.
  FactorizedChunk fc(0, rows_of(5), 3);
  const int g1 = fc.add_group(1, 0, {4, 0, 2, 1, 1}, {1, 1, 1, 1, 1}, {10, 11, 12, 13, 20, 21, 30, 40});
  const ColumnGroup& a = fc.group(g1);
  EXPECT_EQ(a.counts.front(), 4u);
  EXPECT_EQ(a.counts.back(), 1u);
  EXPECT_EQ(a.prefix, (std::vector<uint64_t>{0, 4, 4, 6, 7}));
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(a.parent_entry, (std::vector<uint32_t>{0, 0, 0, 0, 2, 2, 3, 4}));
  EXPECT_EQ(fc.group(0).selection[1], 0);
  EXPECT_EQ(fc.count_tuples(), 8u);

  // Second relation keyed on a driver attribute: per driver row 2, -, 1, 0, 3.
  const int g2 = fc.add_group(2, 0, {2, 0, 1, 0, 3}, {1, 0, 1, 1, 1}, {100, 101, 102, 103, 104, 105});
  fc.recompute_liveness();
  EXPECT_GT(fc.check_invariants(), 0u);
  // Driver row 3 dies; rows 0, 2 and 4 yield 4*2 + 2*1 + 1*3 tuples.
  EXPECT_EQ(fc.count_tuples(), 13u);
  EXPECT_EQ(fc.live_entries(0), 3u);
  EXPECT_EQ(fc.live_entries(g2), 6u);

  std::multiset<std::vector<uint32_t>> flat;
  const uint64_t emitted = fc.expand(4, [&](const std::vector<std::vector<uint32_t>>& cols, size_t n) {
    EXPECT_LE(n, 4u);
    for (size_t i = 0; i < n; ++i) flat.insert({cols[0][i], cols[1][i], cols[2][i]});
  });
  EXPECT_EQ(emitted, 13u);
  std::multiset<std::vector<uint32_t>> want;
  const std::map<uint32_t, std::vector<uint32_t>> r1{{0, {10, 11, 12, 13}}, {2, {20, 21}}, {4, {40}}};
  const std::map<uint32_t, std::vector<uint32_t>> r2{{0, {100, 101}}, {2, {102}}, {4, {103, 104, 105}}};
  for (const auto& [d, xs] : r1) {
    for (uint32_t x : xs) {
      for (uint32_t y : r2.at(d)) want.insert({d, x, y});
    }
  }
  EXPECT_EQ(flat, want);
}

// Redundant probes: R1 -> {R2(A), R6(B), R5(E)}, R2 -> R3(C),
// R3 -> R4(D); one driver tuple expands to six rows before R5 is probed.
struct RedundantProbe {
  Catalog cat;
  JoinGraph graph;
  Plan plan;

  RedundantProbe() {
    cat.add(make_relation("R1", {{"A", {1}}, {"B", {2}}, {"E", {3}}}));
    cat.add(make_relation("R2", {{"A", {1, 1}}, {"C", {10, 11}}}));
    cat.add(make_relation("R3", {{"C", {10, 11}}, {"D", {20, 21}}}));
    cat.add(make_relation("R4", {{"D", {20, 21}}}));
    cat.add(make_relation("R5", {{"E", {3}}}));
    cat.add(make_relation("R6", {{"B", {2, 2, 2}}}));
    const QuerySpec q = QuerySpec::from_names({"R1", "R2", "R3", "R4", "R5", "R6"}, {{"R1", "A", "R2", "A"},
                                                                                      {"R2", "C", "R3", "C"},
                                                                                      {"R3", "D", "R4", "D"},
                                                                                      {"R1", "E", "R5", "E"},
                                                                                      {"R1", "B", "R6", "B"}});
    graph = validate_query(q, cat);
    plan = Plan{"R1", {"R2", "R3", "R6", "R4", "R5"}, Strategy::STD};
  }
};

TEST(Execute, RedundantProbesAvoidedByFactorizedPlan) {
  RedundantProbe x;
  ExecOptions opt;
  opt.verify = true;
  const NodeId r5 = x.graph.id_of("R5");
  x.plan.strategy = Strategy::STD;
  const ResultSummary std_run = execute(x.cat, x.graph, x.plan, opt);
  x.plan.strategy = Strategy::COM;
  const ResultSummary com_run = execute(x.cat, x.graph, x.plan, opt);
  EXPECT_EQ(std_run.stats.per_node[r5].hash_probes, 6u);
  EXPECT_EQ(com_run.stats.per_node[r5].hash_probes, 1u);
  EXPECT_EQ(std_run.cardinality, 6u);
  EXPECT_EQ(com_run.cardinality, 6u);
}

std::vector<std::vector<uint32_t>> sorted_rows(std::vector<std::vector<uint32_t>> rows) {
  std::sort(rows.begin(), rows.end());
  return rows;
}

TEST(Execute, AllStrategiesMatchNestedLoopOracle) {
  for (uint64_t seed = 0; seed < 60; ++seed) {
    const GeneratedInstance inst = gen_random_small(seed);
    const JoinGraph g = validate_query(inst.query, inst.catalog);
    const auto want = sorted_rows(oracle_join(inst.catalog, g));
    const NodeId d = static_cast<NodeId>(seed % g.size());
    const JoinTree t = root_at(g, d);
    const auto order = order_names(t, random_order(t, seed));
    for (Strategy s : kAllStrategies) {
      for (size_t chunk : {3u, 2048u}) {
        ExecOptions opt;
        opt.mode = OutputMode::Flat;
        opt.materialize = true;
        opt.verify = true;
        opt.chunk_size = chunk;
        const ResultSummary r = execute(inst.catalog, g, Plan{g.name(d), order, s}, opt);
        ASSERT_TRUE(r.rows.has_value());
        EXPECT_EQ(sorted_rows(*r.rows), want) << "seed " << seed << " " << to_string(s);
        EXPECT_EQ(r.cardinality, want.size());
        EXPECT_TRUE(r.valid);
        opt.mode = OutputMode::Count;
        opt.materialize = false;
        EXPECT_EQ(execute(inst.catalog, g, Plan{g.name(d), order, s}, opt).cardinality, want.size());
      }
    }
  }
}

TEST(Execute, FilterOrderOverrideKeepsResult) {
  RedundantProbe x;
  ExecOptions opt;
  opt.verify = true;
  x.plan.strategy = Strategy::BVP_COM;
  const uint64_t base = execute(x.cat, x.graph, x.plan, opt).cardinality;
  opt.filter_order["R1"] = {"R5", "R6", "R2"};
  const ResultSummary r = execute(x.cat, x.graph, x.plan, opt);
  EXPECT_EQ(r.cardinality, base);
  EXPECT_EQ(r.filter_fill.size(), 5u);
  opt.filter_order["R1"] = {"R5", "R3"};
  EXPECT_THROW(execute(x.cat, x.graph, x.plan, opt), QueryError);
}

TEST(Reduce, SurvivorsAreExactlyContributingDriverRows) {
  for (uint64_t seed = 100; seed < 160; ++seed) {
    const GeneratedInstance inst = gen_random_small(seed, 5);
    const JoinGraph g = validate_query(inst.query, inst.catalog);
    for (NodeId d = 0; d < g.size(); ++d) {
      const JoinTree t = root_at(g, d);
      const Reduction red = semi_join_reduce(inst.catalog, t);
      const auto counts = oracle_driver_counts(inst.catalog, g, d);
      std::set<uint32_t> kept;
      for (size_t i = 0; i < red.views[d].size(); ++i) kept.insert(red.views[d].row(i));
      for (uint32_t row = 0; row < counts.size(); ++row) {
        EXPECT_EQ(kept.count(row) == 1, counts[row] > 0) << "seed " << seed << " row " << row;
      }
    }
  }
}

TEST(Execute, TimeoutFlagsSummary) {
  ShapeSpec spec;
  spec.shape = parse_shape("star:4");
  spec.n = 200000;
  spec.m_lo = spec.m_hi = 1;
  spec.fanout = parse_fanout("constant:3");
  const GeneratedInstance inst = gen_synthetic(spec);
  const JoinGraph g = validate_query(inst.query, inst.catalog);
  const JoinTree t = root_at(g, inst.driver);
  ExecOptions opt;
  opt.mode = OutputMode::Flat;
  opt.timeout_seconds = 1e-6;
  const ResultSummary r = execute(inst.catalog, g, Plan{inst.driver, order_names(t, random_order(t, 1)), Strategy::STD}, opt);
  EXPECT_TRUE(r.timed_out);
}

TEST(Execute, RejectsInvalidPlans) {
  RedundantProbe x;
  x.plan.order = {"R3", "R2", "R6", "R4", "R5"};
  EXPECT_THROW(execute(x.cat, x.graph, x.plan), QueryError);
  x.plan.order = {"R2", "R3"};
  EXPECT_THROW(execute(x.cat, x.graph, x.plan), QueryError);
}

TEST(Execute, OutputModeNames) {
  for (OutputMode m : {OutputMode::Flat, OutputMode::Factorized, OutputMode::Count}) {
    EXPECT_EQ(parse_output_mode(to_string(m)), m);
  }
}

TEST(Execute, ScalarAndVectorKernelsAgree) {
  const GeneratedInstance inst = gen_random_small(7);
  const JoinGraph g = validate_query(inst.query, inst.catalog);
  const JoinTree t = root_at(g, NodeId{0});
  const Plan p{g.name(0), order_names(t, random_order(t, 3)), Strategy::BVP_COM};
  ExecOptions opt;
  opt.verify = true;
  kernels::select_isa(kernels::Isa::scalar);
  const ResultSummary a = execute(inst.catalog, g, p, opt);
  kernels::select_isa(kernels::Isa::avx2);
  const ResultSummary b = execute(inst.catalog, g, p, opt);
  EXPECT_EQ(a.cardinality, b.cardinality);
  EXPECT_EQ(a.stats.hash_probes, b.stats.hash_probes);
  EXPECT_EQ(a.stats.bitvector_probes, b.stats.bitvector_probes);
}

}  // namespace
}  // namespace mmjoin
