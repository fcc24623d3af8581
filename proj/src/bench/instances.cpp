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

#include <algorithm>
#include <cmath>

#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

StatsInstance make_stats_instance(const TreeSpec& spec, double n) {
  const size_t k = spec.names.size();
  std::vector<EdgeSpec> edges;
  StatsSet stats;
  std::vector<double> card(k, n);
  for (size_t i = 1; i < k; ++i) {
    const auto p = static_cast<size_t>(spec.parent.at(i));
    const auto attr = "k_" + spec.names[i];
    edges.push_back({spec.names[p], attr, spec.names[i], attr});
    stats.set(spec.names[p], spec.names[i], {spec.m.at(i), spec.fanout.at(i).a});
    // Child keys are drawn from the parent's unique key column.
    stats.set(spec.names[i], spec.names[p], {1, 1});
    card[i] = card[p] * spec.m[i] * spec.fanout[i].a;
  }
  for (size_t i = 0; i < k; ++i) stats.set_cardinality(spec.names[i], card[i]);
  QuerySpec q = QuerySpec::from_names(spec.names, std::move(edges));
  q.driver = spec.names[0];
  JoinGraph graph = build_join_graph(q);
  StatsTree tree = make_stats_tree(root_at(graph, NodeId{0}), stats, n);
  return {std::move(graph), std::move(stats), std::move(tree)};
}

AsiInstance asi_counterexample(double fo2, double fo3, double n) {
  TreeSpec t;
  t.names = {"R1", "R2", "R3", "R4", "R5", "R6", "R7"};
  t.parent = {-1, 0, 0, 1, 1, 2, 2};
  t.m.assign(7, 0.5);
  t.m[0] = 1;
  t.fanout.assign(7, FanoutSpec{});
  t.fanout[1].a = fo2;
  t.fanout[2].a = fo3;
  AsiInstance out{make_stats_instance(t, n), {}, {}};
  const JoinTree& tree = out.instance.tree.tree;
  out.order_a = resolve_order(tree, {"R2", "R3", "R4", "R7", "R5", "R6"});
  out.order_b = resolve_order(tree, {"R2", "R3", "R4", "R7", "R6", "R5"});
  return out;
}

namespace {

TreeSpec adversarial_spec(size_t decoys, double n) {
  TreeSpec t;
  auto add = [&](std::string name, int parent, double m) {
    t.names.push_back(std::move(name));
    t.parent.push_back(parent);
    t.m.push_back(m);
    t.fanout.push_back(FanoutSpec{});
  };
  add("R", -1, 1);
  add("H", 0, 1);
  add("Z", 1, 1 / n);
  for (size_t i = 0; i < decoys; ++i) add("C" + std::to_string(i + 1), i == 0 ? 0 : static_cast<int>(2 + i), 1 - 1 / n);
  return t;
}

}  // namespace

AdversarialInstance adversarial_instance(double f, double n, Strategy strategy) {
  if (!(f > 1)) throw GeneratorError("target factor must exceed 1");
  if (!(n > 1)) throw GeneratorError("n must exceed 1");
  const Weights w;
  size_t decoys = static_cast<size_t>(std::max(1.0, std::floor(2 * f) - 4));
  for (;; ++decoys) {
    if (decoys + 3 > kMaxNodes) throw GeneratorError("target factor needs more than " + std::to_string(kMaxNodes) + " relations");
    StatsInstance inst = make_stats_instance(adversarial_spec(decoys, n), n);
    OptResult opt = optimize_exhaustive(inst.tree, strategy, w, kMaxNodes);
    const double best = opt.weighted();
    auto ratio = [&](Algorithm a) { return optimize_greedy(inst.tree, a, strategy, w).weighted() / best; };
    const double r_rank = ratio(Algorithm::GreedyRank);
    const double r_tuples = ratio(Algorithm::GreedyTuples);
    const double r_survival = ratio(Algorithm::GreedySurvival);
    if (r_rank >= f && r_tuples >= f && r_survival >= f) {
      return {std::move(inst), decoys, r_rank, r_tuples, r_survival, std::move(opt)};
    }
  }
}

}  // namespace mmjoin
