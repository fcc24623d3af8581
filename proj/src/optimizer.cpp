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

#include "mmjoin/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "mmjoin/error.hpp"

namespace mmjoin {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Exhaustive:
      return "exhaustive";
    case Algorithm::GreedyRank:
      return "rank";
    case Algorithm::GreedyTuples:
      return "tuples";
    case Algorithm::GreedySurvival:
      return "survival";
    case Algorithm::SjRules:
      return "sj";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "exhaustive" || text == "dp") return Algorithm::Exhaustive;
  if (text == "rank" || text == "greedy_rank") return Algorithm::GreedyRank;
  if (text == "tuples" || text == "greedy_tuples") return Algorithm::GreedyTuples;
  if (text == "survival" || text == "greedy_survival") return Algorithm::GreedySurvival;
  if (text == "sj" || text == "sj_rules") return Algorithm::SjRules;
  throw Error("unknown optimizer algorithm '" + std::string(text) + "'");
}

namespace {

struct MemoEntry {
  double cost;
  NodeId last;
};

using Layer = std::unordered_map<NodeSet, MemoEntry, NodeSetHash>;

OptResult finish(const StatsTree& st, std::vector<NodeId> order, Strategy strategy, const Weights& weights,
                 const std::vector<std::vector<NodeId>>* child_order) {
  OptResult r;
  r.cost = plan_cost(st, order, strategy, weights, child_order);
  r.plan.driver = st.tree.name(st.root());
  r.plan.order = order_names(st.tree, order);
  r.plan.strategy = strategy;
  if (uses_sj(strategy)) {
    SJPlan sj;
    sj.driver = r.plan.driver;
    sj.order = r.plan.order;
    const auto kids = child_order ? *child_order : sj_child_order(st);
    for (NodeId v = 0; v < st.size(); ++v) {
      if (!kids[v].empty()) sj.child_order[st.tree.name(v)] = order_names(st.tree, kids[v]);
    }
    r.sj_plan = std::move(sj);
  }
  r.order = std::move(order);
  return r;
}

bool less_with_name(double a, double b, const std::string& na, const std::string& nb) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (std::abs(a - b) > 1e-12 * scale) return a < b;
  return na < nb;
}

}  // namespace

OptResult optimize_exhaustive(const StatsTree& st, Strategy strategy, const Weights& weights, size_t max_relations) {
  const size_t n = st.size();
  if (n > max_relations || n > kMaxNodes) {
    throw TooManyRelations("exhaustive search over " + std::to_string(n) + " relations exceeds the limit of " +
                           std::to_string(std::min(max_relations, kMaxNodes)));
  }
  IncrementalCost inc(st, strategy, weights);
  SearchStats search;
  search.driver_searches = 1;

  std::vector<Layer> layers(n);
  layers[0].emplace(NodeSet{}, MemoEntry{inc.initial().weighted, kNoNode});
  for (size_t k = 0; k + 1 < n; ++k) {
    // Expand in a fixed order so ties resolve identically across runs.
    std::vector<std::pair<NodeSet, double>> sets;
    sets.reserve(layers[k].size());
    for (const auto& [set, e] : layers[k]) sets.emplace_back(set, e.cost);
    std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second < b.second;
      return a.first.hash() < b.first.hash();
    });
    for (const auto& [set, cost] : sets) {
      ++search.subsets_expanded;
      for (NodeId x : eligible_next(st.tree, set)) {
        ++search.candidates_evaluated;
        const double cand = cost + inc.step(set, x).weighted;
        const NodeSet next = set.with(x);
        auto [it, inserted] = layers[k + 1].try_emplace(next, MemoEntry{cand, x});
        if (!inserted && cand < it->second.cost) it->second = {cand, x};
      }
    }
    layers[k].rehash(0);
  }

  std::vector<NodeId> order;
  NodeSet set;
  for (NodeId v = 0; v < n; ++v) {
    if (v != st.root()) set.insert(v);
  }
  for (size_t k = n - 1; k > 0; --k) {
    const MemoEntry& e = layers[k].at(set);
    order.push_back(e.last);
    set.erase(e.last);
  }
  std::reverse(order.begin(), order.end());

  OptResult r = finish(st, std::move(order), strategy, weights, nullptr);
  r.search = search;
  r.per_driver.emplace_back(r.plan.driver, r.cost.weighted);
  return r;
}

OptResult optimize_greedy(const StatsTree& st, Algorithm heuristic, Strategy strategy, const Weights& weights,
                          const std::map<std::string, double>& probe_costs) {
  if (heuristic != Algorithm::GreedyRank && heuristic != Algorithm::GreedyTuples &&
      heuristic != Algorithm::GreedySurvival) {
    throw Error("not a greedy heuristic: " + std::string(to_string(heuristic)));
  }
  // Heuristics score candidates on the stats the join phase sees.
  const StatsTree js = uses_sj(strategy) ? phase2_stats(st) : st;
  const JoinTree& t = js.tree;
  SearchStats search;
  search.driver_searches = 1;

  auto score = [&](const NodeSet& placed, NodeId x) {
    switch (heuristic) {
      case Algorithm::GreedyRank: {
        auto it = probe_costs.find(t.name(x));
        const double c = it == probe_costs.end() ? 1.0 : it->second;
        return (js.edge[x].s() - 1.0) / c;
      }
      case Algorithm::GreedyTuples:
        return probes_com(js, placed, x) * js.edge[x].s();
      default:
        return survival(js, t.root(), placed.with(x).with(t.root()));
    }
  };

  std::vector<NodeId> order;
  NodeSet placed;
  while (order.size() + 1 < t.size()) {
    ++search.subsets_expanded;
    NodeId best = kNoNode;
    double best_score = 0;
    for (NodeId x : eligible_next(t, placed)) {
      ++search.candidates_evaluated;
      const double sc = score(placed, x);
      if (best == kNoNode || less_with_name(sc, best_score, t.name(x), t.name(best))) {
        best = x;
        best_score = sc;
      }
    }
    order.push_back(best);
    placed.insert(best);
  }
  OptResult r = finish(st, std::move(order), strategy, weights, nullptr);
  r.search = search;
  r.per_driver.emplace_back(r.plan.driver, r.cost.weighted);
  return r;
}

namespace {

struct Module {
  std::vector<NodeId> nodes;
  double T = 1;
  double C = 0;
  double rank() const { return (T - 1.0) / C; }
};

Module combine(const Module& a, const Module& b) {
  Module m;
  m.nodes = a.nodes;
  m.nodes.insert(m.nodes.end(), b.nodes.begin(), b.nodes.end());
  m.T = a.T * b.T;
  m.C = a.C + a.T * b.C;
  return m;
}

std::deque<Module> merge_chains(std::vector<std::deque<Module>> chains, const JoinTree& t) {
  std::deque<Module> out;
  for (;;) {
    size_t pick = chains.size();
    for (size_t i = 0; i < chains.size(); ++i) {
      if (chains[i].empty()) continue;
      if (pick == chains.size()) {
        pick = i;
        continue;
      }
      const Module& a = chains[i].front();
      const Module& b = chains[pick].front();
      if (a.rank() < b.rank() || (a.rank() == b.rank() && t.name(a.nodes[0]) < t.name(b.nodes[0]))) pick = i;
    }
    if (pick == chains.size()) break;
    out.push_back(std::move(chains[pick].front()));
    chains[pick].pop_front();
  }
  return out;
}

std::deque<Module> normalize(const StatsTree& st, NodeId v, const std::vector<double>& cost) {
  const JoinTree& t = st.tree;
  std::vector<std::deque<Module>> chains;
  for (NodeId c : t.children(v)) chains.push_back(normalize(st, c, cost));
  std::deque<Module> rest = merge_chains(std::move(chains), t);
  if (v == t.root()) return rest;
  Module head;
  head.nodes = {v};
  head.T = st.edge[v].s();
  head.C = cost.empty() ? 1.0 : cost[v];
  while (!rest.empty() && head.rank() > rest.front().rank()) {
    head = combine(head, rest.front());
    rest.pop_front();
  }
  rest.push_front(std::move(head));
  return rest;
}

}  // namespace

std::vector<NodeId> kbz_order(const StatsTree& st, const std::vector<double>& probe_costs) {
  std::vector<NodeId> order;
  for (const Module& m : normalize(st, st.root(), probe_costs)) {
    order.insert(order.end(), m.nodes.begin(), m.nodes.end());
  }
  return order;
}

OptResult optimize_sj(const StatsTree& st, bool com, const Weights& weights) {
  const Strategy strategy = com ? Strategy::SJ_COM : Strategy::SJ_STD;
  const StatsTree p2 = phase2_stats(st);
  std::vector<NodeId> order;
  if (com) {
    std::vector<double> product(st.size(), 1.0);
    for (NodeId v : st.tree.preorder()) {
      if (v != st.root()) product[v] = product[st.tree.parent(v)] * p2.edge[v].fo;
      if (v != st.root()) order.push_back(v);
    }
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
      if (product[a] != product[b]) return product[a] < product[b];
      if (st.tree.depth(a) != st.tree.depth(b)) return st.tree.depth(a) < st.tree.depth(b);
      return st.tree.name(a) < st.tree.name(b);
    });
  } else {
    order = kbz_order(p2);
  }
  const auto kids = sj_child_order(st);
  OptResult r = finish(st, std::move(order), strategy, weights, &kids);
  r.search.driver_searches = 1;
  r.per_driver.emplace_back(r.plan.driver, r.cost.weighted);
  return r;
}

OptResult optimize(const StatsTree& st, const OptimizerConfig& config) {
  switch (config.algorithm) {
    case Algorithm::Exhaustive:
      return optimize_exhaustive(st, config.strategy, config.weights, config.max_relations);
    case Algorithm::SjRules:
      if (!uses_sj(config.strategy)) throw Error("sj ordering rules need a semi-join strategy");
      return optimize_sj(st, uses_com(config.strategy), config.weights);
    default:
      return optimize_greedy(st, config.algorithm, config.strategy, config.weights, config.probe_costs);
  }
}

OptResult optimize_all_drivers(const JoinGraph& graph, const StatsSet& stats, const OptimizerConfig& config) {
  std::optional<OptResult> best;
  SearchStats total;
  std::vector<std::pair<std::string, double>> per_driver;
  for (NodeId d = 0; d < graph.size(); ++d) {
    const StatsTree st = make_stats_tree(root_at(graph, d), stats);
    OptResult r = optimize(st, config);
    total.subsets_expanded += r.search.subsets_expanded;
    total.candidates_evaluated += r.search.candidates_evaluated;
    total.driver_searches += 1;
    per_driver.emplace_back(graph.name(d), r.cost.weighted);
    if (!best || less_with_name(r.cost.weighted, best->cost.weighted, r.plan.driver, best->plan.driver)) {
      best = std::move(r);
    }
  }
  best->search = total;
  best->per_driver = std::move(per_driver);
  return std::move(*best);
}

OptResult optimize_sj(const JoinGraph& graph, const StatsSet& stats, bool com, const Weights& weights) {
  OptimizerConfig config;
  config.algorithm = Algorithm::SjRules;
  config.strategy = com ? Strategy::SJ_COM : Strategy::SJ_STD;
  config.weights = weights;
  return optimize_all_drivers(graph, stats, config);
}

}  // namespace mmjoin
