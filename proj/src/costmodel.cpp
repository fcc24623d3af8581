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

#include "mmjoin/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmjoin/error.hpp"

namespace mmjoin {

StatsTree make_stats_tree(const JoinTree& tree, const StatsSet& stats, std::optional<double> driver_rows) {
  StatsTree st;
  st.tree = tree;
  st.edge.assign(tree.size(), EdgeStats{});
  st.cardinality.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
  for (NodeId v = 0; v < tree.size(); ++v) {
    if (auto c = stats.cardinality(tree.name(v))) st.cardinality[v] = *c;
    if (v == tree.root()) continue;
    const auto e = stats.get(tree.name(tree.parent(v)), tree.name(v));
    if (!e) throw Error("missing stats for edge " + tree.name(tree.parent(v)) + "->" + tree.name(v));
    st.edge[v] = *e;
  }
  if (driver_rows) {
    st.N = *driver_rows;
  } else if (!std::isnan(st.cardinality[tree.root()])) {
    st.N = st.cardinality[tree.root()];
  } else {
    throw Error("no cardinality for driver " + tree.name(tree.root()));
  }
  st.cardinality[tree.root()] = st.N;
  return st;
}

std::vector<std::vector<NodeId>> bvp_filter_order(const StatsTree& st, double epsilon) {
  std::vector<std::vector<NodeId>> order(st.size());
  for (NodeId v = 0; v < st.size(); ++v) {
    order[v] = st.tree.children(v);
    std::sort(order[v].begin(), order[v].end(), [&](NodeId a, NodeId b) {
      const double fa = std::min(1.0, st.edge[a].m + epsilon);
      const double fb = std::min(1.0, st.edge[b].m + epsilon);
      if (fa != fb) return fa < fb;
      return st.tree.name(a) < st.tree.name(b);
    });
  }
  return order;
}

double total_weighted_cost(const CostBreakdown& b, const Weights& w) {
  return w.w_hash * b.hash_probes + w.w_bitvector * b.bitvector_probes + w.w_semijoin * b.semijoin_probes +
         w.w_emit * b.emitted;
}

namespace {

double hit_probability(double survive, double fo) { return 1.0 - std::pow(1.0 - survive, fo); }

double fragment_survival(const StatsTree& st, NodeId v, const NodeSet& members) {
  double prod = 1.0;
  for (NodeId c : st.tree.children(v)) {
    if (members.contains(c)) prod *= fragment_survival(st, c, members);
  }
  return st.edge[v].m * hit_probability(prod, st.edge[v].fo);
}

void check_eligible(const StatsTree& st, const NodeSet& placed, NodeId next) {
  const JoinTree& t = st.tree;
  if (next >= t.size() || next == t.root() || placed.contains(next)) {
    throw QueryError(QueryErrorCode::InvalidPrefix, "relation cannot be placed next");
  }
  const NodeId p = t.parent(next);
  if (p != t.root() && !placed.contains(p)) {
    throw QueryError(QueryErrorCode::InvalidPrefix, t.name(next) + " placed before its parent " + t.name(p));
  }
}

}  // namespace

double survival(const StatsTree& st, NodeId r, const NodeSet& members) {
  if (!members.contains(r)) throw QueryError(QueryErrorCode::InvalidPrefix, "fragment root not in fragment");
  return fragment_survival(st, r, members);
}

double probes_com(const StatsTree& st, const NodeSet& placed, NodeId next) {
  check_eligible(st, placed, next);
  const JoinTree& t = st.tree;
  std::vector<NodeId> path;
  for (NodeId u = t.parent(next); u != kNoNode; u = t.parent(u)) path.push_back(u);
  NodeSet on_path;
  for (NodeId u : path) on_path.insert(u);
  NodeSet joined = placed.with(t.root());
  double pop = st.N;
  for (NodeId u : path) {
    if (u != t.root()) pop *= st.edge[u].s();
    for (NodeId c : t.children(u)) {
      if (on_path.contains(c) || !joined.contains(c)) continue;
      pop *= fragment_survival(st, c, joined);
    }
  }
  return pop;
}

double probes_std(const StatsTree& st, const NodeSet& placed, NodeId next) {
  check_eligible(st, placed, next);
  double pop = st.N;
  placed.for_each([&](NodeId v) { pop *= st.edge[v].s(); });
  return pop;
}

std::vector<double> reduction_ratios(const StatsTree& st) {
  std::vector<double> ratio(st.size(), 1.0);
  for (NodeId v : st.tree.postorder()) {
    double r = 1.0;
    for (NodeId c : st.tree.children(v)) r *= adjusted_stats(st.edge[c], ratio[c]).m;
    ratio[v] = r;
  }
  return ratio;
}

std::vector<EdgeStats> reduced_edges(const StatsTree& st) {
  const auto ratio = reduction_ratios(st);
  std::vector<EdgeStats> out(st.size());
  for (NodeId v = 0; v < st.size(); ++v) {
    out[v] = v == st.root() ? EdgeStats{} : adjusted_stats(st.edge[v], ratio[v]);
  }
  return out;
}

StatsTree phase2_stats(const StatsTree& st) {
  const auto ratio = reduction_ratios(st);
  const auto red = reduced_edges(st);
  StatsTree out = st;
  for (NodeId v = 0; v < st.size(); ++v) {
    out.edge[v] = v == st.root() ? EdgeStats{} : EdgeStats{1.0, red[v].fo};
    out.cardinality[v] = st.cardinality[v] * ratio[v];
  }
  out.N = st.N * ratio[st.root()];
  return out;
}

std::vector<std::vector<NodeId>> sj_child_order(const StatsTree& st) {
  const auto red = reduced_edges(st);
  std::vector<std::vector<NodeId>> out(st.size());
  for (NodeId v = 0; v < st.size(); ++v) {
    out[v] = st.tree.children(v);
    std::sort(out[v].begin(), out[v].end(), [&](NodeId a, NodeId b) {
      if (red[a].m != red[b].m) return red[a].m < red[b].m;
      return st.tree.name(a) < st.tree.name(b);
    });
  }
  return out;
}

double semijoin_cost(const StatsTree& st, const std::vector<std::vector<NodeId>>& child_order,
                     std::vector<std::pair<NodeId, double>>* per_parent) {
  const auto red = reduced_edges(st);
  double total = 0;
  for (NodeId p : st.tree.postorder()) {
    const auto& kids = child_order.at(p);
    if (kids.empty()) continue;
    const double rows = st.cardinality[p];
    if (std::isnan(rows)) throw Error("semi-join costing needs the cardinality of " + st.tree.name(p));
    double pass = 1.0;
    double probes = 0;
    for (NodeId c : kids) {
      probes += rows * pass;
      pass *= red[c].m;
    }
    if (per_parent) per_parent->emplace_back(p, probes);
    total += probes;
  }
  return total;
}

IncrementalCost::IncrementalCost(const StatsTree& st, Strategy strategy, const Weights& weights,
                                 const std::vector<std::vector<NodeId>>* child_order)
    : base_(&st), join_stats_(&st), strategy_(strategy), weights_(weights) {
  com_ = uses_com(strategy);
  bvp_ = uses_bvp(strategy);
  if (weights.epsilon < 0.0 || weights.epsilon >= 1.0) throw Error("epsilon must lie in [0,1)");

  emitted_ = st.N;
  for (NodeId v = 0; v < st.size(); ++v) {
    if (v != st.root()) emitted_ *= st.edge[v].s();
  }
  final_weighted_ = weights.w_emit * emitted_;

  if (uses_sj(strategy)) {
    std::vector<std::vector<NodeId>> order = child_order ? *child_order : sj_child_order(st);
    semijoin_probes_ = semijoin_cost(st, order, &semijoin_ops_);
    phase2_ = phase2_stats(st);
    join_stats_ = &*phase2_;
  }

  const StatsTree& js = *join_stats_;
  filter_order_.resize(js.size());
  if (bvp_) {
    filter_order_ = bvp_filter_order(js, weights_.epsilon);
    initial_.bitvector_probes = filter_tests(js.root(), NodeSet{}, NodeSet{});
  }
  initial_.weighted = weights_.w_bitvector * initial_.bitvector_probes + weights_.w_semijoin * semijoin_probes_;
}

double IncrementalCost::factor(NodeId v, const NodeSet& placed, const NodeSet& filtered) const {
  const StatsTree& js = *join_stats_;
  if (placed.contains(v)) {
    double prod = 1.0;
    for (NodeId c : js.tree.children(v)) prod *= factor(c, placed, filtered);
    return js.edge[v].m * hit_probability(prod, js.edge[v].fo);
  }
  if (filtered.contains(v)) return std::min(1.0, js.edge[v].m + weights_.epsilon);
  return 1.0;
}

double IncrementalCost::population(NodeId group, const NodeSet& placed, const NodeSet& filtered) const {
  const StatsTree& js = *join_stats_;
  const JoinTree& t = js.tree;
  double pop = js.N;
  if (!com_) {
    placed.for_each([&](NodeId v) { pop *= js.edge[v].s(); });
    filtered.for_each([&](NodeId v) {
      if (!placed.contains(v)) pop *= std::min(1.0, js.edge[v].m + weights_.epsilon);
    });
    return pop;
  }
  NodeSet on_path;
  for (NodeId u = group; u != kNoNode; u = t.parent(u)) on_path.insert(u);
  for (NodeId u = group; u != kNoNode; u = t.parent(u)) {
    if (u != t.root()) pop *= js.edge[u].s();
    for (NodeId c : t.children(u)) {
      if (!on_path.contains(c)) pop *= factor(c, placed, filtered);
    }
  }
  return pop;
}

double IncrementalCost::filter_tests(NodeId joined, const NodeSet& placed, const NodeSet& filtered_before) const {
  NodeSet filtered = filtered_before;
  double tests = 0;
  for (NodeId c : filter_order_[joined]) {
    tests += population(joined, placed, filtered);
    filtered.insert(c);
  }
  return tests;
}

NodeSet IncrementalCost::frontier(const NodeSet& placed) const {
  const JoinTree& t = join_stats_->tree;
  NodeSet out;
  for (NodeId v = 0; v < t.size(); ++v) {
    if (v == t.root() || placed.contains(v)) continue;
    const NodeId p = t.parent(v);
    if (p == t.root() || placed.contains(p)) out.insert(v);
  }
  return out;
}

StepCost IncrementalCost::step(const NodeSet& placed, NodeId next) const {
  const StatsTree& js = *join_stats_;
  check_eligible(js, placed, next);
  StepCost out;
  const NodeSet filtered = bvp_ ? frontier(placed) : NodeSet{};
  out.hash_probes = population(js.tree.parent(next), placed, filtered);
  if (bvp_) out.bitvector_probes = filter_tests(next, placed.with(next), filtered.without(next));
  out.weighted = weights_.w_hash * out.hash_probes + weights_.w_bitvector * out.bitvector_probes;
  return out;
}

CostBreakdown plan_cost(const StatsTree& st, std::span<const NodeId> order, Strategy strategy, const Weights& weights,
                        const std::vector<std::vector<NodeId>>* child_order) {
  if (!is_valid_order(st.tree, order)) {
    throw QueryError(QueryErrorCode::InvalidPrefix, "order violates precedence constraints");
  }
  IncrementalCost inc(st, strategy, weights, child_order);
  CostBreakdown b;
  const StepCost init = inc.initial();
  b.initial_bitvector_probes = init.bitvector_probes;
  b.bitvector_probes = init.bitvector_probes;
  b.semijoin_probes = inc.semijoin_probes();
  b.semijoin_ops = inc.semijoin_ops();
  b.weighted = init.weighted;
  NodeSet placed;
  for (NodeId v : order) {
    const StepCost s = inc.step(placed, v);
    b.ops.push_back({v, s.hash_probes, s.bitvector_probes});
    b.weighted += s.weighted;
    placed.insert(v);
  }
  // Totals are summed in node order so that equal per-operator work gives
  // bit-identical totals whatever the plan order.
  std::vector<const OpCost*> by_node;
  for (const auto& op : b.ops) by_node.push_back(&op);
  std::sort(by_node.begin(), by_node.end(), [](const OpCost* a, const OpCost* c) { return a->node < c->node; });
  for (const OpCost* op : by_node) {
    b.hash_probes += op->hash_probes;
    b.bitvector_probes += op->bitvector_probes;
  }
  b.emitted = inc.emitted();
  b.expansion_steps = uses_com(strategy) ? b.emitted : 0.0;
  b.weighted += inc.final_weighted();
  return b;
}

CostBreakdown cost_std(const StatsTree& st, std::span<const NodeId> order, const Weights& weights) {
  return plan_cost(st, order, Strategy::STD, weights);
}

CostBreakdown cost_com(const StatsTree& st, std::span<const NodeId> order, const Weights& weights) {
  return plan_cost(st, order, Strategy::COM, weights);
}

CostBreakdown cost_bvp(const StatsTree& st, std::span<const NodeId> order, double epsilon, bool com,
                       const Weights& weights) {
  Weights w = weights;
  w.epsilon = epsilon;
  return plan_cost(st, order, com ? Strategy::BVP_COM : Strategy::BVP_STD, w);
}

CostBreakdown cost_sj(const StatsTree& st, const std::vector<std::vector<NodeId>>& child_order,
                      std::span<const NodeId> order, bool com, const Weights& weights) {
  return plan_cost(st, order, com ? Strategy::SJ_COM : Strategy::SJ_STD, weights, &child_order);
}

RobustnessBounds robustness_bounds(size_t n, double lo, double hi, RobustnessMode mode) {
  if (n < 2) throw Error("robustness bounds need at least two relations");
  if (!(lo > 0.0) || lo > hi) throw Error("robustness bounds need 0 < lo <= hi");
  if (mode == RobustnessMode::Match && hi > 1.0) throw Error("match probabilities cannot exceed 1");
  RobustnessBounds out;
  const double k = static_cast<double>(n - 1);
  out.theta = lo == 1.0 ? k : (1.0 - std::pow(lo, k)) / (1.0 - lo);
  if (lo < hi) {
    double sum = 0;
    for (size_t i = 1; i + 2 <= n; ++i) {
      sum += std::pow(hi, static_cast<double>(i)) - std::pow(lo, static_cast<double>(i));
    }
    out.Theta = sum / (hi - lo);
  }
  return out;
}

}  // namespace mmjoin
