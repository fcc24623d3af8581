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

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mmjoin/querymodel.hpp"
#include "mmjoin/stats.hpp"

namespace mmjoin {

/// A join tree rooted at the driver with stats on every parent->child edge.
/// `edge[root]` is {1, 1}; `cardinality[v]` is |v| (NaN when unknown).
struct StatsTree {
  JoinTree tree;
  std::vector<EdgeStats> edge;
  std::vector<double> cardinality;
  double N = 0;

  size_t size() const { return tree.size(); }
  NodeId root() const { return tree.root(); }
};

/// Throws Error when an edge lacks stats or the driver has no cardinality
/// and `driver_rows` is not given.
StatsTree make_stats_tree(const JoinTree& tree, const StatsSet& stats, std::optional<double> driver_rows = {});

struct Weights {
  double w_hash = 1.0;
  double w_bitvector = 0.5;
  double w_semijoin = 0.5;
  double w_emit = 1.0 / 14.0;
  double epsilon = 0.01;
};

struct OpCost {
  NodeId node = kNoNode;
  double hash_probes = 0;
  double bitvector_probes = 0;
};

struct CostBreakdown {
  // Per join in plan order (phase 2 for semi-join strategies).
  std::vector<OpCost> ops;
  // Bitvector tests applied before the first join.
  double initial_bitvector_probes = 0;
  // Phase-1 probes per parent, in post-order.
  std::vector<std::pair<NodeId, double>> semijoin_ops;
  double hash_probes = 0;
  double bitvector_probes = 0;
  double semijoin_probes = 0;
  double emitted = 0;
  double expansion_steps = 0;
  // Weighted cost accumulated in plan order; identical to the optimizer's sum.
  double weighted = 0;
};

double total_weighted_cost(const CostBreakdown& b, const Weights& w);

/// Per node, children by increasing filter pass rate min(1, m + epsilon),
/// ties by name: the order bitvector filters are costed in.
std::vector<std::vector<NodeId>> bvp_filter_order(const StatsTree& st, double epsilon);

/// Survival probability of the fragment of `members` rooted at `r`.
double survival(const StatsTree& st, NodeId r, const NodeSet& members);

/// Expected probes into `next` under factorized execution, given the placed
/// set (root excluded). Throws InvalidPrefix when `next` is not eligible.
double probes_com(const StatsTree& st, const NodeSet& placed, NodeId next);

/// Expected probes into `next` under flat execution.
double probes_std(const StatsTree& st, const NodeSet& placed, NodeId next);

/// One plan step: expected work and its weighted sum.
struct StepCost {
  double hash_probes = 0;
  double bitvector_probes = 0;
  double weighted = 0;
};

/// Incremental cost of a left-deep plan. The cost of placing `next` depends
/// only on the placed set, for every strategy.
class IncrementalCost {
 public:
  /// `child_order` fixes the phase-1 probe order of semi-join strategies;
  /// null selects increasing adjusted match probability.
  IncrementalCost(const StatsTree& st, Strategy strategy, const Weights& weights,
                  const std::vector<std::vector<NodeId>>* child_order = nullptr);
  IncrementalCost(const IncrementalCost&) = delete;
  IncrementalCost& operator=(const IncrementalCost&) = delete;

  /// Work before the first join: driver-side filters and the whole phase 1.
  StepCost initial() const { return initial_; }
  StepCost step(const NodeSet& placed, NodeId next) const;
  /// Order-independent terms charged once at the end (emission).
  double final_weighted() const { return final_weighted_; }
  double semijoin_probes() const { return semijoin_probes_; }
  const std::vector<std::pair<NodeId, double>>& semijoin_ops() const { return semijoin_ops_; }
  double emitted() const { return emitted_; }
  /// The stats the join phase is costed on (phase-2 stats for semi-join).
  const StatsTree& join_stats() const { return *join_stats_; }
  Strategy strategy() const { return strategy_; }

 private:
  double population(NodeId group, const NodeSet& placed, const NodeSet& filtered) const;
  double factor(NodeId v, const NodeSet& placed, const NodeSet& filtered) const;
  double filter_tests(NodeId joined, const NodeSet& placed, const NodeSet& filtered_before) const;
  NodeSet frontier(const NodeSet& placed) const;

  const StatsTree* base_;
  std::optional<StatsTree> phase2_;
  const StatsTree* join_stats_;
  Strategy strategy_;
  Weights weights_;
  bool com_;
  bool bvp_;
  // Children of each node in the order their filters are tested.
  std::vector<std::vector<NodeId>> filter_order_;
  StepCost initial_;
  double semijoin_probes_ = 0;
  std::vector<std::pair<NodeId, double>> semijoin_ops_;
  double emitted_ = 0;
  double final_weighted_ = 0;
};

/// Cost of a complete order (non-root nodes). Validates the order.
CostBreakdown plan_cost(const StatsTree& st, std::span<const NodeId> order, Strategy strategy,
                        const Weights& weights = {}, const std::vector<std::vector<NodeId>>* child_order = nullptr);

CostBreakdown cost_std(const StatsTree& st, std::span<const NodeId> order, const Weights& weights = {});
CostBreakdown cost_com(const StatsTree& st, std::span<const NodeId> order, const Weights& weights = {});
CostBreakdown cost_bvp(const StatsTree& st, std::span<const NodeId> order, double epsilon, bool com,
                       const Weights& weights = {});
CostBreakdown cost_sj(const StatsTree& st, const std::vector<std::vector<NodeId>>& child_order,
                      std::span<const NodeId> order, bool com, const Weights& weights = {});

/// Fraction of each node's tuples surviving full reduction of its subtree.
std::vector<double> reduction_ratios(const StatsTree& st);

/// Edge stats against fully reduced children (index by child node).
std::vector<EdgeStats> reduced_edges(const StatsTree& st);

/// Phase-2 stats: m = 1 and reduced fanouts; N is the reduced driver size.
StatsTree phase2_stats(const StatsTree& st);

/// Per parent, children by increasing reduced match probability (ties by name).
std::vector<std::vector<NodeId>> sj_child_order(const StatsTree& st);

/// Phase-1 probes for a given child order.
double semijoin_cost(const StatsTree& st, const std::vector<std::vector<NodeId>>& child_order,
                     std::vector<std::pair<NodeId, double>>* per_parent = nullptr);

enum class RobustnessMode { Selectivity, Match };

struct RobustnessBounds {
  double theta = 1;
  std::optional<double> Theta;  // undefined when lo == hi
};

RobustnessBounds robustness_bounds(size_t n, double lo, double hi, RobustnessMode mode = RobustnessMode::Match);

}  // namespace mmjoin
