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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmjoin/costmodel.hpp"

namespace mmjoin {

enum class Algorithm { Exhaustive, GreedyRank, GreedyTuples, GreedySurvival, SjRules };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::Exhaustive;
  Strategy strategy = Strategy::COM;
  Weights weights;
  bool enumerate_drivers = false;
  size_t max_relations = 20;
  // Per-probe cost c_i of each relation for the rank heuristic (default 1).
  std::map<std::string, double> probe_costs;
};

struct SearchStats {
  size_t subsets_expanded = 0;
  size_t candidates_evaluated = 0;
  size_t driver_searches = 0;
};

struct OptResult {
  Plan plan;
  std::vector<NodeId> order;
  CostBreakdown cost;
  SearchStats search;
  // Set for semi-join strategies.
  std::optional<SJPlan> sj_plan;
  // Weighted cost of the best plan for each driver tried.
  std::vector<std::pair<std::string, double>> per_driver;

  double weighted() const { return cost.weighted; }
};

/// Dynamic program over connected subsets containing the driver.
OptResult optimize_exhaustive(const StatsTree& st, Strategy strategy, const Weights& weights = {},
                              size_t max_relations = 20);

OptResult optimize_greedy(const StatsTree& st, Algorithm heuristic, Strategy strategy, const Weights& weights = {},
                          const std::map<std::string, double>& probe_costs = {});

/// Semi-join ordering rules for a fixed driver.
OptResult optimize_sj(const StatsTree& st, bool com, const Weights& weights = {});

/// Semi-join ordering rules over every driver.
OptResult optimize_sj(const JoinGraph& graph, const StatsSet& stats, bool com, const Weights& weights = {});

/// The configured per-driver search on one rooted tree.
OptResult optimize(const StatsTree& st, const OptimizerConfig& config);

/// Runs the configured search for every driver and keeps the cheapest.
OptResult optimize_all_drivers(const JoinGraph& graph, const StatsSet& stats, const OptimizerConfig& config);

/// Phase-2 order minimising flat probes on the reduced stats, honouring
/// precedence (tree-normalised rank ordering).
std::vector<NodeId> kbz_order(const StatsTree& st, const std::vector<double>& probe_costs = {});

}  // namespace mmjoin
