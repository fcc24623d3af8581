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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mmjoin/catalog.hpp"
#include "mmjoin/costmodel.hpp"
#include "mmjoin/engine.hpp"
#include "mmjoin/optimizer.hpp"
#include "mmjoin/querymodel.hpp"
#include "mmjoin/stats.hpp"

namespace mmjoin {

enum class ShapeKind { Star, Path, Snowflake, RandomTree };

/// star(k) and path(k) have k relations; snowflake(a,b) has a hub with `a`
/// children, each with `b` children.
struct Shape {
  ShapeKind kind = ShapeKind::Star;
  size_t a = 3;
  size_t b = 0;
};

Shape parse_shape(std::string_view text);
std::string to_string(const Shape& shape);

struct FanoutSpec {
  enum class Kind { Constant, Uniform, Normal, Exponential };
  Kind kind = Kind::Constant;
  // Constant: a. Uniform: [a, b]. Normal: mean a, variance b. Exponential: mean a.
  double a = 1;
  double b = 0;
};

FanoutSpec parse_fanout(std::string_view text);
std::string to_string(const FanoutSpec& spec);

struct ShapeSpec {
  Shape shape;
  size_t n = 10000;
  double m_lo = 0.1;
  double m_hi = 0.5;
  FanoutSpec fanout;
  uint64_t seed = 1;
};

/// Relation names, parent links and per-edge targets of a rooted tree.
struct TreeSpec {
  std::vector<std::string> names;
  std::vector<int> parent;  // -1 for the driver (index 0)
  std::vector<double> m;
  std::vector<FanoutSpec> fanout;
};

TreeSpec make_tree_spec(const Shape& shape, uint64_t seed);

struct GeneratedInstance {
  Catalog catalog;
  QuerySpec query;
  // Exhaustively measured stats (both directions) and cardinalities.
  StatsSet stats;
  // Requested per-edge targets (parent -> child only).
  StatsSet targets;
  std::string driver;
  uint64_t seed = 0;
};

/// Data for a rooted tree: every parent key column is a permutation of its
/// row ordinals; each child holds round(m * |parent|) of those keys, each
/// repeated according to the fanout spec.
GeneratedInstance generate_tree(const TreeSpec& spec, size_t n, uint64_t seed);

GeneratedInstance gen_synthetic(const ShapeSpec& spec);

/// Small random instance: random tree of up to `max_relations` relations,
/// keys from small domains, at most `max_rows` rows per relation.
GeneratedInstance gen_random_small(uint64_t seed, size_t max_relations = 6, size_t max_rows = 50);

/// Nested-loop evaluation. Tuples hold base row ids in query node order.
std::vector<std::vector<uint32_t>> oracle_join(const Catalog& catalog, const JoinGraph& graph,
                                               size_t row_cap = 100000);

/// Output tuples per row of `driver`, from the nested-loop oracle.
std::vector<uint64_t> oracle_driver_counts(const Catalog& catalog, const JoinGraph& graph, NodeId driver);

/// Stats-only instance: rooted tree and per-edge stats.
struct StatsInstance {
  JoinGraph graph;
  StatsSet stats;
  StatsTree tree;
};

StatsInstance make_stats_instance(const TreeSpec& spec, double n);

struct AsiInstance {
  StatsInstance instance;
  std::vector<NodeId> order_a;
  std::vector<NodeId> order_b;
};

/// Seven relations, m = 0.5 everywhere, unit fanouts except fo2 and fo3.
AsiInstance asi_counterexample(double fo2, double fo3, double n = 10000);

struct AdversarialInstance {
  StatsInstance instance;
  size_t decoys = 0;
  // Greedy weighted cost divided by the optimum, per heuristic.
  double ratio_rank = 0;
  double ratio_tuples = 0;
  double ratio_survival = 0;
  OptResult optimal;
};

/// A hidden near-zero-m relation below a pass-through relation, next to a
/// chain of mildly selective decoys. The chain grows until every greedy
/// heuristic is at least `f` times worse than the optimum under `strategy`.
AdversarialInstance adversarial_instance(double f, double n = 10000, Strategy strategy = Strategy::COM);

/// Writes catalog, query.json, stats.json and targets.json to `dir`.
void write_instance(const GeneratedInstance& inst, const std::filesystem::path& dir);

struct ExperimentConfig {
  std::string name;
  nlohmann::json params;
};

/// compare_strategies, cost_validation, fanout_sensitivity, robustness,
/// optimizer_quality. Reports embed the effective config.
nlohmann::json run_experiment(const ExperimentConfig& config);

/// A random valid order: each step picks uniformly among eligible relations.
std::vector<NodeId> random_order(const JoinTree& tree, uint64_t seed);

}  // namespace mmjoin
