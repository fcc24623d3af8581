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
#include <random>

#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/json_io.hpp"

namespace mmjoin {

namespace {

using nlohmann::json;

const std::vector<std::string> kBenchmarkShapes{"star:7", "path:11", "snowflake:3,2", "snowflake:5,1"};

// Reads params[key], records the effective value in `cfg`.
template <typename T>
T param(const json& params, json& cfg, const char* key, T def) {
  T v = params.contains(key) ? params.at(key).get<T>() : def;
  cfg[key] = v;
  return v;
}

std::pair<double, double> parse_range(const json& v) {
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (v.is_array() && v.size() == 2) return {v[0].get<double>(), v[1].get<double>()};
  const auto s = v.get<std::string>();
  const auto colon = s.find(':');
  if (colon == std::string::npos) return {std::stod(s), std::stod(s)};
  return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
}

std::pair<double, double> range_param(const json& params, json& cfg, const char* key, std::pair<double, double> def) {
  auto r = params.contains(key) ? parse_range(params.at(key)) : def;
  cfg[key] = json::array({r.first, r.second});
  return r;
}

std::vector<Strategy> strategy_param(const json& params, json& cfg, std::vector<Strategy> def) {
  if (params.contains("strategies")) {
    def.clear();
    for (const auto& s : params.at("strategies")) def.push_back(parse_strategy(s.get<std::string>()));
  }
  cfg["strategies"] = json::array();
  for (auto s : def) cfg["strategies"].push_back(std::string(to_string(s)));
  return def;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double rel_err(double predicted, double measured) {
  if (measured == 0) return predicted == 0 ? 0 : std::numeric_limits<double>::infinity();
  return std::abs(predicted - measured) / measured;
}

// A generated instance with its graph and stats rooted at the driver.
struct Prepared {
  GeneratedInstance inst;
  JoinGraph graph;
  StatsTree st;
};

Prepared prepare(const ShapeSpec& spec) {
  GeneratedInstance inst = gen_synthetic(spec);
  JoinGraph graph = validate_query(inst.query, inst.catalog);
  StatsTree st = make_stats_tree(root_at(graph, inst.driver), inst.stats);
  return {std::move(inst), std::move(graph), std::move(st)};
}

std::map<std::string, std::vector<std::string>> names_of(const JoinTree& tree,
                                                         const std::vector<std::vector<NodeId>>& order) {
  std::map<std::string, std::vector<std::string>> out;
  for (NodeId v = 0; v < order.size(); ++v) {
    if (!order[v].empty()) out[tree.name(v)] = order_names(tree, order[v]);
  }
  return out;
}

struct Measured {
  ResultSummary result;
  CostBreakdown predicted;
};

// Costs and runs one order. Bitvector filters are tested in the cost model's
// order; semi-join strategies reduce children in the rule-based order.
Measured run_order(const Prepared& p, const std::vector<NodeId>& order, Strategy strategy, const Weights& w,
                   double timeout) {
  const JoinTree& tree = p.st.tree;
  Plan plan{tree.name(tree.root()), order_names(tree, order), strategy};
  ExecOptions opts;
  opts.mode = OutputMode::Count;
  opts.timeout_seconds = timeout;
  if (uses_bvp(strategy)) opts.filter_order = names_of(tree, bvp_filter_order(p.st, w.epsilon));
  const auto child_order = sj_child_order(p.st);
  SJPlan sj{plan.driver, names_of(tree, child_order), plan.order};
  Measured m;
  m.predicted = plan_cost(p.st, order, strategy, w, uses_sj(strategy) ? &child_order : nullptr);
  m.result = execute(p.inst.catalog, p.graph, plan, opts, uses_sj(strategy) ? &sj : nullptr);
  return m;
}

json counters(const ResultSummary& r) {
  return {{"hash_probes", r.stats.hash_probes},
          {"bitvector_probes", r.stats.bitvector_probes},
          {"semijoin_probes", r.stats.semijoin_probes},
          {"emitted", r.stats.emitted_tuples},
          {"cardinality", r.cardinality}};
}

json predicted(const CostBreakdown& c) {
  return {{"hash_probes", c.hash_probes},
          {"bitvector_probes", c.bitvector_probes},
          {"semijoin_probes", c.semijoin_probes},
          {"emitted", c.emitted},
          {"weighted", c.weighted}};
}

double mean_fill(const ResultSummary& r) {
  if (r.filter_fill.empty()) return 0;
  double s = 0;
  for (const auto& [k, v] : r.filter_fill) s += v;
  return s / static_cast<double>(r.filter_fill.size());
}

ShapeSpec shape_spec(const json& params, json& cfg, const std::string& fo_default, std::pair<double, double> m_default) {
  ShapeSpec s;
  s.n = param<size_t>(params, cfg, "n", 10000);
  std::tie(s.m_lo, s.m_hi) = range_param(params, cfg, "m", m_default);
  s.fanout = parse_fanout(param<std::string>(params, cfg, "fo", fo_default));
  s.seed = param<uint64_t>(params, cfg, "seed", 1);
  return s;
}

json compare_strategies(const json& params, json& cfg) {
  const auto shapes = param(params, cfg, "shapes", kBenchmarkShapes);
  ShapeSpec base = shape_spec(params, cfg, "uniform:1,4", {0.1, 0.5});
  const double timeout = param(params, cfg, "timeout_seconds", 60.0);
  const Algorithm algo = parse_algorithm(param<std::string>(params, cfg, "algorithm", "exhaustive"));
  const auto strategies = strategy_param(params, cfg, {kAllStrategies.begin(), kAllStrategies.end()});
  json rows = json::array();
  json summary = json::object();
  for (const auto& shape : shapes) {
    ShapeSpec spec = base;
    spec.shape = parse_shape(shape);
    const Prepared p = prepare(spec);
    std::vector<json> shape_rows;
    double best_wall = std::numeric_limits<double>::infinity();
    double best_probes = std::numeric_limits<double>::infinity();
    for (Strategy s : strategies) {
      OptimizerConfig oc;
      oc.algorithm = uses_sj(s) ? Algorithm::SjRules : algo;
      oc.strategy = s;
      const OptResult opt = optimize(p.st, oc);
      const Measured m = run_order(p, opt.order, s, oc.weights, timeout);
      const double probes = static_cast<double>(m.result.stats.hash_probes + m.result.stats.bitvector_probes +
                                                m.result.stats.semijoin_probes);
      if (!m.result.timed_out) {
        best_wall = std::min(best_wall, m.result.wall_seconds);
        best_probes = std::min(best_probes, probes);
      }
      shape_rows.push_back({{"shape", shape},
                            {"strategy", std::string(to_string(s))},
                            {"algorithm", std::string(to_string(oc.algorithm))},
                            {"order", m.result.plan.order},
                            {"predicted", predicted(m.predicted)},
                            {"measured", counters(m.result)},
                            {"total_probes", probes},
                            {"wall_seconds", m.result.wall_seconds},
                            {"timed_out", m.result.timed_out}});
    }
    for (auto& r : shape_rows) {
      r["relative_wall"] = r["timed_out"].get<bool>() ? json(nullptr) : json(r["wall_seconds"].get<double>() / best_wall);
      r["relative_probes"] = r["total_probes"].get<double>() / best_probes;
      rows.push_back(r);
    }
  }
  summary["rows"] = rows.size();
  return {{"rows", rows}, {"summary", summary}};
}

json cost_validation(const json& params, json& cfg) {
  const auto shapes = param(params, cfg, "shapes", kBenchmarkShapes);
  ShapeSpec base = shape_spec(params, cfg, "constant:2", {0.5, 0.5});
  const size_t orders = param<size_t>(params, cfg, "orders", 300);
  const double timeout = param(params, cfg, "timeout_seconds", 60.0);
  const double tolerance = param(params, cfg, "tolerance", 0.10);
  const auto strategies = strategy_param(params, cfg, {Strategy::STD, Strategy::COM});
  json rows = json::array();
  json summary = json::array();
  for (const auto& shape : shapes) {
    ShapeSpec spec = base;
    spec.shape = parse_shape(shape);
    const Prepared p = prepare(spec);
    for (Strategy s : strategies) {
      size_t within = 0;
      size_t runs = 0;
      for (size_t k = 0; k < orders; ++k) {
        const auto order = random_order(p.st.tree, spec.seed * 1000003 + k);
        Weights w;
        Measured m = run_order(p, order, s, w, timeout);
        if (uses_bvp(s)) {
          // Predict with the false-positive rate the filters actually had.
          w.epsilon = mean_fill(m.result);
          m.predicted = plan_cost(p.st, order, s, w);
        }
        const double measured = static_cast<double>(m.result.stats.hash_probes);
        const double err = rel_err(m.predicted.hash_probes, measured);
        ++runs;
        if (!m.result.timed_out && err <= tolerance) ++within;
        rows.push_back({{"shape", shape},
                        {"strategy", std::string(to_string(s))},
                        {"order", m.result.plan.order},
                        {"predicted", predicted(m.predicted)},
                        {"measured", counters(m.result)},
                        {"relative_error", err},
                        {"wall_seconds", m.result.wall_seconds},
                        {"timed_out", m.result.timed_out}});
      }
      summary.push_back({{"shape", shape},
                         {"strategy", std::string(to_string(s))},
                         {"orders", runs},
                         {"within_tolerance", within},
                         {"fraction_within", runs ? static_cast<double>(within) / static_cast<double>(runs) : 0.0}});
    }
  }
  return {{"rows", rows}, {"summary", summary}};
}

json fanout_sensitivity(const json& params, json& cfg) {
  ShapeSpec base;
  base.shape = parse_shape(param<std::string>(params, cfg, "shape", "snowflake:3,2"));
  base.n = param<size_t>(params, cfg, "n", 10000);
  std::tie(base.m_lo, base.m_hi) = range_param(params, cfg, "m", {0.1, 0.5});
  base.seed = param<uint64_t>(params, cfg, "seed", 1);
  const auto dist = param<std::string>(params, cfg, "distribution", "normal");
  const double mean = param(params, cfg, "mean", 10.0);
  const Strategy strategy = parse_strategy(param<std::string>(params, cfg, "strategy", "com"));
  const double timeout = param(params, cfg, "timeout_seconds", 120.0);
  // Normal: variances around a fixed mean. Exponential: means (variance = mean^2).
  const bool normal = dist == "normal";
  if (!normal && dist != "exponential") throw Error("distribution must be normal or exponential");
  const auto levels = param(params, cfg, "levels",
                            normal ? std::vector<double>{1, 10, 25, 50, 100} : std::vector<double>{1, 2, 4, 8, 12});
  json rows = json::array();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0;
  for (size_t i = 0; i < levels.size(); ++i) {
    ShapeSpec spec = base;
    spec.fanout = normal ? FanoutSpec{FanoutSpec::Kind::Normal, mean, levels[i]}
                         : FanoutSpec{FanoutSpec::Kind::Exponential, levels[i], 0};
    const Prepared p = prepare(spec);
    OptimizerConfig oc;
    oc.strategy = strategy;
    oc.algorithm = uses_sj(strategy) ? Algorithm::SjRules : Algorithm::Exhaustive;
    const OptResult opt = optimize(p.st, oc);
    const Measured m = run_order(p, opt.order, strategy, oc.weights, timeout);
    const double actual = static_cast<double>(m.result.stats.hash_probes);
    const double ratio = actual > 0 ? m.predicted.hash_probes / actual : std::nan("");
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    double fo_sum = 0;
    for (NodeId v = 0; v < p.st.size(); ++v) fo_sum += v == p.st.root() ? 0 : p.st.edge[v].fo;
    rows.push_back({{"level", levels[i]},
                    {"fanout", to_string(spec.fanout)},
                    {"mean_measured_fo", fo_sum / static_cast<double>(p.st.size() - 1)},
                    {"order", m.result.plan.order},
                    {"estimated_probes", m.predicted.hash_probes},
                    {"actual_probes", actual},
                    {"ratio", ratio},
                    {"timed_out", m.result.timed_out}});
  }
  return {{"rows", rows}, {"summary", {{"min_ratio", lo}, {"max_ratio", hi}}}};
}

json robustness(const json& params, json& cfg) {
  const auto shapes = param(params, cfg, "shapes", std::vector<std::string>{"star:7", "snowflake:3,2"});
  ShapeSpec base = shape_spec(params, cfg, "uniform:1,4", {0.1, 0.5});
  const size_t orders = param<size_t>(params, cfg, "orders", 10);
  const double timeout = param(params, cfg, "timeout_seconds", 60.0);
  const auto strategies = strategy_param(params, cfg, {kAllStrategies.begin(), kAllStrategies.end()});
  json rows = json::array();
  json summary = json::array();
  for (const auto& shape : shapes) {
    ShapeSpec spec = base;
    spec.shape = parse_shape(shape);
    const Prepared p = prepare(spec);
    std::vector<std::vector<NodeId>> picks;
    for (size_t k = 0; k < orders; ++k) picks.push_back(random_order(p.st.tree, spec.seed * 7919 + k));
    for (Strategy s : strategies) {
      std::vector<json> runs;
      double max_probes = 0;
      double min_probes = std::numeric_limits<double>::infinity();
      double max_wall = 0;
      for (const auto& order : picks) {
        const Measured m = run_order(p, order, s, Weights{}, timeout);
        const auto probes = static_cast<double>(m.result.stats.hash_probes);
        max_probes = std::max(max_probes, probes);
        min_probes = std::min(min_probes, probes);
        max_wall = std::max(max_wall, m.result.wall_seconds);
        runs.push_back({{"shape", shape},
                        {"strategy", std::string(to_string(s))},
                        {"order", m.result.plan.order},
                        {"measured", counters(m.result)},
                        {"predicted", predicted(m.predicted)},
                        {"wall_seconds", m.result.wall_seconds},
                        {"timed_out", m.result.timed_out}});
      }
      std::vector<double> norm;
      for (auto& r : runs) {
        const double pr = r["measured"]["hash_probes"].get<double>();
        r["normalized_probes"] = max_probes > 0 ? pr / max_probes : 1.0;
        r["normalized_wall"] = max_wall > 0 ? r["wall_seconds"].get<double>() / max_wall : 1.0;
        norm.push_back(r["normalized_probes"].get<double>());
        rows.push_back(r);
      }
      summary.push_back({{"shape", shape},
                         {"strategy", std::string(to_string(s))},
                         {"min_hash_probes", min_probes},
                         {"max_hash_probes", max_probes},
                         {"probe_spread", max_probes > 0 ? (max_probes - min_probes) / max_probes : 0.0},
                         {"median_normalized_probes", median(norm)}});
    }
  }
  return {{"rows", rows}, {"summary", summary}};
}

// Random tree: the root has [root_lo, root_hi] children, other nodes
// [child_lo, child_hi], built breadth-first up to `max_nodes` relations.
TreeSpec random_fanout_tree(std::mt19937_64& rng, size_t root_lo, size_t root_hi, size_t child_lo, size_t child_hi,
                            size_t max_nodes) {
  TreeSpec t;
  t.names.push_back("R1");
  t.parent.push_back(-1);
  for (size_t i = 0; i < t.names.size() && t.names.size() < max_nodes; ++i) {
    const size_t kids = i == 0 ? std::uniform_int_distribution<size_t>(root_lo, root_hi)(rng)
                               : std::uniform_int_distribution<size_t>(child_lo, child_hi)(rng);
    for (size_t c = 0; c < kids && t.names.size() < max_nodes; ++c) {
      t.names.push_back("R" + std::to_string(t.names.size() + 1));
      t.parent.push_back(static_cast<int>(i));
    }
  }
  t.m.assign(t.names.size(), 1.0);
  t.fanout.assign(t.names.size(), FanoutSpec{});
  return t;
}

json optimizer_quality(const json& params, json& cfg) {
  const size_t trees = param<size_t>(params, cfg, "trees", 100);
  const uint64_t seed = param<uint64_t>(params, cfg, "seed", 1);
  const double n = param(params, cfg, "n", 10000.0);
  const auto fo = range_param(params, cfg, "fo", {1, 10});
  const size_t max_nodes = param<size_t>(params, cfg, "max_relations", 10);
  const auto root_children = range_param(params, cfg, "root_children", {2, 5});
  const auto other_children = range_param(params, cfg, "other_children", {0, 3});
  const Strategy strategy = parse_strategy(param<std::string>(params, cfg, "strategy", "com"));
  std::vector<std::pair<double, double>> ranges{{0.05, 0.2}, {0.05, 0.5}, {0.1, 0.5}, {0.5, 0.9}};
  if (params.contains("m_ranges")) {
    ranges.clear();
    for (const auto& r : params.at("m_ranges")) ranges.push_back(parse_range(r));
  }
  cfg["m_ranges"] = json::array();
  for (auto [a, b] : ranges) cfg["m_ranges"].push_back({a, b});

  const std::vector<std::pair<Algorithm, std::string>> heuristics{
      {Algorithm::GreedyRank, "rank"}, {Algorithm::GreedyTuples, "tuples"}, {Algorithm::GreedySurvival, "survival"}};
  json rows = json::array();
  json summary = json::array();
  for (size_t ri = 0; ri < ranges.size(); ++ri) {
    const auto [m_lo, m_hi] = ranges[ri];
    std::mt19937_64 rng(seed * 1000 + ri);
    std::map<std::string, std::vector<double>> ratios;
    for (size_t t = 0; t < trees; ++t) {
      TreeSpec spec = random_fanout_tree(rng, static_cast<size_t>(root_children.first),
                                         static_cast<size_t>(root_children.second),
                                         static_cast<size_t>(other_children.first),
                                         static_cast<size_t>(other_children.second), max_nodes);
      for (size_t i = 1; i < spec.names.size(); ++i) {
        spec.m[i] = std::uniform_real_distribution<double>(m_lo, m_hi)(rng);
        spec.fanout[i].a = std::uniform_real_distribution<double>(fo.first, fo.second)(rng);
      }
      const StatsInstance inst = make_stats_instance(spec, n);
      const OptResult best = optimize_exhaustive(inst.tree, strategy, Weights{}, kMaxNodes);
      json row{{"m_range", {m_lo, m_hi}}, {"tree", t}, {"relations", spec.names.size()}, {"optimal", best.weighted()}};
      for (const auto& [algo, name] : heuristics) {
        const double r = optimize_greedy(inst.tree, algo, strategy).weighted() / best.weighted();
        ratios[name].push_back(r);
        row[name] = r;
      }
      rows.push_back(row);
    }
    json s{{"m_range", {m_lo, m_hi}}, {"trees", trees}};
    for (const auto& [algo, name] : heuristics) {
      s["median_" + name] = median(ratios[name]);
      s["max_" + name] = *std::max_element(ratios[name].begin(), ratios[name].end());
    }
    summary.push_back(s);
  }
  return {{"rows", rows}, {"summary", summary}};
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& config) {
  const json& params = config.params.is_null() ? json::object() : config.params;
  json cfg = json::object();
  json body;
  if (config.name == "compare_strategies") {
    body = compare_strategies(params, cfg);
  } else if (config.name == "cost_validation") {
    body = cost_validation(params, cfg);
  } else if (config.name == "fanout_sensitivity") {
    body = fanout_sensitivity(params, cfg);
  } else if (config.name == "robustness") {
    body = robustness(params, cfg);
  } else if (config.name == "optimizer_quality") {
    body = optimizer_quality(params, cfg);
  } else {
    throw Error("unknown experiment '" + config.name + "'");
  }
  json report{{"schema_version", kSchemaVersion}, {"experiment", config.name}, {"config", cfg}};
  report["summary"] = std::move(body["summary"]);
  report["rows"] = std::move(body["rows"]);
  return report;
}

}  // namespace mmjoin
