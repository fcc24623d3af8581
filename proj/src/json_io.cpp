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

#include "mmjoin/json_io.hpp"

#include <fstream>
#include <sstream>

#include "mmjoin/error.hpp"

namespace mmjoin {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

namespace {

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("malformed ") + what + " JSON: " + ex.what());
  }
}

}  // namespace

ojson query_to_json(const QuerySpec& q) {
  ojson j;
  j["relations"] = ojson::array();
  for (const auto& r : q.relations) j["relations"].push_back({{"alias", r.alias}, {"base", r.base}});
  j["edges"] = ojson::array();
  for (const auto& e : q.edges) {
    j["edges"].push_back({{"left", e.left}, {"left_attr", e.left_attr}, {"right", e.right}, {"right_attr", e.right_attr}});
  }
  if (q.driver) j["driver"] = *q.driver;
  return j;
}

QuerySpec parse_query_json(const nlohmann::json& j) {
  return guarded("query", [&] {
    QuerySpec q;
    for (const auto& r : j.at("relations")) {
      if (r.is_string()) {
        q.relations.push_back({r.get<std::string>(), r.get<std::string>()});
      } else {
        const std::string alias = r.contains("alias") ? r.at("alias").get<std::string>() : r.at("name").get<std::string>();
        const std::string base = r.contains("base") ? r.at("base").get<std::string>() : alias;
        q.relations.push_back({alias, base});
      }
    }
    for (const auto& e : j.at("edges")) {
      EdgeSpec es;
      es.left = e.at("left").get<std::string>();
      es.right = e.at("right").get<std::string>();
      if (e.contains("attr")) {
        es.left_attr = es.right_attr = e.at("attr").get<std::string>();
      } else {
        es.left_attr = e.at("left_attr").get<std::string>();
        es.right_attr = e.at("right_attr").get<std::string>();
      }
      q.edges.push_back(std::move(es));
    }
    if (j.contains("driver") && !j.at("driver").is_null()) q.driver = j.at("driver").get<std::string>();
    return q;
  });
}

QuerySpec load_query(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return guarded("query", [&] { return parse_query_json(nlohmann::json::parse(text)); });
}

ojson plan_to_json(const Plan& p) {
  return {{"driver", p.driver}, {"order", p.order}, {"strategy", std::string(to_string(p.strategy))}};
}

Plan parse_plan_json(const nlohmann::json& j) {
  return guarded("plan", [&] {
    Plan p;
    p.driver = j.at("driver").get<std::string>();
    p.order = j.at("order").get<std::vector<std::string>>();
    if (j.contains("strategy")) p.strategy = parse_strategy(j.at("strategy").get<std::string>());
    return p;
  });
}

ojson sj_plan_to_json(const SJPlan& p) {
  ojson j{{"driver", p.driver}, {"order", p.order}};
  j["child_order"] = ojson::object();
  for (const auto& [k, v] : p.child_order) j["child_order"][k] = v;
  return j;
}

SJPlan parse_sj_plan_json(const nlohmann::json& j) {
  return guarded("semi-join plan", [&] {
    SJPlan p;
    p.driver = j.at("driver").get<std::string>();
    p.order = j.at("order").get<std::vector<std::string>>();
    if (j.contains("child_order")) {
      for (const auto& [k, v] : j.at("child_order").items()) p.child_order[k] = v.get<std::vector<std::string>>();
    }
    return p;
  });
}

ojson weights_to_json(const Weights& w) {
  return {{"w_hash", w.w_hash},
          {"w_bitvector", w.w_bitvector},
          {"w_semijoin", w.w_semijoin},
          {"w_emit", w.w_emit},
          {"epsilon", w.epsilon}};
}

Weights parse_weights_json(const nlohmann::json& j, Weights w) {
  return guarded("weights", [&] {
    if (j.contains("w_hash")) w.w_hash = j.at("w_hash").get<double>();
    if (j.contains("w_bitvector")) w.w_bitvector = j.at("w_bitvector").get<double>();
    if (j.contains("w_semijoin")) w.w_semijoin = j.at("w_semijoin").get<double>();
    if (j.contains("w_emit")) w.w_emit = j.at("w_emit").get<double>();
    if (j.contains("epsilon")) w.epsilon = j.at("epsilon").get<double>();
    if (w.w_hash < 0 || w.w_bitvector < 0 || w.w_semijoin < 0 || w.w_emit < 0) throw Error("weights must be >= 0");
    if (w.epsilon < 0 || w.epsilon >= 1) throw Error("epsilon must lie in [0,1)");
    return w;
  });
}

ojson cost_to_json(const CostBreakdown& b, const JoinTree& tree) {
  ojson ops = ojson::array();
  for (const auto& op : b.ops) {
    ops.push_back({{"relation", tree.name(op.node)}, {"hash_probes", op.hash_probes}, {"bitvector_probes", op.bitvector_probes}});
  }
  ojson sj = ojson::array();
  for (const auto& [p, probes] : b.semijoin_ops) sj.push_back({{"relation", tree.name(p)}, {"semijoin_probes", probes}});
  return {{"operators", ops},
          {"semijoin", sj},
          {"initial_bitvector_probes", b.initial_bitvector_probes},
          {"hash_probes", b.hash_probes},
          {"bitvector_probes", b.bitvector_probes},
          {"semijoin_probes", b.semijoin_probes},
          {"emitted", b.emitted},
          {"expansion_steps", b.expansion_steps},
          {"weighted", b.weighted}};
}

ojson exec_to_json(const ResultSummary& r, const JoinTree& tree) {
  ojson ops = ojson::array();
  for (NodeId v = 0; v < r.stats.per_node.size(); ++v) {
    const auto& c = r.stats.per_node[v];
    ops.push_back({{"relation", tree.name(v)},
                   {"hash_probes", c.hash_probes},
                   {"bitvector_probes", c.bitvector_probes},
                   {"semijoin_probes", c.semijoin_probes},
                   {"output", c.output}});
  }
  ojson fill = ojson::object();
  for (const auto& [k, v] : r.filter_fill) fill[k] = v;
  return {{"strategy", std::string(to_string(r.strategy))},
          {"plan", plan_to_json(r.plan)},
          {"output_mode", std::string(to_string(r.mode))},
          {"cardinality", r.cardinality},
          {"valid", r.valid},
          {"timed_out", r.timed_out},
          {"wall_seconds", r.wall_seconds},
          {"operators", ops},
          {"totals",
           {{"hash_probes", r.stats.hash_probes},
            {"bitvector_probes", r.stats.bitvector_probes},
            {"semijoin_probes", r.stats.semijoin_probes},
            {"emitted_tuples", r.stats.emitted_tuples},
            {"expansion_steps", r.stats.expansion_steps}}},
          {"filter_fill", fill},
          {"invariant_checks", r.invariant_checks}};
}

ojson opt_to_json(const OptResult& r, const JoinTree& tree) {
  ojson j{{"plan", plan_to_json(r.plan)}, {"cost", cost_to_json(r.cost, tree)}};
  if (r.sj_plan) j["sj_plan"] = sj_plan_to_json(*r.sj_plan);
  j["search"] = {{"subsets_expanded", r.search.subsets_expanded},
                 {"candidates_evaluated", r.search.candidates_evaluated},
                 {"driver_searches", r.search.driver_searches}};
  ojson drivers = ojson::array();
  for (const auto& [d, c] : r.per_driver) drivers.push_back({{"driver", d}, {"weighted", c}});
  j["per_driver"] = drivers;
  return j;
}

}  // namespace mmjoin
