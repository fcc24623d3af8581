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

#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/json_io.hpp"

namespace {

using namespace mmjoin;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTimeout = 3;

struct Globals {
  size_t chunk_size = kDefaultChunkSize;
  uint64_t seed = 1;
  double timeout_seconds = 0;
  Weights weights;
  std::string report;
};

ojson global_config(const Globals& g) {
  return {{"chunk_size", g.chunk_size},
          {"seed", g.seed},
          {"timeout_seconds", g.timeout_seconds},
          {"weights", weights_to_json(g.weights)}};
}

// Writes to `path` or stdout.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

void emit_report(const std::string& path, ojson report) { emit(path, report.dump(2) + "\n"); }

std::string csv_cell(const json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_array()) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
    return csv_cell(json(s));
  }
  return v.is_null() ? "" : v.dump();
}

// Flattens report rows (one nested level) into a CSV table.
std::string rows_to_csv(const json& rows) {
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> table;
  for (const auto& r : rows) {
    std::map<std::string, std::string> line;
    for (const auto& [k, v] : r.items()) {
      if (v.is_object()) {
        for (const auto& [k2, v2] : v.items()) line[k + "." + k2] = csv_cell(v2);
      } else {
        line[k] = csv_cell(v);
      }
    }
    for (const auto& [k, v] : line) {
      if (std::find(header.begin(), header.end(), k) == header.end()) header.push_back(k);
    }
    table.push_back(std::move(line));
  }
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& line : table) {
    for (size_t i = 0; i < header.size(); ++i) {
      auto it = line.find(header[i]);
      os << (i ? "," : "") << (it == line.end() ? "" : it->second);
    }
    os << "\n";
  }
  return os.str();
}

StatsSet load_stats(const std::string& path) { return parse_stats_json(read_text_file(path)); }

struct QueryInputs {
  std::string instance;
  std::string catalog;
  std::string query;
  std::string stats;

  void resolve() {
    if (instance.empty()) return;
    const std::filesystem::path dir(instance);
    if (catalog.empty()) catalog = dir.string();
    if (query.empty()) query = (dir / "query.json").string();
    if (stats.empty() && std::filesystem::exists(dir / "stats.json")) stats = (dir / "stats.json").string();
  }
};

void add_query_inputs(CLI::App* cmd, QueryInputs& in, bool catalog, bool stats) {
  cmd->add_option("--instance", in.instance, "Instance directory written by gen");
  if (catalog) cmd->add_option("--catalog", in.catalog, "Catalog directory");
  cmd->add_option("--query", in.query, "Query JSON");
  if (stats) cmd->add_option("--stats", in.stats, "Stats JSON");
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Columnar many-to-many join engine and join-order optimizer"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--chunk-size", g.chunk_size, "Rows per chunk")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--timeout", g.timeout_seconds, "Execution budget in seconds (0 = none)")->check(CLI::NonNegativeNumber);
  app.add_option("--w-hash", g.weights.w_hash, "Weight of a hash probe")->check(CLI::NonNegativeNumber);
  app.add_option("--w-bitvector", g.weights.w_bitvector, "Weight of a bitvector probe")->check(CLI::NonNegativeNumber);
  app.add_option("--w-semijoin", g.weights.w_semijoin, "Weight of a semi-join probe")->check(CLI::NonNegativeNumber);
  app.add_option("--w-emit", g.weights.w_emit, "Weight of an emitted tuple")->check(CLI::NonNegativeNumber);
  app.add_option("--epsilon", g.weights.epsilon, "Bitvector false-positive rate")->check(CLI::Range(0.0, 0.999999));
  app.add_option("--report", g.report, "Report path (default stdout)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load CSV files into a catalog directory");
  std::string schema_path, data_dir, out_dir;
  ingest->add_option("--schema", schema_path, "Schema JSON")->required();
  ingest->add_option("--data", data_dir, "Directory of <relation>.csv files")->required();
  ingest->add_option("--out", out_dir, "Catalog output directory")->required();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic instance");
  std::string shape = "star:7", m_range = "0.1:0.5", fo = "constant:1";
  size_t n = 10000;
  gen->add_option("--shape", shape, "star:k | path:k | snowflake:a,b | random:k");
  gen->add_option("--n", n, "Driver rows")->check(CLI::PositiveNumber);
  gen->add_option("--m", m_range, "Match probability lo:hi");
  gen->add_option("--fo", fo, "constant:x | uniform:lo,hi | normal:mean,var | exponential:mean");
  gen->add_option("--out", out_dir, "Instance directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Estimate edge statistics");
  QueryInputs stats_in;
  add_query_inputs(stats, stats_in, true, false);
  std::string estimator = "sample", stats_out;
  size_t sample_size = 1000;
  stats->add_option("--estimator", estimator, "naive | sample | exact");
  stats->add_option("--sample-size", sample_size, "Correlated sample size")->check(CLI::PositiveNumber);
  stats->add_option("--out", stats_out, "Stats JSON output (default stdout)");

  // optimize
  auto* optimize_cmd = app.add_subcommand("optimize", "Choose a join order");
  QueryInputs opt_in;
  add_query_inputs(optimize_cmd, opt_in, false, true);
  std::string algo = "exhaustive", strategy_text = "com", driver, plan_out;
  bool all_drivers = false;
  size_t max_relations = 20;
  optimize_cmd->add_option("--algo", algo, "exhaustive | rank | tuples | survival | sj");
  optimize_cmd->add_option("--strategy", strategy_text, "std | com | bvp+std | bvp+com | sj+std | sj+com");
  optimize_cmd->add_option("--driver", driver, "Driver relation (default: query driver)");
  optimize_cmd->add_flag("--all-drivers", all_drivers, "Search every driver");
  optimize_cmd->add_option("--max-relations", max_relations, "Exhaustive search limit");
  optimize_cmd->add_option("--plan-out", plan_out, "Write the chosen plan JSON here");

  // run
  auto* run = app.add_subcommand("run", "Execute a plan");
  QueryInputs run_in;
  add_query_inputs(run, run_in, true, false);
  std::string plan_path, run_strategy, output_mode = "count", csv_out;
  bool verify = false;
  double bits_per_key = BitVectorFilter::kDefaultBitsPerKey;
  run->add_option("--plan", plan_path, "Plan JSON (from optimize)")->required();
  run->add_option("--strategy", run_strategy, "Override the plan's strategy");
  run->add_option("--output", output_mode, "flat | factorized | count");
  run->add_option("--csv", csv_out, "Write flat result rows as CSV");
  run->add_option("--bits-per-key", bits_per_key, "Bitvector size")->check(CLI::PositiveNumber);
  run->add_flag("--verify", verify, "Check structural invariants while running");

  // bench
  auto* bench = app.add_subcommand("bench", "Run a named experiment");
  std::string experiment, config_path, table_out;
  bench->add_option("--experiment", experiment,
                    "compare_strategies | cost_validation | fanout_sensitivity | robustness | optimizer_quality")
      ->required();
  bench->add_option("--config", config_path, "Experiment parameters: JSON file or inline object");
  bench->add_option("--csv", table_out, "Write report rows as CSV");

  // validate-cost
  auto* validate = app.add_subcommand("validate-cost", "Predicted vs measured probes over random orders");
  std::vector<std::string> shapes;
  size_t orders = 20;
  std::vector<std::string> strategies;
  validate->add_option("--shape", shapes, "Shapes (repeatable)");
  validate->add_option("--orders", orders, "Random orders per shape")->check(CLI::PositiveNumber);
  validate->add_option("--strategy", strategies, "Strategies (repeatable)");
  validate->add_option("--n", n, "Driver rows")->check(CLI::PositiveNumber);
  validate->add_option("--csv", table_out, "Write report rows as CSV");

  // robustness
  auto* robust = app.add_subcommand("robustness", "Spread of probe counts across random orders");
  std::vector<double> bounds;
  robust->add_option("--shape", shapes, "Shapes (repeatable)");
  robust->add_option("--orders", orders, "Random orders per shape")->check(CLI::PositiveNumber);
  robust->add_option("--strategy", strategies, "Strategies (repeatable)");
  robust->add_option("--n", n, "Driver rows")->check(CLI::PositiveNumber);
  robust->add_option("--bounds", bounds, "Only compute theta/Theta for n,lo,hi")->expected(3);
  robust->add_option("--csv", table_out, "Write report rows as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ojson report{{"schema_version", kSchemaVersion}};
    if (*ingest) {
      report["command"] = "ingest";
      const auto schema = load_schema(schema_path);
      const Catalog catalog = ingest_directory(schema, data_dir);
      write_catalog(catalog, out_dir);
      report["config"] = {{"schema", schema_path}, {"data", data_dir}, {"out", out_dir}};
      ojson rel = ojson::object();
      for (const auto& [name, r] : catalog.relations()) rel[name] = r.row_count();
      report["relations"] = rel;
      emit_report(g.report, report);
    } else if (*gen) {
      ShapeSpec spec;
      spec.shape = parse_shape(shape);
      spec.n = n;
      const auto colon = m_range.find(':');
      spec.m_lo = std::stod(m_range.substr(0, colon));
      spec.m_hi = colon == std::string::npos ? spec.m_lo : std::stod(m_range.substr(colon + 1));
      spec.fanout = parse_fanout(fo);
      spec.seed = g.seed;
      const GeneratedInstance inst = gen_synthetic(spec);
      write_instance(inst, out_dir);
      report["command"] = "gen";
      report["config"] = global_config(g);
      report["config"]["shape"] = to_string(spec.shape);
      report["config"]["n"] = n;
      report["config"]["m"] = {spec.m_lo, spec.m_hi};
      report["config"]["fo"] = to_string(spec.fanout);
      report["config"]["out"] = out_dir;
      ojson rel = ojson::object();
      for (const auto& [name, r] : inst.catalog.relations()) rel[name] = r.row_count();
      report["relations"] = rel;
      report["driver"] = inst.driver;
      emit_report(g.report, report);
    } else if (*stats) {
      stats_in.resolve();
      require(stats_in.catalog, "--catalog");
      require(stats_in.query, "--query");
      const Catalog catalog = read_catalog(stats_in.catalog);
      const JoinGraph graph = validate_query(load_query(stats_in.query), catalog);
      EstimatorOptions eo;
      eo.estimator = parse_estimator(estimator);
      eo.sample_size = sample_size;
      eo.seed = g.seed;
      emit(stats_out, stats_to_json(estimate_stats(catalog, graph, eo)));
    } else if (*optimize_cmd) {
      opt_in.resolve();
      require(opt_in.query, "--query");
      require(opt_in.stats, "--stats");
      const JoinGraph graph = build_join_graph(load_query(opt_in.query));
      const StatsSet st = load_stats(opt_in.stats);
      OptimizerConfig oc;
      oc.algorithm = parse_algorithm(algo);
      oc.strategy = parse_strategy(strategy_text);
      oc.weights = g.weights;
      oc.max_relations = max_relations;
      oc.enumerate_drivers = all_drivers;
      OptResult res;
      std::string root;
      if (all_drivers) {
        res = optimize_all_drivers(graph, st, oc);
        root = res.plan.driver;
      } else {
        root = !driver.empty() ? driver : graph.driver() ? *graph.driver() : graph.name(0);
        res = optimize(make_stats_tree(root_at(graph, root), st), oc);
      }
      const JoinTree tree = root_at(graph, root);
      report["command"] = "optimize";
      report["config"] = global_config(g);
      report["config"]["algorithm"] = std::string(to_string(oc.algorithm));
      report["config"]["strategy"] = std::string(to_string(oc.strategy));
      report["config"]["all_drivers"] = all_drivers;
      report["config"]["max_relations"] = max_relations;
      report["config"]["query"] = opt_in.query;
      report["config"]["stats"] = opt_in.stats;
      report["result"] = opt_to_json(res, tree);
      if (!plan_out.empty()) {
        ojson plan = plan_to_json(res.plan);
        if (res.sj_plan) plan["child_order"] = sj_plan_to_json(*res.sj_plan)["child_order"];
        write_text_file(plan_out, plan.dump(2) + "\n");
      }
      emit_report(g.report, report);
    } else if (*run) {
      run_in.resolve();
      require(run_in.catalog, "--catalog");
      require(run_in.query, "--query");
      const Catalog catalog = read_catalog(run_in.catalog);
      const JoinGraph graph = validate_query(load_query(run_in.query), catalog);
      const json plan_json = json::parse(read_text_file(plan_path));
      Plan plan = parse_plan_json(plan_json);
      if (!run_strategy.empty()) plan.strategy = parse_strategy(run_strategy);
      std::optional<SJPlan> sj;
      if (plan_json.contains("child_order")) sj = parse_sj_plan_json(plan_json);
      ExecOptions eo;
      eo.mode = parse_output_mode(output_mode);
      eo.chunk_size = g.chunk_size;
      eo.timeout_seconds = g.timeout_seconds;
      eo.verify = verify;
      eo.bits_per_key = bits_per_key;
      eo.materialize = !csv_out.empty();
      if (eo.materialize && eo.mode != OutputMode::Flat) throw Error("--csv needs --output flat");
      const ResultSummary res = execute(catalog, graph, plan, eo, sj ? &*sj : nullptr);
      if (res.rows && !csv_out.empty()) write_result_csv(catalog, graph, *res.rows, csv_out);
      report["command"] = "run";
      report["config"] = global_config(g);
      report["config"]["plan"] = plan_path;
      report["config"]["output"] = output_mode;
      report["config"]["bits_per_key"] = bits_per_key;
      report["config"]["verify"] = verify;
      report["result"] = exec_to_json(res, root_at(graph, plan.driver));
      emit_report(g.report, report);
      if (res.timed_out) return kExitTimeout;
    } else if (*bench || *validate || *robust) {
      if (*robust && !bounds.empty()) {
        const RobustnessBounds b = robustness_bounds(static_cast<size_t>(bounds[0]), bounds[1], bounds[2]);
        report["command"] = "robustness";
        report["config"] = {{"n", bounds[0]}, {"lo", bounds[1]}, {"hi", bounds[2]}};
        report["theta"] = b.theta;
        report["Theta"] = b.Theta ? ojson(*b.Theta) : ojson(nullptr);
        emit_report(g.report, report);
        return kExitOk;
      }
      ExperimentConfig ec;
      json params = json::object();
      if (*bench) {
        ec.name = experiment;
        if (!config_path.empty()) {
          const bool inline_json = config_path.find_first_not_of(" \t") != std::string::npos &&
                                   config_path[config_path.find_first_not_of(" \t")] == '{';
          params = json::parse(inline_json ? config_path : read_text_file(config_path));
        }
      } else {
        ec.name = *validate ? "cost_validation" : "robustness";
        if (!shapes.empty()) params["shapes"] = shapes;
        if (!strategies.empty()) params["strategies"] = strategies;
        params["orders"] = orders;
        params["n"] = n;
      }
      if (!params.contains("seed")) params["seed"] = g.seed;
      if (g.timeout_seconds > 0 && !params.contains("timeout_seconds")) params["timeout_seconds"] = g.timeout_seconds;
      ec.params = params;
      const json result = run_experiment(ec);
      if (!table_out.empty()) write_text_file(table_out, rows_to_csv(result.at("rows")));
      emit(g.report, result.dump(2) + "\n");
    }
    return kExitOk;
  } catch (const Timeout& e) {
    std::cerr << "timeout: " << e.what() << "\n";
    return kExitTimeout;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
