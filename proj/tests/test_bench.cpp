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

#include <map>

#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {
namespace {

namespace fs = std::filesystem;

// Independent measurement: fraction of parent keys present in the child and
// mean child copies among them.
EdgeStats measure(const Relation& parent, const std::string& pk, const Relation& child, const std::string& ck) {
  std::map<int64_t, double> freq;
  for (auto k : child.column(ck).values) freq[k] += 1;
  double hit = 0, total = 0;
  for (auto k : parent.column(pk).values) {
    auto it = freq.find(k);
    if (it != freq.end()) hit += 1, total += it->second;
  }
  return {hit / static_cast<double>(parent.row_count()), total / hit};
}

TEST(Generator, PathRealisesConstantTargetsExactly) {
  ShapeSpec spec;
  spec.shape = parse_shape("path:2");
  spec.n = 1000;
  spec.m_lo = spec.m_hi = 0.5;
  spec.fanout = parse_fanout("constant:4");
  const GeneratedInstance inst = gen_synthetic(spec);
  const JoinGraph g = validate_query(inst.query, inst.catalog);
  ASSERT_EQ(g.size(), 2u);
  const std::string p = inst.driver;
  const std::string c = g.name(0) == p ? g.name(1) : g.name(0);
  const std::string attr = "k_" + c;
  const EdgeStats e = measure(inst.catalog.relation(p), attr, inst.catalog.relation(c), attr);
  EXPECT_EQ(e.m, 0.5);
  EXPECT_EQ(e.fo, 4);
  EXPECT_EQ(inst.stats.get(p, c), e);
  EXPECT_EQ(inst.catalog.relation(c).row_count(), 2000u);
}

TEST(Generator, KeyForeignKeyStarKeepsDriverCardinality) {
  ShapeSpec spec;
  spec.shape = parse_shape("star:3");
  spec.n = 500;
  spec.m_lo = spec.m_hi = 1;
  spec.fanout = parse_fanout("1");
  const GeneratedInstance inst = gen_synthetic(spec);
  const JoinGraph g = validate_query(inst.query, inst.catalog);
  EXPECT_EQ(oracle_join(inst.catalog, g, 1000).size(), 500u);
}

TEST(Generator, UniformFanoutMixesFloorAndCeil) {
  TreeSpec t = make_tree_spec(parse_shape("path:2"), 1);
  t.m[1] = 1;
  t.fanout[1] = FanoutSpec{FanoutSpec::Kind::Constant, 2.5, 0};
  const GeneratedInstance inst = generate_tree(t, 100, 3);
  EXPECT_EQ(inst.catalog.relation(t.names[1]).row_count(), 250u);
  const EdgeStats e = *inst.stats.get(t.names[0], t.names[1]);
  EXPECT_EQ(e.fo, 2.5);
}

TEST(Generator, DeterministicPerSeed) {
  ShapeSpec spec;
  spec.shape = parse_shape("snowflake:2,2");
  spec.n = 300;
  spec.fanout = parse_fanout("exponential:3");
  spec.seed = 9;
  const GeneratedInstance a = gen_synthetic(spec);
  const GeneratedInstance b = gen_synthetic(spec);
  for (const auto& [name, r] : a.catalog.relations()) {
    for (const auto& c : r.columns()) EXPECT_EQ(c.values, b.catalog.relation(name).column(c.name).values);
  }
  spec.seed = 10;
  const GeneratedInstance c = gen_synthetic(spec);
  bool differs = false;
  for (const auto& [name, r] : a.catalog.relations()) {
    differs = differs || r.row_count() != c.catalog.relation(name).row_count();
  }
  EXPECT_TRUE(differs);
}

TEST(Generator, RejectsImpossibleSpecs) {
  ShapeSpec spec;
  spec.shape = parse_shape("star:3");
  spec.m_lo = 0;
  EXPECT_THROW(gen_synthetic(spec), GeneratorError);
  spec.m_lo = 0.4;
  spec.n = 1;
  spec.m_hi = 0.4;
  EXPECT_THROW(gen_synthetic(spec), GeneratorError);
  EXPECT_THROW(gen_random_small(1, 1), GeneratorError);
}

TEST(Shapes, ParseAndSizes) {
  EXPECT_EQ(make_tree_spec(parse_shape("star:7"), 1).names.size(), 7u);
  EXPECT_EQ(make_tree_spec(parse_shape("path:11"), 1).names.size(), 11u);
  EXPECT_EQ(make_tree_spec(parse_shape("snowflake:3,2"), 1).names.size(), 10u);
  EXPECT_EQ(make_tree_spec(parse_shape("snowflake:5,1"), 1).names.size(), 11u);
  EXPECT_EQ(to_string(parse_shape("snowflake:3,2")), "snowflake:3,2");
  const TreeSpec star = make_tree_spec(parse_shape("star:5"), 1);
  for (size_t i = 1; i < 5; ++i) EXPECT_EQ(star.parent[i], 0);
  EXPECT_THROW(parse_shape("ring:4"), Error);
  EXPECT_THROW(parse_shape("star:1"), Error);
  EXPECT_THROW(parse_shape("snowflake:3"), Error);
}

TEST(Shapes, PathDriverSitsAtCentre) {
  const TreeSpec t = make_tree_spec(parse_shape("path:5"), 1);
  size_t root_kids = 0;
  for (size_t i = 1; i < t.parent.size(); ++i) root_kids += t.parent[i] == 0;
  EXPECT_EQ(root_kids, 2u);
}

TEST(Fanout, ParseForms) {
  EXPECT_EQ(parse_fanout("3").kind, FanoutSpec::Kind::Constant);
  const FanoutSpec u = parse_fanout("uniform:1,4");
  EXPECT_EQ(u.kind, FanoutSpec::Kind::Uniform);
  EXPECT_EQ(u.b, 4);
  EXPECT_EQ(parse_fanout("normal:10,25").b, 25);
  EXPECT_EQ(parse_fanout("exp:2").kind, FanoutSpec::Kind::Exponential);
  EXPECT_EQ(parse_fanout(to_string(u)).a, 1);
  EXPECT_THROW(parse_fanout("constant:0.5"), Error);
  EXPECT_THROW(parse_fanout("uniform:4,1"), Error);
  EXPECT_THROW(parse_fanout("poisson:2"), Error);
}

TEST(Oracle, TinyJoin) {
  Catalog cat;
  Relation r("R");
  r.add_column({"k", ColumnType::Int64, {1, 2}});
  Relation s("S");
  s.add_column({"k", ColumnType::Int64, {2, 2, 3}});
  cat.add(std::move(r));
  cat.add(std::move(s));
  const JoinGraph g = validate_query(QuerySpec::from_names({"R", "S"}, {{"R", "k", "S", "k"}}), cat);
  const auto rows = oracle_join(cat, g);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& t : rows) EXPECT_EQ(t[g.id_of("R")], 1u);
  EXPECT_EQ(oracle_driver_counts(cat, g, g.id_of("R")), (std::vector<uint64_t>{0, 2}));
  EXPECT_EQ(oracle_driver_counts(cat, g, g.id_of("S")), (std::vector<uint64_t>{1, 1, 0}));
  EXPECT_THROW(oracle_join(cat, g, 1), Error);
}

TEST(Instances, RandomOrdersAreValidAndVaried) {
  const TreeSpec t = make_tree_spec(parse_shape("star:6"), 1);
  const StatsInstance si = make_stats_instance(t, 100);
  std::set<std::vector<NodeId>> seen;
  for (uint64_t s = 0; s < 30; ++s) {
    const auto o = random_order(si.tree.tree, s);
    EXPECT_TRUE(is_valid_order(si.tree.tree, o));
    seen.insert(o);
  }
  EXPECT_GT(seen.size(), 10u);
}

TEST(Instances, WriteInstanceFiles) {
  const fs::path dir = fs::temp_directory_path() / "mmjoin_bench_write";
  fs::remove_all(dir);
  const GeneratedInstance inst = gen_random_small(4);
  write_instance(inst, dir);
  for (const char* f : {"query.json", "stats.json", "targets.json", "instance.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

nlohmann::json run(const std::string& name, nlohmann::json params) {
  return run_experiment({name, std::move(params)});
}

TEST(Experiments, SmokeRunsEmbedConfig) {
  const auto cmp = run("compare_strategies", {{"shapes", {"star:4"}}, {"n", 500}});
  EXPECT_EQ(cmp["schema_version"], 1);
  EXPECT_EQ(cmp["rows"].size(), 6u);
  EXPECT_EQ(cmp["config"]["n"], 500);
  for (const auto& r : cmp["rows"]) EXPECT_GE(r["relative_probes"].get<double>(), 1.0);

  const auto val = run("cost_validation", {{"shapes", {"path:5"}}, {"n", 1000}, {"orders", 5}});
  ASSERT_EQ(val["summary"].size(), 2u);
  for (const auto& s : val["summary"]) EXPECT_EQ(s["fraction_within"], 1.0);

  const auto fan = run("fanout_sensitivity", {{"n", 500}, {"levels", {1, 4}}});
  EXPECT_EQ(fan["rows"].size(), 2u);
  EXPECT_GT(fan["summary"]["min_ratio"].get<double>(), 0);

  const auto rob = run("robustness", {{"shapes", {"star:4"}}, {"n", 500}, {"orders", 3}});
  EXPECT_EQ(rob["summary"].size(), 6u);

  const auto q = run("optimizer_quality", {{"trees", 5}, {"m_ranges", {{0.1, 0.5}}}});
  ASSERT_EQ(q["summary"].size(), 1u);
  EXPECT_GE(q["summary"][0]["median_survival"].get<double>(), 1.0 - 1e-12);

  EXPECT_THROW(run("unknown", nlohmann::json::object()), Error);
}

TEST(Experiments, ReproducibleExceptWallTime) {
  auto strip = [](nlohmann::json j) {
    for (auto& r : j["rows"]) r.erase("wall_seconds");
    return j;
  };
  const nlohmann::json p{{"shapes", {"path:4"}}, {"n", 400}, {"orders", 3}};
  EXPECT_EQ(strip(run("cost_validation", p)), strip(run("cost_validation", p)));
}

}  // namespace
}  // namespace mmjoin
