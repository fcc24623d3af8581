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

#include <fstream>
#include <random>

#include "mmjoin/catalog.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mmjoin_catalog_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

TEST(Csv, ParsesInt64Column) {
  std::map<std::string, Dictionary> dicts;
  const Relation r = parse_csv_relation({"R", {{"a", ColumnType::Int64}}}, "a\n1\n2\n2\n", dicts);
  EXPECT_EQ(r.row_count(), 3u);
  EXPECT_EQ(r.column("a").values, (std::vector<int64_t>{1, 2, 2}));
}

TEST(Csv, DictionaryEncodesFirstSeen) {
  std::map<std::string, Dictionary> dicts;
  const Relation r = parse_csv_relation({"R", {{"city", ColumnType::Utf8Dict}}}, "city\nx\ny\nx\n", dicts);
  EXPECT_EQ(r.column("city").values, (std::vector<int64_t>{0, 1, 0}));
  const Dictionary& d = dicts.at("R.city");
  EXPECT_EQ(d.find("x"), 0);
  EXPECT_EQ(d.find("y"), 1);
  EXPECT_EQ(d.decode(1), "y");
}

TEST(Csv, QuotedFieldsAndEmptyRelation) {
  std::map<std::string, Dictionary> dicts;
  const Relation r =
      parse_csv_relation({"R", {{"s", ColumnType::Utf8Dict}, {"k", ColumnType::Int64}}}, "s,k\n\"a,b\",3\n\"q\"\"\",4\n", dicts);
  EXPECT_EQ(dicts.at("R.s").decode(0), "a,b");
  EXPECT_EQ(dicts.at("R.s").decode(1), "q\"");
  const Relation e = parse_csv_relation({"E", {{"k", ColumnType::Int64}}}, "k\n", dicts);
  EXPECT_EQ(e.row_count(), 0u);
}

TEST(Csv, RejectsBadInput) {
  std::map<std::string, Dictionary> dicts;
  EXPECT_THROW(parse_csv_relation({"R", {{"a", ColumnType::Int64}}}, "b\n1\n", dicts), IngestError);
  EXPECT_THROW(parse_csv_relation({"R", {{"a", ColumnType::Int64}}}, "a\nx\n", dicts), IngestError);
  EXPECT_THROW(parse_csv_relation({"R", {{"a", ColumnType::Int64}}}, "a\n1,2\n", dicts), IngestError);
}

TEST(Ingest, DirectoryRowCountsMatchLineCounts) {
  const fs::path dir = scratch("ce");
  std::mt19937_64 rng(3);
  std::vector<RelationSchema> schema;
  for (int i = 0; i < 27; ++i) {
    const std::string name = "t" + std::to_string(i);
    schema.push_back({name, {{"id", ColumnType::Int64}, {"tag", ColumnType::Utf8Dict}}});
    std::ofstream os(dir / (name + ".csv"));
    os << "id,tag\n";
    const size_t rows = rng() % 40;
    for (size_t r = 0; r < rows; ++r) os << r << ",v" << (rng() % 5) << "\n";
  }
  const Catalog cat = ingest_directory(schema, dir);
  ASSERT_EQ(cat.relations().size(), 27u);
  for (const auto& s : schema) {
    // Independent scan: count newline-terminated lines minus the header.
    std::ifstream is(dir / (s.name + ".csv"));
    size_t lines = 0;
    std::string line;
    while (std::getline(is, line)) ++lines;
    EXPECT_EQ(cat.relation(s.name).row_count(), lines - 1) << s.name;
  }
}

TEST(Ingest, MissingFileFails) {
  const fs::path dir = scratch("missing");
  EXPECT_THROW(ingest_directory({{"nope", {{"a", ColumnType::Int64}}}}, dir), IngestError);
}

TEST(Ingest, SchemaJsonForms) {
  const auto s = parse_schema(R"({"R": [{"name": "a", "type": "int64"}, ["b", "utf8dict"]]})");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].columns[1].type, ColumnType::Utf8Dict);
  const auto back = parse_schema(schema_to_json(s));
  EXPECT_EQ(back[0].columns[0].name, "a");
  EXPECT_EQ(back[0].columns[1].type, ColumnType::Utf8Dict);
}

TEST(Ingest, WriteReadRoundTrip) {
  const fs::path src = scratch("rt_src");
  write(src / "R.csv", "k,city\n5,x\n6,y\n5,x\n");
  const std::vector<RelationSchema> schema{{"R", {{"k", ColumnType::Int64}, {"city", ColumnType::Utf8Dict}}}};
  const Catalog a = ingest_directory(schema, src);
  const fs::path out = scratch("rt_out");
  write_catalog(a, out);
  const Catalog b = read_catalog(out);
  EXPECT_EQ(b.relation("R").column("k").values, a.relation("R").column("k").values);
  const Column& city = b.relation("R").column("city");
  const Dictionary* d = b.dictionary("R", "city");
  ASSERT_NE(d, nullptr);
  EXPECT_EQ(d->decode(city.values[0]), "x");
  EXPECT_EQ(d->decode(city.values[1]), "y");
}

Relation numbers(size_t n) {
  Relation r("R");
  Column c{"a", ColumnType::Int64, {}};
  for (size_t i = 0; i < n; ++i) c.values.push_back(static_cast<int64_t>(i * 7 % 13));
  r.add_column(std::move(c));
  return r;
}

TEST(ChunkScan, SizesFollowChunkSize) {
  auto sizes = [](size_t rows, size_t chunk) {
    std::vector<size_t> out;
    for (const auto& c : chunk_scan(numbers(rows), chunk)) out.push_back(c.size());
    return out;
  };
  EXPECT_EQ(sizes(5, 5), (std::vector<size_t>{5}));
  EXPECT_EQ(sizes(5000, 2048), (std::vector<size_t>{2048, 2048, 904}));
  EXPECT_TRUE(sizes(0, 2048).empty());
}

TEST(ChunkScan, ConcatenationReproducesRelation) {
  const Relation r = numbers(1001);
  for (size_t chunk : {1u, 3u, 64u, 2048u}) {
    std::vector<int64_t> seen;
    ChunkScanner scan(r, chunk);
    DataChunk c;
    while (scan.next(c)) {
      EXPECT_EQ(c.offset, seen.size());
      seen.insert(seen.end(), c.columns[0].begin(), c.columns[0].end());
    }
    EXPECT_EQ(seen, r.column("a").values);
  }
}

TEST(Relation, ColumnLengthsMustAgree) {
  Relation r("R");
  r.add_column({"a", ColumnType::Int64, {1, 2}});
  EXPECT_THROW(r.add_column({"b", ColumnType::Int64, {1}}), IngestError);
  EXPECT_THROW(r.add_column({"a", ColumnType::Int64, {1, 2}}), IngestError);
}

}  // namespace
}  // namespace mmjoin
