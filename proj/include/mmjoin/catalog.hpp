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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmjoin {

inline constexpr size_t kDefaultChunkSize = 2048;

enum class ColumnType { Int64, Utf8Dict };

std::string_view to_string(ColumnType type);
ColumnType parse_column_type(std::string_view text);

/// Dense first-seen string <-> id mapping for one Utf8Dict column.
class Dictionary {
 public:
  int64_t encode(std::string_view value);
  const std::string& decode(int64_t id) const;
  std::optional<int64_t> find(std::string_view value) const;
  size_t size() const { return strings_.size(); }
  const std::vector<std::string>& strings() const { return strings_; }

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, int64_t> ids_;
};

struct Column {
  std::string name;
  ColumnType type = ColumnType::Int64;
  // Utf8Dict columns hold dictionary ids.
  std::vector<int64_t> values;
};

/// A base relation. Rows are addressed by their ordinal, which doubles as
/// the implicit row id.
class Relation {
 public:
  Relation() = default;
  explicit Relation(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  size_t row_count() const { return row_count_; }
  const std::vector<Column>& columns() const { return columns_; }

  /// Appends a column. The first column fixes row_count; later ones must match.
  void add_column(Column column);

  std::optional<size_t> column_index(std::string_view name) const;
  const Column& column(std::string_view name) const;
  const Column& column(size_t index) const { return columns_.at(index); }

 private:
  std::string name_;
  std::vector<Column> columns_;
  size_t row_count_ = 0;
};

/// Immutable once populated; safe to share between concurrent queries.
class Catalog {
 public:
  void add(Relation relation);
  bool contains(std::string_view name) const;
  const Relation& relation(std::string_view name) const;
  const std::map<std::string, Relation, std::less<>>& relations() const { return relations_; }

  void set_dictionary(const std::string& relation, const std::string& column, Dictionary dict);
  const Dictionary* dictionary(std::string_view relation, std::string_view column) const;
  const std::map<std::string, Dictionary, std::less<>>& dictionaries() const { return dictionaries_; }

 private:
  std::map<std::string, Relation, std::less<>> relations_;
  // keyed "relation.column"
  std::map<std::string, Dictionary, std::less<>> dictionaries_;
};

struct ColumnSchema {
  std::string name;
  ColumnType type = ColumnType::Int64;
};

struct RelationSchema {
  std::string name;
  std::vector<ColumnSchema> columns;
};

/// Parses `{"R": [{"name": "a", "type": "int64"}, ...], ...}`. Columns may
/// also be given as `["a", "int64"]` pairs.
std::vector<RelationSchema> parse_schema(std::string_view json_text);
std::vector<RelationSchema> load_schema(const std::filesystem::path& path);
std::string schema_to_json(const std::vector<RelationSchema>& schema);
std::vector<RelationSchema> schema_of(const Catalog& catalog);

/// Parses one relation from CSV text with a header row.
Relation parse_csv_relation(const RelationSchema& schema, std::string_view text,
                            std::map<std::string, Dictionary>& dictionaries);

Catalog ingest_csv(const std::vector<RelationSchema>& schema,
                   const std::map<std::string, std::filesystem::path>& files);

/// Ingests every relation of `schema` from `<dir>/<name>.csv`.
Catalog ingest_directory(const std::vector<RelationSchema>& schema,
                         const std::filesystem::path& dir);

/// Writes `<dir>/schema.json`, one CSV per relation (dictionary columns
/// decoded back to strings).
void write_catalog(const Catalog& catalog, const std::filesystem::path& dir);
Catalog read_catalog(const std::filesystem::path& dir);

/// A batch of rows. Columns share one length; the optional selection holds
/// one flag per row.
struct DataChunk {
  std::vector<std::vector<int64_t>> columns;
  std::optional<std::vector<uint8_t>> selection;
  size_t size() const { return columns.empty() ? row_count : columns.front().size(); }
  size_t row_count = 0;
  // Ordinal of the first row in the source relation.
  size_t offset = 0;
};

/// Sequential chunked scan over a relation.
class ChunkScanner {
 public:
  ChunkScanner(const Relation& relation, size_t chunk_size);
  bool next(DataChunk& chunk);

 private:
  const Relation* relation_;
  size_t chunk_size_;
  size_t position_ = 0;
};

std::vector<DataChunk> chunk_scan(const Relation& relation, size_t chunk_size);

}  // namespace mmjoin
