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

#include "mmjoin/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

using nlohmann::json;

const char* to_string(QueryErrorCode code) {
  switch (code) {
    case QueryErrorCode::CyclicQuery:
      return "CyclicQuery";
    case QueryErrorCode::DisconnectedQuery:
      return "DisconnectedQuery";
    case QueryErrorCode::UnknownRelation:
      return "UnknownRelation";
    case QueryErrorCode::UnknownAttribute:
      return "UnknownAttribute";
    case QueryErrorCode::InvalidPrefix:
      return "InvalidPrefix";
    case QueryErrorCode::InvalidPlan:
      return "InvalidPlan";
  }
  return "QueryError";
}

std::string_view to_string(ColumnType type) {
  return type == ColumnType::Int64 ? "int64" : "utf8dict";
}

ColumnType parse_column_type(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "int64" || lower == "int" || lower == "integer") return ColumnType::Int64;
  if (lower == "utf8dict" || lower == "utf8" || lower == "string") return ColumnType::Utf8Dict;
  throw IngestError("unknown column type '" + std::string(text) + "'");
}

int64_t Dictionary::encode(std::string_view value) {
  auto it = ids_.find(std::string(value));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<int64_t>(strings_.size());
  strings_.emplace_back(value);
  ids_.emplace(strings_.back(), id);
  return id;
}

const std::string& Dictionary::decode(int64_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= strings_.size()) {
    throw Error("dictionary id " + std::to_string(id) + " out of range");
  }
  return strings_[static_cast<size_t>(id)];
}

std::optional<int64_t> Dictionary::find(std::string_view value) const {
  auto it = ids_.find(std::string(value));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void Relation::add_column(Column column) {
  if (column_index(column.name)) {
    throw IngestError("duplicate column '" + column.name + "' in relation '" + name_ + "'");
  }
  if (columns_.empty()) {
    row_count_ = column.values.size();
  } else if (column.values.size() != row_count_) {
    throw IngestError("column '" + column.name + "' of '" + name_ + "' has " +
                      std::to_string(column.values.size()) + " values, expected " +
                      std::to_string(row_count_));
  }
  columns_.push_back(std::move(column));
}

std::optional<size_t> Relation::column_index(std::string_view name) const {
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

const Column& Relation::column(std::string_view name) const {
  auto idx = column_index(name);
  if (!idx) throw Error("relation '" + name_ + "' has no column '" + std::string(name) + "'");
  return columns_[*idx];
}

void Catalog::add(Relation relation) {
  if (contains(relation.name())) throw IngestError("duplicate relation '" + relation.name() + "'");
  auto name = relation.name();
  relations_.emplace(std::move(name), std::move(relation));
}

bool Catalog::contains(std::string_view name) const { return relations_.find(name) != relations_.end(); }

const Relation& Catalog::relation(std::string_view name) const {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw Error("unknown relation '" + std::string(name) + "'");
  return it->second;
}

void Catalog::set_dictionary(const std::string& relation, const std::string& column, Dictionary dict) {
  dictionaries_[relation + "." + column] = std::move(dict);
}

const Dictionary* Catalog::dictionary(std::string_view relation, std::string_view column) const {
  std::string key(relation);
  key += '.';
  key += column;
  auto it = dictionaries_.find(key);
  return it == dictionaries_.end() ? nullptr : &it->second;
}

namespace {

std::vector<ColumnSchema> parse_columns(const json& cols, const std::string& relation) {
  if (!cols.is_array()) throw IngestError("schema for '" + relation + "' must be a list of columns");
  std::vector<ColumnSchema> out;
  for (const auto& c : cols) {
    ColumnSchema cs;
    if (c.is_object()) {
      cs.name = c.at("name").get<std::string>();
      cs.type = parse_column_type(c.value("type", std::string("int64")));
    } else if (c.is_array() && c.size() == 2) {
      cs.name = c[0].get<std::string>();
      cs.type = parse_column_type(c[1].get<std::string>());
    } else if (c.is_string()) {
      cs.name = c.get<std::string>();
    } else {
      throw IngestError("malformed column entry in schema for '" + relation + "'");
    }
    out.push_back(std::move(cs));
  }
  return out;
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<RelationSchema> parse_schema(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw IngestError(std::string("schema is not valid JSON: ") + e.what());
  }
  std::vector<RelationSchema> out;
  if (doc.is_object() && doc.contains("relations") && doc["relations"].is_array()) {
    for (const auto& r : doc["relations"]) {
      RelationSchema rs;
      rs.name = r.at("name").get<std::string>();
      rs.columns = parse_columns(r.at("columns"), rs.name);
      out.push_back(std::move(rs));
    }
    return out;
  }
  if (!doc.is_object()) throw IngestError("schema must be a JSON object");
  for (const auto& [name, cols] : doc.items()) {
    out.push_back(RelationSchema{name, parse_columns(cols, name)});
  }
  return out;
}

std::vector<RelationSchema> load_schema(const std::filesystem::path& path) {
  return parse_schema(read_file(path));
}

std::string schema_to_json(const std::vector<RelationSchema>& schema) {
  json rels = json::array();
  for (const auto& r : schema) {
    json cols = json::array();
    for (const auto& c : r.columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    rels.push_back({{"name", r.name}, {"columns", cols}});
  }
  return json{{"relations", rels}}.dump(2);
}

std::vector<RelationSchema> schema_of(const Catalog& catalog) {
  std::vector<RelationSchema> out;
  for (const auto& [name, rel] : catalog.relations()) {
    RelationSchema rs{name, {}};
    for (const auto& c : rel.columns()) rs.columns.push_back({c.name, c.type});
    out.push_back(std::move(rs));
  }
  return out;
}

Relation parse_csv_relation(const RelationSchema& schema, std::string_view text,
                            std::map<std::string, Dictionary>& dictionaries) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw IngestError("relation '" + schema.name + "': missing header row");

  const auto header = split_record(lines.front());
  if (header.size() != schema.columns.size()) {
    throw IngestError("relation '" + schema.name + "': header has " + std::to_string(header.size()) +
                      " columns, schema has " + std::to_string(schema.columns.size()));
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema.columns[c].name) {
      throw IngestError("relation '" + schema.name + "': header column '" + header[c] +
                        "' does not match schema column '" + schema.columns[c].name + "'");
    }
  }

  const size_t rows = lines.size() - 1;
  std::vector<Column> columns;
  for (const auto& cs : schema.columns) {
    Column col{cs.name, cs.type, {}};
    col.values.reserve(rows);
    columns.push_back(std::move(col));
  }
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_record(lines[r]);
    if (fields.size() != columns.size()) {
      throw IngestError("relation '" + schema.name + "', line " + std::to_string(r + 1) + ": expected " +
                        std::to_string(columns.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (size_t c = 0; c < columns.size(); ++c) {
      const auto& f = fields[c];
      if (columns[c].type == ColumnType::Int64) {
        int64_t v = 0;
        const auto* first = f.data();
        const auto* last = f.data() + f.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (f.empty() || ec != std::errc() || ptr != last) {
          throw IngestError("relation '" + schema.name + "', line " + std::to_string(r + 1) + ", column '" +
                            columns[c].name + "': '" + f + "' is not an Int64 value");
        }
        columns[c].values.push_back(v);
      } else {
        auto& dict = dictionaries[schema.name + "." + columns[c].name];
        columns[c].values.push_back(dict.encode(f));
      }
    }
  }
  Relation rel(schema.name);
  for (auto& c : columns) rel.add_column(std::move(c));
  return rel;
}

Catalog ingest_csv(const std::vector<RelationSchema>& schema,
                   const std::map<std::string, std::filesystem::path>& files) {
  Catalog catalog;
  for (const auto& rs : schema) {
    auto it = files.find(rs.name);
    if (it == files.end()) throw IngestError("no file given for relation '" + rs.name + "'");
    if (!std::filesystem::exists(it->second)) {
      throw IngestError("missing file '" + it->second.string() + "' for relation '" + rs.name + "'");
    }
    std::map<std::string, Dictionary> dicts;
    catalog.add(parse_csv_relation(rs, read_file(it->second), dicts));
    for (auto& [key, dict] : dicts) {
      const auto col = key.substr(rs.name.size() + 1);
      catalog.set_dictionary(rs.name, col, std::move(dict));
    }
    // All-empty Utf8Dict columns still get an (empty) dictionary.
    for (const auto& cs : rs.columns) {
      if (cs.type == ColumnType::Utf8Dict && catalog.dictionary(rs.name, cs.name) == nullptr) {
        catalog.set_dictionary(rs.name, cs.name, Dictionary{});
      }
    }
  }
  return catalog;
}

Catalog ingest_directory(const std::vector<RelationSchema>& schema, const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> files;
  for (const auto& rs : schema) files[rs.name] = dir / (rs.name + ".csv");
  return ingest_csv(schema, files);
}

void write_catalog(const Catalog& catalog, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "schema.json");
    out << schema_to_json(schema_of(catalog)) << "\n";
  }
  for (const auto& [name, rel] : catalog.relations()) {
    std::ofstream out(dir / (name + ".csv"));
    if (!out) throw Error("cannot write '" + (dir / (name + ".csv")).string() + "'");
    for (size_t c = 0; c < rel.columns().size(); ++c) {
      if (c) out << ',';
      out << quote_field(rel.columns()[c].name);
    }
    out << '\n';
    std::vector<const Dictionary*> dicts;
    for (const auto& col : rel.columns()) dicts.push_back(catalog.dictionary(name, col.name));
    for (size_t r = 0; r < rel.row_count(); ++r) {
      for (size_t c = 0; c < rel.columns().size(); ++c) {
        if (c) out << ',';
        const auto& col = rel.columns()[c];
        if (col.type == ColumnType::Utf8Dict && dicts[c] != nullptr) {
          out << quote_field(dicts[c]->decode(col.values[r]));
        } else {
          out << col.values[r];
        }
      }
      out << '\n';
    }
  }
}

Catalog read_catalog(const std::filesystem::path& dir) {
  return ingest_directory(load_schema(dir / "schema.json"), dir);
}

ChunkScanner::ChunkScanner(const Relation& relation, size_t chunk_size)
    : relation_(&relation), chunk_size_(chunk_size) {
  if (chunk_size_ == 0) throw Error("chunk_size must be at least 1");
}

bool ChunkScanner::next(DataChunk& chunk) {
  const size_t rows = relation_->row_count();
  if (position_ >= rows) return false;
  const size_t n = std::min(chunk_size_, rows - position_);
  chunk.columns.clear();
  chunk.selection.reset();
  for (const auto& col : relation_->columns()) {
    chunk.columns.emplace_back(col.values.begin() + static_cast<std::ptrdiff_t>(position_),
                               col.values.begin() + static_cast<std::ptrdiff_t>(position_ + n));
  }
  chunk.row_count = n;
  chunk.offset = position_;
  position_ += n;
  return true;
}

std::vector<DataChunk> chunk_scan(const Relation& relation, size_t chunk_size) {
  std::vector<DataChunk> out;
  ChunkScanner scanner(relation, chunk_size);
  DataChunk chunk;
  while (scanner.next(chunk)) out.push_back(chunk);
  return out;
}

}  // namespace mmjoin
