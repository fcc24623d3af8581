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
#include <numeric>
#include <random>
#include <sstream>

#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/json_io.hpp"

namespace mmjoin {

namespace {

constexpr size_t kMaxGeneratedRows = 50'000'000;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<double> parse_numbers(std::string_view text, const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::istringstream is{std::string(text)};
  while (std::getline(is, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error("bad number '" + item + "' in " + what);
    }
  }
  return out;
}

std::pair<std::string, std::vector<double>> split_spec(std::string_view text, const std::string& what) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return {"", parse_numbers(text, what)};
  return {lower(text.substr(0, colon)), parse_numbers(text.substr(colon + 1), what)};
}

size_t as_count(double v, const std::string& what) {
  if (!(v >= 1) || v != std::floor(v)) throw Error(what + " needs positive integer arguments");
  return static_cast<size_t>(v);
}

std::string node_name(size_t i) { return "R" + std::to_string(i + 1); }

}  // namespace

Shape parse_shape(std::string_view text) {
  const auto [kind, args] = split_spec(text, "shape");
  Shape s;
  if (kind == "star" || kind == "path" || kind == "random") {
    if (args.size() != 1) throw Error("shape '" + std::string(text) + "' takes one argument");
    s.kind = kind == "star" ? ShapeKind::Star : kind == "path" ? ShapeKind::Path : ShapeKind::RandomTree;
    s.a = as_count(args[0], "shape");
    if (s.a < 2) throw Error("shape needs at least two relations");
  } else if (kind == "snowflake") {
    if (args.size() != 2) throw Error("snowflake takes two arguments");
    s.kind = ShapeKind::Snowflake;
    s.a = as_count(args[0], "snowflake");
    s.b = as_count(args[1], "snowflake");
  } else {
    throw Error("unknown shape '" + std::string(text) + "'");
  }
  return s;
}

std::string to_string(const Shape& shape) {
  switch (shape.kind) {
    case ShapeKind::Star:
      return "star:" + std::to_string(shape.a);
    case ShapeKind::Path:
      return "path:" + std::to_string(shape.a);
    case ShapeKind::Snowflake:
      return "snowflake:" + std::to_string(shape.a) + "," + std::to_string(shape.b);
    case ShapeKind::RandomTree:
      return "random:" + std::to_string(shape.a);
  }
  return "?";
}

FanoutSpec parse_fanout(std::string_view text) {
  auto [kind, args] = split_spec(text, "fanout");
  FanoutSpec f;
  if (kind.empty() || kind == "constant" || kind == "const") {
    if (args.size() != 1) throw Error("constant fanout takes one argument");
    f.kind = FanoutSpec::Kind::Constant;
    f.a = args[0];
  } else if (kind == "uniform") {
    if (args.size() != 2 || args[1] < args[0]) throw Error("uniform fanout takes lo,hi");
    f.kind = FanoutSpec::Kind::Uniform;
    f.a = args[0];
    f.b = args[1];
  } else if (kind == "normal") {
    if (args.size() != 2 || args[1] < 0) throw Error("normal fanout takes mean,variance");
    f.kind = FanoutSpec::Kind::Normal;
    f.a = args[0];
    f.b = args[1];
  } else if (kind == "exponential" || kind == "exp") {
    if (args.size() != 1) throw Error("exponential fanout takes a mean");
    f.kind = FanoutSpec::Kind::Exponential;
    f.a = args[0];
  } else {
    throw Error("unknown fanout '" + std::string(text) + "'");
  }
  if (f.a < 1) throw Error("fanout values must be >= 1");
  return f;
}

std::string to_string(const FanoutSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case FanoutSpec::Kind::Constant:
      os << "constant:" << spec.a;
      break;
    case FanoutSpec::Kind::Uniform:
      os << "uniform:" << spec.a << "," << spec.b;
      break;
    case FanoutSpec::Kind::Normal:
      os << "normal:" << spec.a << "," << spec.b;
      break;
    case FanoutSpec::Kind::Exponential:
      os << "exponential:" << spec.a;
      break;
  }
  return os.str();
}

TreeSpec make_tree_spec(const Shape& shape, uint64_t seed) {
  TreeSpec t;
  auto add = [&](std::string name, int parent) {
    t.names.push_back(std::move(name));
    t.parent.push_back(parent);
  };
  switch (shape.kind) {
    case ShapeKind::Star:
      for (size_t i = 0; i < shape.a; ++i) add(node_name(i), i == 0 ? -1 : 0);
      break;
    case ShapeKind::Path: {
      // Names follow path position; the driver sits in the middle.
      const size_t k = shape.a;
      const size_t centre = (k - 1) / 2;
      add(node_name(centre), -1);
      int left = 0;
      int right = 0;
      for (size_t step = 1; step < k; ++step) {
        if (centre >= step) {
          add(node_name(centre - step), left);
          left = static_cast<int>(t.names.size()) - 1;
        }
        if (centre + step < k) {
          add(node_name(centre + step), right);
          right = static_cast<int>(t.names.size()) - 1;
        }
      }
      break;
    }
    case ShapeKind::Snowflake: {
      add(node_name(0), -1);
      for (size_t i = 0; i < shape.a; ++i) add(node_name(1 + i), 0);
      for (size_t i = 0; i < shape.a; ++i) {
        for (size_t j = 0; j < shape.b; ++j) add(node_name(1 + shape.a + i * shape.b + j), static_cast<int>(1 + i));
      }
      break;
    }
    case ShapeKind::RandomTree: {
      std::mt19937_64 rng(seed);
      add(node_name(0), -1);
      for (size_t i = 1; i < shape.a; ++i) {
        std::uniform_int_distribution<size_t> pick(0, i - 1);
        add(node_name(i), static_cast<int>(pick(rng)));
      }
      break;
    }
  }
  t.m.assign(t.names.size(), 1.0);
  t.fanout.assign(t.names.size(), FanoutSpec{});
  return t;
}

namespace {

// Copies per chosen key. Constant fanouts alternate floor and ceil so the
// total is round(fo * keys).
std::vector<size_t> draw_copies(const FanoutSpec& f, size_t keys, std::mt19937_64& rng) {
  std::vector<size_t> copies(keys, 1);
  switch (f.kind) {
    case FanoutSpec::Kind::Constant:
    case FanoutSpec::Kind::Uniform: {
      const double fo = f.a;
      const auto lo = static_cast<size_t>(std::floor(fo));
      const auto total = static_cast<size_t>(std::llround(fo * static_cast<double>(keys)));
      const size_t extra = std::min(keys, total - std::min(total, lo * keys));
      for (size_t i = 0; i < keys; ++i) copies[i] = lo + (i < extra ? 1 : 0);
      std::shuffle(copies.begin(), copies.end(), rng);
      break;
    }
    case FanoutSpec::Kind::Normal: {
      const double mu = f.a;
      std::normal_distribution<double> dist(mu, std::sqrt(f.b));
      const double hi = std::max(1.0, 2 * mu - 1);
      for (auto& c : copies) {
        double x = mu;
        if (f.b > 0) {
          do x = dist(rng);
          while (x < 1 || x > hi);
        }
        c = std::max<size_t>(1, static_cast<size_t>(std::llround(x)));
      }
      break;
    }
    case FanoutSpec::Kind::Exponential: {
      std::exponential_distribution<double> dist(1.0 / f.a);
      for (auto& c : copies) c = std::max<size_t>(1, static_cast<size_t>(std::llround(dist(rng))));
      break;
    }
  }
  return copies;
}

double fanout_mean(const FanoutSpec& f) { return f.a; }

}  // namespace

GeneratedInstance generate_tree(const TreeSpec& spec, size_t n, uint64_t seed) {
  const size_t k = spec.names.size();
  if (k == 0 || spec.parent.size() != k || spec.m.size() != k || spec.fanout.size() != k) {
    throw GeneratorError("malformed tree spec");
  }
  if (n == 0) throw GeneratorError("driver size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<size_t>> children(k);
  for (size_t i = 1; i < k; ++i) {
    if (spec.parent[i] < 0 || static_cast<size_t>(spec.parent[i]) >= i) throw GeneratorError("parents must precede children");
    children[static_cast<size_t>(spec.parent[i])].push_back(i);
  }
  if (spec.parent[0] != -1) throw GeneratorError("index 0 must be the driver");

  // own_key[i] holds the values of i's column joining its parent.
  std::vector<std::vector<int64_t>> own_key(k);
  std::vector<size_t> rows(k, 0);
  rows[0] = n;
  size_t total = n;
  for (size_t i = 1; i < k; ++i) {
    const size_t v = rows[static_cast<size_t>(spec.parent[i])];
    const double m = spec.m[i];
    if (!(m > 0 && m <= 1)) throw GeneratorError("match probability of " + spec.names[i] + " must lie in (0,1]");
    const auto keys = static_cast<size_t>(std::llround(m * static_cast<double>(v)));
    if (keys < 1) throw GeneratorError("m * V < 1 for " + spec.names[i]);
    std::vector<int64_t> domain(v);
    std::iota(domain.begin(), domain.end(), 0);
    for (size_t j = 0; j < keys; ++j) {
      std::uniform_int_distribution<size_t> pick(j, v - 1);
      std::swap(domain[j], domain[pick(rng)]);
    }
    const auto copies = draw_copies(spec.fanout[i], keys, rng);
    auto& col = own_key[i];
    for (size_t j = 0; j < keys; ++j) col.insert(col.end(), copies[j], domain[j]);
    std::shuffle(col.begin(), col.end(), rng);
    rows[i] = col.size();
    total += rows[i];
    if (total > kMaxGeneratedRows) throw GeneratorError("instance exceeds " + std::to_string(kMaxGeneratedRows) + " rows");
  }

  GeneratedInstance inst;
  inst.seed = seed;
  inst.driver = spec.names[0];
  for (size_t i = 0; i < k; ++i) {
    Relation rel(spec.names[i]);
    Column id{"id", ColumnType::Int64, {}};
    id.values.resize(rows[i]);
    std::iota(id.values.begin(), id.values.end(), 0);
    rel.add_column(std::move(id));
    if (i != 0) rel.add_column(Column{"k_" + spec.names[i], ColumnType::Int64, std::move(own_key[i])});
    for (size_t c : children[i]) {
      Column key{"k_" + spec.names[c], ColumnType::Int64, {}};
      key.values.resize(rows[i]);
      std::iota(key.values.begin(), key.values.end(), 0);
      std::shuffle(key.values.begin(), key.values.end(), rng);
      rel.add_column(std::move(key));
    }
    inst.catalog.add(std::move(rel));
  }
  std::vector<EdgeSpec> edges;
  for (size_t i = 1; i < k; ++i) {
    const auto& p = spec.names[static_cast<size_t>(spec.parent[i])];
    edges.push_back({p, "k_" + spec.names[i], spec.names[i], "k_" + spec.names[i]});
    inst.targets.set(p, spec.names[i], {spec.m[i], fanout_mean(spec.fanout[i])});
  }
  inst.query = QuerySpec::from_names(spec.names, std::move(edges));
  inst.query.driver = spec.names[0];
  const JoinGraph graph = validate_query(inst.query, inst.catalog);
  inst.stats = estimate_stats(inst.catalog, graph, {});
  return inst;
}

GeneratedInstance gen_synthetic(const ShapeSpec& spec) {
  if (!(spec.m_lo > 0) || spec.m_hi > 1 || spec.m_lo > spec.m_hi) throw GeneratorError("m range must lie in (0,1]");
  TreeSpec t = make_tree_spec(spec.shape, spec.seed);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> mdist(spec.m_lo, spec.m_hi);
  for (size_t i = 1; i < t.names.size(); ++i) {
    t.m[i] = spec.m_lo == spec.m_hi ? spec.m_lo : mdist(rng);
    FanoutSpec f = spec.fanout;
    if (f.kind == FanoutSpec::Kind::Uniform) {
      f.a = f.a == f.b ? f.a : std::uniform_real_distribution<double>(spec.fanout.a, spec.fanout.b)(rng);
      f.b = f.a;
    }
    t.fanout[i] = f;
  }
  return generate_tree(t, spec.n, spec.seed);
}

GeneratedInstance gen_random_small(uint64_t seed, size_t max_relations, size_t max_rows) {
  if (max_relations < 2) throw GeneratorError("need at least two relations");
  std::mt19937_64 rng(seed);
  auto uniform = [&](size_t lo, size_t hi) { return std::uniform_int_distribution<size_t>(lo, hi)(rng); };
  const size_t k = uniform(2, max_relations);
  std::vector<size_t> parent(k, 0);
  for (size_t i = 1; i < k; ++i) parent[i] = uniform(0, i - 1);
  std::vector<size_t> rows(k);
  for (auto& r : rows) r = uniform(0, 19) == 0 ? 0 : uniform(1, max_rows);

  std::vector<Relation> rels;
  for (size_t i = 0; i < k; ++i) {
    rels.emplace_back(node_name(i));
    Column id{"id", ColumnType::Int64, std::vector<int64_t>(rows[i])};
    std::iota(id.values.begin(), id.values.end(), 0);
    rels[i].add_column(std::move(id));
  }
  auto fill = [&](size_t rel, const std::string& name, int64_t domain) {
    Column c{name, ColumnType::Int64, std::vector<int64_t>(rows[rel])};
    std::uniform_int_distribution<int64_t> d(0, domain - 1);
    for (auto& v : c.values) v = d(rng);
    rels[rel].add_column(std::move(c));
  };
  std::vector<EdgeSpec> edges;
  for (size_t i = 1; i < k; ++i) {
    const auto p = parent[i];
    const auto key = "k_" + node_name(i);
    const auto domain = static_cast<int64_t>(uniform(1, 8));
    const int64_t shift = static_cast<int64_t>(uniform(0, 3)) - 1;
    fill(p, key, domain);
    fill(i, key, std::max<int64_t>(1, domain + shift));
    edges.push_back({node_name(p), key, node_name(i), key});
    if (uniform(0, 3) == 0) {
      const auto key2 = "k2_" + node_name(i);
      fill(p, key2, 2);
      fill(i, key2, 2);
      edges.push_back({node_name(p), key2, node_name(i), key2});
    }
  }
  GeneratedInstance inst;
  inst.seed = seed;
  std::vector<std::string> names;
  for (auto& r : rels) {
    names.push_back(r.name());
    inst.catalog.add(std::move(r));
  }
  inst.query = QuerySpec::from_names(names, std::move(edges));
  inst.driver = names[uniform(0, k - 1)];
  inst.query.driver = inst.driver;
  const JoinGraph graph = validate_query(inst.query, inst.catalog);
  inst.stats = estimate_stats(inst.catalog, graph, {});
  return inst;
}

std::vector<NodeId> random_order(const JoinTree& tree, uint64_t seed) {
  std::mt19937_64 rng(seed);
  NodeSet placed;
  std::vector<NodeId> order;
  while (order.size() + 1 < tree.size()) {
    const auto cand = eligible_next(tree, placed);
    const NodeId next = cand[std::uniform_int_distribution<size_t>(0, cand.size() - 1)(rng)];
    placed.insert(next);
    order.push_back(next);
  }
  return order;
}

void write_instance(const GeneratedInstance& inst, const std::filesystem::path& dir) {
  write_catalog(inst.catalog, dir);
  write_text_file(dir / "query.json", query_to_json(inst.query).dump(2) + "\n");
  write_text_file(dir / "stats.json", stats_to_json(inst.stats));
  write_text_file(dir / "targets.json", stats_to_json(inst.targets));
  ojson meta{{"schema_version", kSchemaVersion}, {"driver", inst.driver}, {"seed", inst.seed}};
  write_text_file(dir / "instance.json", meta.dump(2) + "\n");
}

}  // namespace mmjoin
