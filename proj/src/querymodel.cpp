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

#include "mmjoin/querymodel.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "mmjoin/catalog.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

QuerySpec QuerySpec::from_names(std::vector<std::string> names, std::vector<EdgeSpec> edges) {
  QuerySpec spec;
  for (auto& n : names) spec.relations.push_back({n, n});
  spec.edges = std::move(edges);
  return spec;
}

std::optional<NodeId> JoinGraph::find(std::string_view name) const {
  for (NodeId i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

NodeId JoinGraph::id_of(std::string_view name) const {
  auto id = find(name);
  if (!id) throw QueryError(QueryErrorCode::UnknownRelation, std::string(name));
  return *id;
}

namespace {

struct UnionFind {
  std::vector<NodeId> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  NodeId find(NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(NodeId a, NodeId b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace

JoinGraph build_join_graph(const QuerySpec& spec) {
  JoinGraph g;
  if (spec.relations.empty()) throw QueryError(QueryErrorCode::DisconnectedQuery, "query has no relations");
  if (spec.relations.size() > kMaxNodes) {
    throw TooManyRelations("query has " + std::to_string(spec.relations.size()) + " relations; limit is " +
                           std::to_string(kMaxNodes));
  }
  for (const auto& r : spec.relations) {
    if (r.alias.empty()) throw QueryError(QueryErrorCode::UnknownRelation, "empty relation alias");
    if (g.find(r.alias)) throw QueryError(QueryErrorCode::InvalidPlan, "duplicate alias " + r.alias);
    g.names_.push_back(r.alias);
    g.bases_.push_back(r.base.empty() ? r.alias : r.base);
  }
  g.adjacency_.resize(g.names_.size());

  std::map<std::pair<NodeId, NodeId>, size_t> pair_edge;
  for (const auto& e : spec.edges) {
    const NodeId a = g.id_of(e.left);
    const NodeId b = g.id_of(e.right);
    if (e.left_attr.empty() || e.right_attr.empty()) {
      throw QueryError(QueryErrorCode::UnknownAttribute, "empty join attribute on " + e.left + "-" + e.right);
    }
    if (a == b) throw QueryError(QueryErrorCode::CyclicQuery, "self-loop on " + e.left);
    const auto key = std::minmax(a, b);
    auto it = pair_edge.find({key.first, key.second});
    if (it == pair_edge.end()) {
      pair_edge.emplace(std::pair{key.first, key.second}, g.edges_.size());
      GraphEdge ge;
      ge.a = a;
      ge.b = b;
      ge.attrs_a.push_back(e.left_attr);
      ge.attrs_b.push_back(e.right_attr);
      g.edges_.push_back(std::move(ge));
    } else {
      GraphEdge& ge = g.edges_[it->second];
      if (ge.a == a) {
        ge.attrs_a.push_back(e.left_attr);
        ge.attrs_b.push_back(e.right_attr);
      } else {
        ge.attrs_a.push_back(e.right_attr);
        ge.attrs_b.push_back(e.left_attr);
      }
    }
  }

  UnionFind uf(g.names_.size());
  for (size_t i = 0; i < g.edges_.size(); ++i) {
    const auto& ge = g.edges_[i];
    if (!uf.unite(ge.a, ge.b)) {
      throw QueryError(QueryErrorCode::CyclicQuery,
                       "edge " + g.names_[ge.a] + "-" + g.names_[ge.b] + " closes a cycle");
    }
    g.adjacency_[ge.a].emplace_back(ge.b, i);
    g.adjacency_[ge.b].emplace_back(ge.a, i);
  }
  for (NodeId i = 1; i < g.names_.size(); ++i) {
    if (uf.find(i) != uf.find(0)) {
      throw QueryError(QueryErrorCode::DisconnectedQuery, g.names_[i] + " is not connected to " + g.names_[0]);
    }
  }
  if (spec.driver) {
    g.id_of(*spec.driver);
    g.driver_ = spec.driver;
  }
  return g;
}

JoinGraph validate_query(const QuerySpec& spec, const Catalog& catalog) {
  for (const auto& r : spec.relations) {
    const std::string& base = r.base.empty() ? r.alias : r.base;
    if (!catalog.contains(base)) throw QueryError(QueryErrorCode::UnknownRelation, base);
  }
  JoinGraph g = build_join_graph(spec);
  for (const auto& ge : g.edges()) {
    const Relation& ra = catalog.relation(g.base(ge.a));
    const Relation& rb = catalog.relation(g.base(ge.b));
    for (const auto& a : ge.attrs_a) {
      if (!ra.column_index(a)) throw QueryError(QueryErrorCode::UnknownAttribute, g.name(ge.a) + "." + a);
    }
    for (const auto& b : ge.attrs_b) {
      if (!rb.column_index(b)) throw QueryError(QueryErrorCode::UnknownAttribute, g.name(ge.b) + "." + b);
    }
  }
  return g;
}

std::vector<NodeId> JoinTree::postorder() const {
  std::vector<NodeId> out(preorder_.rbegin(), preorder_.rend());
  return out;
}

std::optional<NodeId> JoinTree::find(std::string_view name) const {
  for (NodeId i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

NodeId JoinTree::id_of(std::string_view name) const {
  auto id = find(name);
  if (!id) throw QueryError(QueryErrorCode::UnknownRelation, std::string(name));
  return *id;
}

bool JoinTree::is_ancestor(NodeId ancestor, NodeId n) const {
  for (NodeId v = n; v != kNoNode; v = parent_[v]) {
    if (v == ancestor) return true;
  }
  return false;
}

JoinTree root_at(const JoinGraph& graph, NodeId driver) {
  const size_t n = graph.size();
  if (driver >= n) throw QueryError(QueryErrorCode::UnknownRelation, "driver id " + std::to_string(driver));
  JoinTree t;
  t.names_ = graph.names();
  t.bases_.resize(n);
  for (NodeId i = 0; i < n; ++i) t.bases_[i] = graph.base(i);
  t.root_ = driver;
  t.parent_.assign(n, kNoNode);
  t.children_.assign(n, {});
  t.parent_attrs_.assign(n, {});
  t.child_attrs_.assign(n, {});
  t.depth_.assign(n, 0);

  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{driver};
  seen[driver] = true;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    t.preorder_.push_back(v);
    // Reverse so the first-listed neighbour is visited first.
    const auto& adj = graph.neighbours(v);
    for (auto it = adj.rbegin(); it != adj.rend(); ++it) {
      const auto [u, ei] = *it;
      if (seen[u]) continue;
      seen[u] = true;
      t.parent_[u] = v;
      t.depth_[u] = t.depth_[v] + 1;
      const GraphEdge& e = graph.edges()[ei];
      if (e.a == v) {
        t.parent_attrs_[u] = e.attrs_a;
        t.child_attrs_[u] = e.attrs_b;
      } else {
        t.parent_attrs_[u] = e.attrs_b;
        t.child_attrs_[u] = e.attrs_a;
      }
      stack.push_back(u);
    }
    for (const auto& [u, ei] : adj) {
      if (t.parent_[u] == v) t.children_[v].push_back(u);
    }
  }
  return t;
}

JoinTree root_at(const JoinGraph& graph, std::string_view driver) { return root_at(graph, graph.id_of(driver)); }

std::vector<NodeId> eligible_next(const JoinTree& tree, const NodeSet& placed) {
  if (placed.contains(tree.root())) {
    throw QueryError(QueryErrorCode::InvalidPrefix, "prefix contains the driver " + tree.name(tree.root()));
  }
  placed.for_each([&](NodeId v) {
    if (v >= tree.size()) throw QueryError(QueryErrorCode::InvalidPrefix, "node id out of range");
    const NodeId p = tree.parent(v);
    if (p != tree.root() && !placed.contains(p)) {
      throw QueryError(QueryErrorCode::InvalidPrefix, tree.name(v) + " placed before its parent " + tree.name(p));
    }
  });
  std::vector<NodeId> out;
  for (NodeId v = 0; v < tree.size(); ++v) {
    if (v == tree.root() || placed.contains(v)) continue;
    const NodeId p = tree.parent(v);
    if (p == tree.root() || placed.contains(p)) out.push_back(v);
  }
  return out;
}

bool is_valid_order(const JoinTree& tree, std::span<const NodeId> order) {
  if (order.size() + 1 != tree.size()) return false;
  NodeSet placed;
  placed.insert(tree.root());
  for (NodeId v : order) {
    if (v >= tree.size() || placed.contains(v)) return false;
    if (!placed.contains(tree.parent(v))) return false;
    placed.insert(v);
  }
  return true;
}

void enumerate_orders(const JoinTree& tree, const std::function<bool(const std::vector<NodeId>&)>& visit) {
  std::vector<NodeId> order;
  std::vector<NodeId> frontier(tree.children(tree.root()).begin(), tree.children(tree.root()).end());
  bool stop = false;
  std::function<void()> rec = [&]() {
    if (stop) return;
    if (frontier.empty()) {
      if (order.size() + 1 == tree.size() && !visit(order)) stop = true;
      return;
    }
    for (size_t i = 0; i < frontier.size() && !stop; ++i) {
      const NodeId v = frontier[i];
      std::vector<NodeId> saved = frontier;
      frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(i));
      frontier.insert(frontier.end(), tree.children(v).begin(), tree.children(v).end());
      order.push_back(v);
      rec();
      order.pop_back();
      frontier = std::move(saved);
    }
  };
  rec();
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::STD:
      return "std";
    case Strategy::COM:
      return "com";
    case Strategy::BVP_STD:
      return "bvp+std";
    case Strategy::BVP_COM:
      return "bvp+com";
    case Strategy::SJ_STD:
      return "sj+std";
    case Strategy::SJ_COM:
      return "sj+com";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == lower) return s;
  }
  throw QueryError(QueryErrorCode::InvalidPlan, "unknown strategy '" + std::string(text) + "'");
}

std::vector<NodeId> resolve_order(const JoinTree& tree, const std::vector<std::string>& order) {
  std::vector<NodeId> ids;
  ids.reserve(order.size());
  for (const auto& name : order) {
    auto id = tree.find(name);
    if (!id) throw QueryError(QueryErrorCode::UnknownRelation, name);
    ids.push_back(*id);
  }
  if (!is_valid_order(tree, ids)) {
    throw QueryError(QueryErrorCode::InvalidPlan,
                     "order is not a connected permutation rooted at " + tree.name(tree.root()));
  }
  return ids;
}

std::vector<std::string> order_names(const JoinTree& tree, std::span<const NodeId> order) {
  std::vector<std::string> out;
  out.reserve(order.size());
  for (NodeId v : order) out.push_back(tree.name(v));
  return out;
}

std::vector<std::vector<NodeId>> resolve_child_order(const JoinTree& tree, const SJPlan& plan) {
  std::vector<std::vector<NodeId>> out(tree.size());
  for (NodeId v = 0; v < tree.size(); ++v) out[v] = tree.children(v);
  for (const auto& [parent, kids] : plan.child_order) {
    const NodeId p = tree.id_of(parent);
    std::vector<NodeId> ids;
    for (const auto& k : kids) ids.push_back(tree.id_of(k));
    std::vector<NodeId> a = ids, b = tree.children(p);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) {
      throw QueryError(QueryErrorCode::InvalidPlan, "child order for " + parent + " is not a permutation of its children");
    }
    out[p] = std::move(ids);
  }
  return out;
}

SJPlan default_sj_plan(const JoinTree& tree, const Plan& plan) {
  SJPlan sj;
  sj.driver = plan.driver.empty() ? tree.name(tree.root()) : plan.driver;
  sj.order = plan.order;
  for (NodeId v = 0; v < tree.size(); ++v) {
    if (tree.children(v).empty()) continue;
    sj.child_order[tree.name(v)] = order_names(tree, tree.children(v));
  }
  return sj;
}

}  // namespace mmjoin
