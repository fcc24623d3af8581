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

#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmjoin {

class Catalog;

using NodeId = uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
inline constexpr size_t kMaxNodes = 256;

/// Fixed-capacity bitset over join-tree nodes; the DP memo key.
class NodeSet {
 public:
  NodeSet() = default;

  void insert(NodeId n) { words_[n >> 6] |= uint64_t{1} << (n & 63); }
  void erase(NodeId n) { words_[n >> 6] &= ~(uint64_t{1} << (n & 63)); }
  bool contains(NodeId n) const { return (words_[n >> 6] >> (n & 63)) & 1; }
  NodeSet with(NodeId n) const {
    NodeSet s = *this;
    s.insert(n);
    return s;
  }
  NodeSet without(NodeId n) const {
    NodeSet s = *this;
    s.erase(n);
    return s;
  }
  size_t size() const {
    size_t c = 0;
    for (auto w : words_) c += static_cast<size_t>(std::popcount(w));
    return c;
  }
  bool empty() const { return size() == 0; }
  bool operator==(const NodeSet&) const = default;

  template <typename F>
  void for_each(F&& f) const {
    for (size_t w = 0; w < words_.size(); ++w) {
      uint64_t bits = words_[w];
      while (bits) {
        const int b = std::countr_zero(bits);
        f(static_cast<NodeId>(w * 64 + static_cast<size_t>(b)));
        bits &= bits - 1;
      }
    }
  }

  size_t hash() const {
    uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto w : words_) h = (h ^ w) * 0x100000001b3ULL;
    return static_cast<size_t>(h ^ (h >> 29));
  }

 private:
  std::array<uint64_t, kMaxNodes / 64> words_{};
};

struct NodeSetHash {
  size_t operator()(const NodeSet& s) const { return s.hash(); }
};

/// A relation occurrence in a query. `alias` names the node; `base` names the
/// catalog relation (they differ for self-joins).
struct RelationRef {
  std::string alias;
  std::string base;
};

struct EdgeSpec {
  std::string left;
  std::string left_attr;
  std::string right;
  std::string right_attr;
};

struct QuerySpec {
  std::vector<RelationRef> relations;
  std::vector<EdgeSpec> edges;
  std::optional<std::string> driver;

  /// Convenience: relations named by base name, no aliasing.
  static QuerySpec from_names(std::vector<std::string> names, std::vector<EdgeSpec> edges);
};

/// One edge of the join graph. Multiple conditions between the same pair of
/// relations collapse into a composite key (parallel attribute lists).
struct GraphEdge {
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  std::vector<std::string> attrs_a;
  std::vector<std::string> attrs_b;
};

/// Validated, unrooted join graph (a tree).
class JoinGraph {
 public:
  size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(NodeId n) const { return names_.at(n); }
  const std::string& base(NodeId n) const { return bases_.at(n); }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  /// (neighbour, edge index) pairs.
  const std::vector<std::pair<NodeId, size_t>>& neighbours(NodeId n) const { return adjacency_.at(n); }
  std::optional<NodeId> find(std::string_view name) const;
  NodeId id_of(std::string_view name) const;
  const std::optional<std::string>& driver() const { return driver_; }

  friend JoinGraph build_join_graph(const QuerySpec& spec);

 private:
  std::vector<std::string> names_;
  std::vector<std::string> bases_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<std::pair<NodeId, size_t>>> adjacency_;
  std::optional<std::string> driver_;
};

/// Structural validation only (acyclic, connected, well-formed names).
JoinGraph build_join_graph(const QuerySpec& spec);

/// Structural validation plus catalog checks (relations and attributes exist,
/// join attributes are Int64 after ingestion).
JoinGraph validate_query(const QuerySpec& spec, const Catalog& catalog);

/// Join graph oriented from a driver. Statistics on the edge into `v` describe
/// parent(v) probing v.
class JoinTree {
 public:
  size_t size() const { return names_.size(); }
  NodeId root() const { return root_; }
  NodeId parent(NodeId n) const { return parent_.at(n); }
  const std::vector<NodeId>& children(NodeId n) const { return children_.at(n); }
  const std::string& name(NodeId n) const { return names_.at(n); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& base(NodeId n) const { return bases_.at(n); }
  /// Join attributes of the edge parent(n) -> n, on the parent side.
  const std::vector<std::string>& parent_attrs(NodeId n) const { return parent_attrs_.at(n); }
  /// Join attributes of the edge parent(n) -> n, on n's side.
  const std::vector<std::string>& child_attrs(NodeId n) const { return child_attrs_.at(n); }
  size_t depth(NodeId n) const { return depth_.at(n); }
  /// Root first; every parent precedes its children.
  const std::vector<NodeId>& preorder() const { return preorder_; }
  /// Children before parents; the root comes last.
  std::vector<NodeId> postorder() const;
  std::optional<NodeId> find(std::string_view name) const;
  NodeId id_of(std::string_view name) const;
  /// True when `ancestor` lies on the path from the root to `n` (inclusive).
  bool is_ancestor(NodeId ancestor, NodeId n) const;

  friend JoinTree root_at(const JoinGraph& graph, NodeId driver);

 private:
  std::vector<std::string> names_;
  std::vector<std::string> bases_;
  NodeId root_ = 0;
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::vector<std::string>> parent_attrs_;
  std::vector<std::vector<std::string>> child_attrs_;
  std::vector<size_t> depth_;
  std::vector<NodeId> preorder_;
};

JoinTree root_at(const JoinGraph& graph, NodeId driver);
JoinTree root_at(const JoinGraph& graph, std::string_view driver);

/// Relations whose parent is the driver or already placed. `placed` never
/// contains the root; it must be closed under parent (InvalidPrefix otherwise).
std::vector<NodeId> eligible_next(const JoinTree& tree, const NodeSet& placed);

/// True when every prefix of `order`, together with the root, is connected
/// and `order` is a permutation of the non-root nodes.
bool is_valid_order(const JoinTree& tree, std::span<const NodeId> order);

/// Calls `visit` with every valid complete order. Stops early when `visit`
/// returns false.
void enumerate_orders(const JoinTree& tree, const std::function<bool(const std::vector<NodeId>&)>& visit);

enum class Strategy { STD, COM, BVP_STD, BVP_COM, SJ_STD, SJ_COM };

inline constexpr std::array<Strategy, 6> kAllStrategies{Strategy::STD,     Strategy::COM,    Strategy::BVP_STD,
                                                        Strategy::BVP_COM, Strategy::SJ_STD, Strategy::SJ_COM};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);
inline bool uses_com(Strategy s) { return s == Strategy::COM || s == Strategy::BVP_COM || s == Strategy::SJ_COM; }
inline bool uses_bvp(Strategy s) { return s == Strategy::BVP_STD || s == Strategy::BVP_COM; }
inline bool uses_sj(Strategy s) { return s == Strategy::SJ_STD || s == Strategy::SJ_COM; }

struct Plan {
  std::string driver;
  std::vector<std::string> order;
  Strategy strategy = Strategy::COM;
};

/// Full-reduction plan: per-parent semi-join child order (phase 1) plus the
/// join order of the result-producing phase.
struct SJPlan {
  std::string driver;
  std::map<std::string, std::vector<std::string>> child_order;
  std::vector<std::string> order;
};

/// Resolves names against the tree and checks precedence constraints.
std::vector<NodeId> resolve_order(const JoinTree& tree, const std::vector<std::string>& order);
std::vector<std::string> order_names(const JoinTree& tree, std::span<const NodeId> order);

/// Per-node child order for phase 1. Missing entries default to the tree's
/// child order; given entries must be permutations of the node's children.
std::vector<std::vector<NodeId>> resolve_child_order(const JoinTree& tree, const SJPlan& plan);

/// Default SJ plan for a left-deep plan: tree child order, same join order.
SJPlan default_sj_plan(const JoinTree& tree, const Plan& plan);

}  // namespace mmjoin
