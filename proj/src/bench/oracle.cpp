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

#include <deque>

#include "mmjoin/bench.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

namespace {

constexpr size_t kOracleOutputCap = 10'000'000;

struct Condition {
  NodeId other;
  std::vector<const std::vector<int64_t>*> mine;
  std::vector<const std::vector<int64_t>*> theirs;
};

}  // namespace

std::vector<std::vector<uint32_t>> oracle_join(const Catalog& catalog, const JoinGraph& graph, size_t row_cap) {
  const size_t k = graph.size();
  std::vector<const Relation*> rel(k);
  for (NodeId v = 0; v < k; ++v) {
    rel[v] = &catalog.relation(graph.base(v));
    if (rel[v]->row_count() > row_cap) throw Error("oracle row cap exceeded by " + graph.name(v));
  }

  // Visit order: breadth-first from node 0.
  std::vector<NodeId> order;
  std::vector<uint8_t> seen(k, 0);
  std::deque<NodeId> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    order.push_back(v);
    for (const auto& [w, e] : graph.neighbours(v)) {
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }

  // Conditions checked when a node is assigned: every edge to a node earlier
  // in the visit order.
  std::vector<size_t> position(k);
  for (size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  std::vector<std::vector<Condition>> checks(k);
  for (const auto& e : graph.edges()) {
    const bool a_later = position[e.a] > position[e.b];
    const NodeId late = a_later ? e.a : e.b;
    const NodeId early = a_later ? e.b : e.a;
    const auto& late_attrs = a_later ? e.attrs_a : e.attrs_b;
    const auto& early_attrs = a_later ? e.attrs_b : e.attrs_a;
    Condition c{early, {}, {}};
    for (size_t i = 0; i < late_attrs.size(); ++i) {
      c.mine.push_back(&rel[late]->column(late_attrs[i]).values);
      c.theirs.push_back(&rel[early]->column(early_attrs[i]).values);
    }
    checks[late].push_back(std::move(c));
  }

  std::vector<std::vector<uint32_t>> out;
  std::vector<uint32_t> current(k, 0);
  auto recurse = [&](auto&& self, size_t depth) -> void {
    if (depth == order.size()) {
      if (out.size() >= kOracleOutputCap) throw Error("oracle output cap exceeded");
      out.push_back(current);
      return;
    }
    const NodeId v = order[depth];
    for (uint32_t r = 0; r < rel[v]->row_count(); ++r) {
      bool ok = true;
      for (const auto& c : checks[v]) {
        for (size_t i = 0; i < c.mine.size() && ok; ++i) ok = (*c.mine[i])[r] == (*c.theirs[i])[current[c.other]];
        if (!ok) break;
      }
      if (!ok) continue;
      current[v] = r;
      self(self, depth + 1);
    }
  };
  recurse(recurse, 0);
  return out;
}

std::vector<uint64_t> oracle_driver_counts(const Catalog& catalog, const JoinGraph& graph, NodeId driver) {
  std::vector<uint64_t> counts(catalog.relation(graph.base(driver)).row_count(), 0);
  for (const auto& t : oracle_join(catalog, graph)) ++counts[t[driver]];
  return counts;
}

}  // namespace mmjoin
