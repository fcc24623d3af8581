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

#include "mmjoin/factorized.hpp"

#include <string>

#include "mmjoin/error.hpp"

namespace mmjoin {

FactorizedChunk::FactorizedChunk(NodeId root, std::vector<uint32_t> driver_rows, size_t node_count)
    : group_of_(node_count, -1) {
  ColumnGroup g;
  g.node = root;
  g.rows = std::move(driver_rows);
  g.selection.assign(g.rows.size(), 1);
  g.live.assign(g.rows.size(), 1);
  groups_.push_back(std::move(g));
  group_of_.at(root) = 0;
}

int FactorizedChunk::add_group(NodeId node, int parent_group, std::vector<uint32_t> counts,
                               std::vector<uint8_t> probed, std::vector<uint32_t> matches) {
  ColumnGroup& parent = groups_.at(static_cast<size_t>(parent_group));
  if (counts.size() != parent.size() || probed.size() != parent.size()) {
    throw InvariantViolation("count vector does not align with the parent group");
  }
  ColumnGroup g;
  g.node = node;
  g.parent = parent_group;
  g.prefix.resize(counts.size());
  uint64_t run = 0;
  for (size_t e = 0; e < counts.size(); ++e) {
    g.prefix[e] = run;
    run += counts[e];
    if (probed[e] && counts[e] == 0) parent.selection[e] = 0;
  }
  if (run != matches.size()) throw InvariantViolation("payload length differs from the count total");
  g.parent_entry.resize(matches.size());
  for (size_t e = 0; e < counts.size(); ++e) {
    for (uint64_t j = g.prefix[e]; j < g.prefix[e] + counts[e]; ++j) g.parent_entry[j] = static_cast<uint32_t>(e);
  }
  g.counts = std::move(counts);
  g.probed = std::move(probed);
  g.rows = std::move(matches);
  g.selection.assign(g.rows.size(), 1);
  g.live.assign(g.rows.size(), 1);
  const int id = static_cast<int>(groups_.size());
  parent.children.push_back(id);
  groups_.push_back(std::move(g));
  group_of_.at(node) = id;
  return id;
}

void FactorizedChunk::apply_filter(int g, const std::vector<uint8_t>& tested, const std::vector<uint8_t>& pass) {
  ColumnGroup& grp = groups_.at(static_cast<size_t>(g));
  for (size_t e = 0; e < grp.size(); ++e) {
    if (tested[e] && !pass[e]) grp.selection[e] = 0;
  }
}

void FactorizedChunk::recompute_liveness() {
  // Children are always created after their parents, so reverse creation
  // order visits every child group before its parent.
  for (size_t gi = groups_.size(); gi-- > 0;) {
    ColumnGroup& g = groups_[gi];
    g.live = g.selection;
    for (int c : g.children) {
      const ColumnGroup& cg = groups_[static_cast<size_t>(c)];
      for (size_t e = 0; e < g.size(); ++e) {
        if (!g.live[e]) continue;
        bool any = false;
        for (uint64_t j = cg.prefix[e]; j < cg.prefix[e] + cg.counts[e] && !any; ++j) any = cg.live[j];
        g.live[e] = any;
      }
    }
  }
  for (size_t gi = 1; gi < groups_.size(); ++gi) {
    ColumnGroup& g = groups_[gi];
    const ColumnGroup& p = groups_[static_cast<size_t>(g.parent)];
    for (size_t j = 0; j < g.size(); ++j) g.live[j] = g.live[j] && p.live[g.parent_entry[j]];
  }
}

size_t FactorizedChunk::live_entries(int g) const {
  size_t n = 0;
  for (uint8_t b : groups_.at(static_cast<size_t>(g)).live) n += b;
  return n;
}

size_t FactorizedChunk::total_entries() const {
  size_t n = 0;
  for (const auto& g : groups_) n += g.size();
  return n;
}

uint64_t FactorizedChunk::count_tuples() const {
  std::vector<std::vector<uint64_t>> weight(groups_.size());
  for (size_t gi = groups_.size(); gi-- > 0;) {
    const ColumnGroup& g = groups_[gi];
    auto& w = weight[gi];
    w.assign(g.size(), 0);
    for (size_t e = 0; e < g.size(); ++e) w[e] = g.live[e] ? 1 : 0;
    for (int c : g.children) {
      const ColumnGroup& cg = groups_[static_cast<size_t>(c)];
      const auto& cw = weight[static_cast<size_t>(c)];
      for (size_t e = 0; e < g.size(); ++e) {
        if (w[e] == 0) continue;
        uint64_t sum = 0;
        for (uint64_t j = cg.prefix[e]; j < cg.prefix[e] + cg.counts[e]; ++j) sum += cw[j];
        if (sum != 0 && w[e] > UINT64_MAX / sum) throw Error("result cardinality overflows 64 bits");
        w[e] *= sum;
      }
    }
  }
  uint64_t total = 0;
  for (uint64_t v : weight[0]) {
    if (total > UINT64_MAX - v) throw Error("result cardinality overflows 64 bits");
    total += v;
  }
  return total;
}

uint64_t FactorizedChunk::expand(
    size_t chunk_size, const std::function<void(const std::vector<std::vector<uint32_t>>&, size_t)>& sink) const {
  const size_t n_nodes = group_of_.size();
  std::vector<std::vector<uint32_t>> out(n_nodes);
  for (const auto& g : groups_) out[g.node].reserve(chunk_size);
  size_t filled = 0;
  uint64_t emitted = 0;
  // Row-index vector: the current entry of every group.
  std::vector<uint64_t> cursor(groups_.size(), 0);

  auto flush = [&] {
    if (filled == 0) return;
    sink(out, filled);
    for (auto& col : out) col.clear();
    filled = 0;
  };

  std::function<void(size_t)> descend = [&](size_t gi) {
    if (gi == groups_.size()) {
      for (size_t g = 0; g < groups_.size(); ++g) out[groups_[g].node].push_back(groups_[g].rows[cursor[g]]);
      ++filled;
      ++emitted;
      if (filled == chunk_size) flush();
      return;
    }
    const ColumnGroup& g = groups_[gi];
    const uint64_t pe = cursor[static_cast<size_t>(g.parent)];
    for (uint64_t j = g.prefix[pe]; j < g.prefix[pe] + g.counts[pe]; ++j) {
      if (!g.live[j]) continue;
      cursor[gi] = j;
      descend(gi + 1);
    }
  };

  const ColumnGroup& root = groups_[0];
  for (size_t e = 0; e < root.size(); ++e) {
    if (!root.live[e]) continue;
    cursor[0] = e;
    descend(1);
  }
  flush();
  return emitted;
}

uint64_t FactorizedChunk::check_invariants() const {
  uint64_t checks = 0;
  auto fail = [](const std::string& what) { throw InvariantViolation(what); };
  for (size_t gi = 0; gi < groups_.size(); ++gi) {
    const ColumnGroup& g = groups_[gi];
    if (g.selection.size() != g.size() || g.live.size() != g.size()) fail("bitmap length mismatch");
    for (size_t e = 0; e < g.size(); ++e) {
      if (g.live[e] && !g.selection[e]) fail("live entry with cleared selection bit");
    }
    ++checks;
    if (gi == 0) continue;
    const ColumnGroup& p = groups_[static_cast<size_t>(g.parent)];
    uint64_t run = 0;
    for (size_t e = 0; e < g.counts.size(); ++e) {
      if (g.prefix[e] != run) fail("prefix-sum identity broken");
      run += g.counts[e];
      if (!g.probed[e] && g.counts[e] != 0) fail("matches recorded for an unprobed entry");
      if (g.probed[e] && g.counts[e] == 0 && p.selection[e]) fail("failed probe left the selection bit set");
    }
    if (g.counts.size() != p.size()) fail("count vector does not align with the parent group");
    if (run != g.size()) fail("payload length differs from the count total");
    checks += 2;
    for (size_t j = 0; j < g.size(); ++j) {
      if (g.live[j] && !p.live[g.parent_entry[j]]) fail("live entry below a dead parent");
    }
    ++checks;
  }
  return checks;
}

}  // namespace mmjoin
