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
#include <functional>
#include <vector>

#include "mmjoin/querymodel.hpp"

namespace mmjoin {

/// Matches of one relation, aligned with the entries of its parent group.
/// Entry j of this group belongs to parent entry `parent_entry[j]`; the
/// entries of parent entry e occupy [prefix[e], prefix[e] + counts[e]).
struct ColumnGroup {
  NodeId node = kNoNode;
  int parent = -1;
  std::vector<uint32_t> counts;
  std::vector<uint64_t> prefix;
  // Whether each parent entry was probed (it was live at probe time).
  std::vector<uint8_t> probed;
  std::vector<uint32_t> parent_entry;
  // Base row id of each entry.
  std::vector<uint32_t> rows;
  // Cleared by a failed probe or a failed filter test.
  std::vector<uint8_t> selection;
  // Selected, every child range holds a live entry, and the parent is live.
  std::vector<uint8_t> live;
  std::vector<int> children;

  size_t size() const { return rows.size(); }
};

/// Tree of column groups for one driver chunk. Group 0 holds driver rows.
class FactorizedChunk {
 public:
  FactorizedChunk(NodeId root, std::vector<uint32_t> driver_rows, size_t node_count);

  const std::vector<ColumnGroup>& groups() const { return groups_; }
  const ColumnGroup& group(int g) const { return groups_.at(static_cast<size_t>(g)); }
  /// Group holding `node`, or -1.
  int group_of(NodeId node) const { return node < group_of_.size() ? group_of_[node] : -1; }
  size_t node_count() const { return group_of_.size(); }

  /// Appends the matches of `node` probed from `parent_group`. Parent entries
  /// probed without a match lose their selection bit.
  int add_group(NodeId node, int parent_group, std::vector<uint32_t> counts, std::vector<uint8_t> probed,
                std::vector<uint32_t> matches);

  /// Clears the selection bit of tested entries whose `pass` flag is 0.
  void apply_filter(int g, const std::vector<uint8_t>& tested, const std::vector<uint8_t>& pass);

  /// Upward then downward liveness propagation over all groups.
  void recompute_liveness();

  size_t live_entries(int g) const;
  size_t total_entries() const;

  /// Number of flat tuples represented.
  uint64_t count_tuples() const;

  /// Depth-first expansion. `sink` receives column-major row ids indexed by
  /// node and the number of tuples, at most `chunk_size` per call.
  uint64_t expand(size_t chunk_size,
                  const std::function<void(const std::vector<std::vector<uint32_t>>&, size_t)>& sink) const;

  /// Throws InvariantViolation on the first broken structural invariant.
  /// Returns the number of checks made.
  uint64_t check_invariants() const;

 private:
  std::vector<ColumnGroup> groups_;
  std::vector<int> group_of_;
};

}  // namespace mmjoin
