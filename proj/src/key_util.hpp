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
#include <string>
#include <unordered_map>
#include <vector>

#include "mmjoin/catalog.hpp"

namespace mmjoin::detail {

using Key = std::vector<int64_t>;

struct KeyHash {
  size_t operator()(const Key& k) const {
    uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int64_t v : k) {
      h ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<size_t>(h);
  }
};

inline std::vector<const std::vector<int64_t>*> key_columns(const Relation& rel,
                                                            const std::vector<std::string>& attrs) {
  std::vector<const std::vector<int64_t>*> cols;
  cols.reserve(attrs.size());
  for (const auto& a : attrs) cols.push_back(&rel.column(a).values);
  return cols;
}

inline Key key_at(const std::vector<const std::vector<int64_t>*>& cols, size_t row) {
  Key k(cols.size());
  for (size_t i = 0; i < cols.size(); ++i) k[i] = (*cols[i])[row];
  return k;
}

/// key -> row ordinals holding it, in row order.
inline std::unordered_map<Key, std::vector<uint32_t>, KeyHash> group_rows(const Relation& rel,
                                                                         const std::vector<std::string>& attrs) {
  std::unordered_map<Key, std::vector<uint32_t>, KeyHash> out;
  const auto cols = key_columns(rel, attrs);
  for (size_t r = 0; r < rel.row_count(); ++r) out[key_at(cols, r)].push_back(static_cast<uint32_t>(r));
  return out;
}

}  // namespace mmjoin::detail
