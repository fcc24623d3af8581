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

#include <bit>

#include "mmjoin/engine.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

void hash_rows(const Relation& relation, const std::vector<std::string>& attrs, const uint32_t* rows, size_t n,
               uint64_t seed, uint64_t* hashes) {
  const auto& k = kernels::active();
  std::vector<int64_t> buf(n);
  for (size_t i = 0; i < n; ++i) hashes[i] = seed;
  for (const auto& a : attrs) {
    k.gather_i64(relation.column(a).values.data(), rows, buf.data(), n);
    k.hash_combine(buf.data(), hashes, n);
  }
}

HashTable::HashTable(const RelationView& view, const std::vector<std::string>& key_attrs, uint64_t seed)
    : seed_(seed) {
  if (key_attrs.empty()) throw Error("hash table needs at least one key attribute");
  const size_t n = view.size();
  if (n >= kEnd) throw Error("relation too large for 32-bit row ids");
  row_ids_.resize(n);
  for (size_t i = 0; i < n; ++i) row_ids_[i] = view.row(i);

  const auto& k = kernels::active();
  keys_.assign(key_attrs.size(), std::vector<int64_t>(n));
  for (size_t a = 0; a < key_attrs.size(); ++a) {
    const Column& col = view.relation->column(key_attrs[a]);
    if (col.type != ColumnType::Int64 && col.type != ColumnType::Utf8Dict) throw Error("unsupported key type");
    k.gather_i64(col.values.data(), row_ids_.data(), keys_[a].data(), n);
  }
  hashes_.assign(n, seed);
  for (const auto& col : keys_) k.hash_combine(col.data(), hashes_.data(), n);

  const size_t dir = std::max<size_t>(8, std::bit_ceil(std::max<size_t>(1, 2 * n)));
  shift_ = 64u - static_cast<unsigned>(std::countr_zero(dir));
  directory_.assign(dir, kEnd);
  next_.assign(n, kEnd);
  std::vector<uint32_t> bucket(n);
  k.bucket_index(hashes_.data(), shift_, bucket.data(), n);
  for (uint32_t i = 0; i < n; ++i) {
    next_[i] = directory_[bucket[i]];
    directory_[bucket[i]] = i;
  }
}

bool HashTable::equal(uint32_t entry, const std::vector<const int64_t*>& keys, size_t i) const {
  for (size_t a = 0; a < keys_.size(); ++a) {
    if (keys_[a][entry] != keys[a][i]) return false;
  }
  return true;
}

size_t HashTable::probe(const uint64_t* hashes, const std::vector<const int64_t*>& keys, const uint8_t* active,
                        size_t n, uint32_t* counts, std::vector<uint32_t>& matches) const {
  std::vector<uint32_t> bucket(n);
  kernels::active().bucket_index(hashes, shift_, bucket.data(), n);
  size_t probes = 0;
  for (size_t i = 0; i < n; ++i) {
    counts[i] = 0;
    if (active && !active[i]) continue;
    ++probes;
    uint32_t c = 0;
    for (uint32_t e = directory_[bucket[i]]; e != kEnd; e = next_[e]) {
      if (hashes_[e] == hashes[i] && equal(e, keys, i)) {
        matches.push_back(row_ids_[e]);
        ++c;
      }
    }
    counts[i] = c;
  }
  return probes;
}

size_t HashTable::semi_probe(const uint64_t* hashes, const std::vector<const int64_t*>& keys, uint8_t* active,
                             size_t n) const {
  std::vector<uint32_t> bucket(n);
  kernels::active().bucket_index(hashes, shift_, bucket.data(), n);
  size_t probes = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    ++probes;
    bool found = false;
    for (uint32_t e = directory_[bucket[i]]; e != kEnd && !found; e = next_[e]) {
      found = hashes_[e] == hashes[i] && equal(e, keys, i);
    }
    active[i] = found;
  }
  return probes;
}

size_t HashTable::reachable_rows() const {
  size_t total = 0;
  std::vector<uint8_t> seen(row_ids_.size(), 0);
  for (uint32_t head : directory_) {
    for (uint32_t e = head; e != kEnd; e = next_[e]) {
      if (e >= seen.size() || seen[e]) return SIZE_MAX;
      seen[e] = 1;
      ++total;
    }
  }
  return total;
}

size_t HashTable::chain_length(uint64_t hash, const std::vector<int64_t>& key) const {
  std::vector<const int64_t*> ptrs;
  for (const auto& v : key) ptrs.push_back(&v);
  size_t len = 0;
  for (uint32_t e = head(hash); e != kEnd; e = next_[e]) {
    if (hashes_[e] == hash && equal(e, ptrs, 0)) ++len;
  }
  return len;
}

}  // namespace mmjoin
