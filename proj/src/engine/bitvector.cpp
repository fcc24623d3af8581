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
#include <bit>
#include <cmath>

#include "mmjoin/engine.hpp"
#include "mmjoin/error.hpp"

namespace mmjoin {

BitVectorFilter::BitVectorFilter(const RelationView& view, const std::vector<std::string>& key_attrs,
                                 double bits_per_key, uint64_t seed) {
  if (!(bits_per_key > 0)) throw Error("bits_per_key must be positive");
  const size_t n = view.size();
  const double want = std::ceil(std::log2(std::max(1.0, bits_per_key * static_cast<double>(n))));
  log2_bits_ = static_cast<unsigned>(std::clamp(want, 6.0, 32.0));
  shift_ = 64u - log2_bits_;
  words_.assign(std::max<size_t>(1, bits() / 64), 0);
  std::vector<uint32_t> rows(n);
  for (size_t i = 0; i < n; ++i) rows[i] = view.row(i);
  std::vector<uint64_t> hashes(n);
  hash_rows(*view.relation, key_attrs, rows.data(), n, seed, hashes.data());
  for (uint64_t h : hashes) {
    const uint64_t bit = h >> shift_;
    words_[bit >> 6] |= uint64_t{1} << (bit & 63);
  }
}

size_t BitVectorFilter::test_batch(const uint64_t* hashes, uint8_t* pass, size_t n) const {
  return kernels::active().bitvector_test(hashes, words_.data(), shift_, pass, n);
}

double BitVectorFilter::fill_ratio() const {
  size_t set = 0;
  for (uint64_t w : words_) set += static_cast<size_t>(std::popcount(w));
  return static_cast<double>(set) / static_cast<double>(bits());
}

}  // namespace mmjoin
