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

#include "mmjoin/kernels.hpp"

namespace mmjoin::kernels {
namespace {

void gather_i64_scalar(const int64_t* values, const uint32_t* rows, int64_t* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = values[rows[i]];
}

void hash_combine_scalar(const int64_t* keys, uint64_t* hashes, size_t n) {
  for (size_t i = 0; i < n; ++i) hashes[i] = mix64(hashes[i] ^ static_cast<uint64_t>(keys[i]));
}

void bucket_index_scalar(const uint64_t* hashes, unsigned shift, uint32_t* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<uint32_t>(hashes[i] >> shift);
}

size_t bitvector_test_scalar(const uint64_t* hashes, const uint64_t* words, unsigned shift,
                             uint8_t* pass, size_t n) {
  size_t passed = 0;
  for (size_t i = 0; i < n; ++i) {
    const uint64_t bit = hashes[i] >> shift;
    const uint8_t hit = static_cast<uint8_t>((words[bit >> 6] >> (bit & 63)) & 1);
    pass[i] &= hit;
    passed += pass[i];
  }
  return passed;
}

constexpr KernelTable kScalar{Isa::scalar, gather_i64_scalar, hash_combine_scalar,
                              bucket_index_scalar, bitvector_test_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace mmjoin::kernels
