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

// Compiled with -mavx2. Nothing in here may run before the dispatcher has
// checked the CPU.

#include <immintrin.h>

#include "mmjoin/kernels.hpp"

namespace mmjoin::kernels {
namespace {

// Low 64 bits of a 64x64 product; AVX2 has no native 64-bit mullo.
inline __m256i mullo_epi64(__m256i a, __m256i b) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i a_hi_b = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), b);
  const __m256i a_b_hi = _mm256_mul_epu32(a, _mm256_srli_epi64(b, 32));
  const __m256i cross = _mm256_slli_epi64(_mm256_add_epi64(a_hi_b, a_b_hi), 32);
  return _mm256_add_epi64(lo, cross);
}

inline __m256i mix64_avx2(__m256i x) {
  const __m256i c1 = _mm256_set1_epi64x(static_cast<long long>(0xff51afd7ed558ccdULL));
  const __m256i c2 = _mm256_set1_epi64x(static_cast<long long>(0xc4ceb9fe1a85ec53ULL));
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 33));
  x = mullo_epi64(x, c1);
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 33));
  x = mullo_epi64(x, c2);
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 33));
  return x;
}

void gather_i64_avx2(const int64_t* values, const uint32_t* rows, int64_t* out, size_t n) {
  size_t i = 0;
  const auto* base = reinterpret_cast<const long long*>(values);
  for (; i + 4 <= n; i += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(rows + i));
    const __m256i v = _mm256_i32gather_epi64(base, idx, 8);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), v);
  }
  for (; i < n; ++i) out[i] = values[rows[i]];
}

void hash_combine_avx2(const int64_t* keys, uint64_t* hashes, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i k = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(keys + i));
    const __m256i h = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hashes + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(hashes + i), mix64_avx2(_mm256_xor_si256(h, k)));
  }
  for (; i < n; ++i) hashes[i] = mix64(hashes[i] ^ static_cast<uint64_t>(keys[i]));
}

void bucket_index_avx2(const uint64_t* hashes, unsigned shift, uint32_t* out, size_t n) {
  size_t i = 0;
  const __m128i count = _mm_cvtsi32_si128(static_cast<int>(shift));
  const __m256i pack = _mm256_setr_epi32(0, 2, 4, 6, 1, 3, 5, 7);
  for (; i + 4 <= n; i += 4) {
    const __m256i h = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hashes + i));
    const __m256i b = _mm256_permutevar8x32_epi32(_mm256_srl_epi64(h, count), pack);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), _mm256_castsi256_si128(b));
  }
  for (; i < n; ++i) out[i] = static_cast<uint32_t>(hashes[i] >> shift);
}

size_t bitvector_test_avx2(const uint64_t* hashes, const uint64_t* words, unsigned shift,
                           uint8_t* pass, size_t n) {
  size_t i = 0;
  size_t passed = 0;
  const __m128i count = _mm_cvtsi32_si128(static_cast<int>(shift));
  const __m256i low6 = _mm256_set1_epi64x(63);
  const __m256i one = _mm256_set1_epi64x(1);
  const auto* base = reinterpret_cast<const long long*>(words);
  alignas(32) uint64_t hit[4];
  for (; i + 4 <= n; i += 4) {
    const __m256i h = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hashes + i));
    const __m256i bit = _mm256_srl_epi64(h, count);
    const __m256i word = _mm256_i64gather_epi64(base, _mm256_srli_epi64(bit, 6), 8);
    const __m256i b = _mm256_and_si256(_mm256_srlv_epi64(word, _mm256_and_si256(bit, low6)), one);
    _mm256_store_si256(reinterpret_cast<__m256i*>(hit), b);
    for (int lane = 0; lane < 4; ++lane) {
      pass[i + lane] &= static_cast<uint8_t>(hit[lane]);
      passed += pass[i + lane];
    }
  }
  for (; i < n; ++i) {
    const uint64_t bit = hashes[i] >> shift;
    pass[i] &= static_cast<uint8_t>((words[bit >> 6] >> (bit & 63)) & 1);
    passed += pass[i];
  }
  return passed;
}

constexpr KernelTable kAvx2{Isa::avx2, gather_i64_avx2, hash_combine_avx2, bucket_index_avx2,
                            bitvector_test_avx2};

}  // namespace

const KernelTable* avx2_kernels_impl() { return &kAvx2; }

}  // namespace mmjoin::kernels
