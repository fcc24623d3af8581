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

// Chunk-wide inner loops of the join engine. Every kernel has a scalar
// reference implementation; an AVX2 variant is compiled in a separate
// translation unit and chosen at runtime when the CPU supports it.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace mmjoin::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// 64-bit finalizer: two multiplicative rounds, each followed by a shift-xor.
constexpr uint64_t mix64(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

constexpr uint64_t kDefaultHashSeed = 0x9e3779b97f4a7c15ULL;

/// Hash of a single key, identical to one hash_combine step from `seed`.
constexpr uint64_t hash_key(int64_t key, uint64_t seed = kDefaultHashSeed) {
  return mix64(seed ^ static_cast<uint64_t>(key));
}

struct KernelTable {
  Isa isa;
  // out[i] = values[rows[i]]
  void (*gather_i64)(const int64_t* values, const uint32_t* rows, int64_t* out, size_t n);
  // hashes[i] = mix64(hashes[i] ^ keys[i]); callers seed `hashes` first.
  void (*hash_combine)(const int64_t* keys, uint64_t* hashes, size_t n);
  // out[i] = hashes[i] >> shift, shift in [32, 63].
  void (*bucket_index)(const uint64_t* hashes, unsigned shift, uint32_t* out, size_t n);
  // pass[i] &= bit (hashes[i] >> shift) of the filter. Returns the number of
  // entries whose pass flag is set afterwards.
  size_t (*bitvector_test)(const uint64_t* hashes, const uint64_t* words, unsigned shift,
                           uint8_t* pass, size_t n);
};

const KernelTable& scalar_kernels();

/// Null when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

/// Kernel table used by the engine. Defaults to the widest supported ISA.
const KernelTable& active();

/// Overrides the runtime choice (benchmarks and equivalence tests). Returns
/// false and leaves the selection unchanged when `isa` is unavailable.
bool select_isa(Isa isa);

}  // namespace mmjoin::kernels
