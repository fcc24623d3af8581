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

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "mmjoin/kernels.hpp"

namespace mmjoin::kernels {
namespace {

// Sizes straddle the vector width and its tail handling.
const std::vector<size_t> kSizes{0, 1, 3, 4, 5, 7, 8, 9, 31, 33, 1000, 2048};

const KernelTable* wide() {
  const KernelTable* t = avx2_kernels();
  return t && cpu_supports(Isa::avx2) ? t : nullptr;
}

TEST(Kernels, ScalarMatchesDefinitions) {
  const KernelTable& s = scalar_kernels();
  const std::vector<int64_t> values{10, -3, 7, 99};
  const std::vector<uint32_t> rows{3, 0, 0, 2};
  std::vector<int64_t> out(4);
  s.gather_i64(values.data(), rows.data(), out.data(), 4);
  EXPECT_EQ(out, (std::vector<int64_t>{99, 10, 10, 7}));

  std::vector<uint64_t> h(4, kDefaultHashSeed);
  s.hash_combine(values.data(), h.data(), 4);
  for (size_t i = 0; i < 4; ++i) EXPECT_EQ(h[i], hash_key(values[i]));

  std::vector<uint32_t> b(4);
  s.bucket_index(h.data(), 60, b.data(), 4);
  for (size_t i = 0; i < 4; ++i) EXPECT_EQ(b[i], h[i] >> 60);

  // Two-word filter with bits 0 and 65 set.
  const std::vector<uint64_t> words{1, 2};
  const std::vector<uint64_t> probe{0ULL << 57, 1ULL << 57, 65ULL << 57, 127ULL << 57};
  std::vector<uint8_t> pass{1, 1, 1, 0};
  EXPECT_EQ(s.bitvector_test(probe.data(), words.data(), 57, pass.data(), 4), 2u);
  EXPECT_EQ(pass, (std::vector<uint8_t>{1, 0, 1, 0}));
}

TEST(Kernels, MixIsABijectionOnSamples) {
  EXPECT_EQ(mix64(0), 0u);
  EXPECT_NE(mix64(1), mix64(2));
  EXPECT_NE(hash_key(1), hash_key(1, 7));
}

TEST(Kernels, Avx2EquivalentToScalar) {
  const KernelTable* v = wide();
  if (!v) GTEST_SKIP() << "AVX2 unavailable";
  const KernelTable& s = scalar_kernels();
  std::mt19937_64 rng(41);
  for (size_t n : kSizes) {
    std::vector<int64_t> values(n + 5);
    for (auto& x : values) x = static_cast<int64_t>(rng());
    std::vector<uint32_t> rows(n);
    for (auto& r : rows) r = static_cast<uint32_t>(rng() % values.size());
    std::vector<int64_t> g1(n), g2(n);
    s.gather_i64(values.data(), rows.data(), g1.data(), n);
    v->gather_i64(values.data(), rows.data(), g2.data(), n);
    EXPECT_EQ(g1, g2) << n;

    std::vector<uint64_t> h1(n), h2;
    for (auto& x : h1) x = rng();
    h2 = h1;
    s.hash_combine(g1.data(), h1.data(), n);
    v->hash_combine(g1.data(), h2.data(), n);
    EXPECT_EQ(h1, h2) << n;

    for (unsigned shift : {32u, 45u, 63u}) {
      std::vector<uint32_t> b1(n), b2(n);
      s.bucket_index(h1.data(), shift, b1.data(), n);
      v->bucket_index(h1.data(), shift, b2.data(), n);
      EXPECT_EQ(b1, b2) << n << " " << shift;
    }

    for (unsigned shift : {52u, 58u}) {
      std::vector<uint64_t> words(size_t{1} << (64 - shift - 6));
      for (auto& w : words) w = rng() & rng();
      std::vector<uint8_t> p1(n), p2;
      for (auto& p : p1) p = static_cast<uint8_t>(rng() % 4 != 0);
      p2 = p1;
      const size_t c1 = s.bitvector_test(h1.data(), words.data(), shift, p1.data(), n);
      const size_t c2 = v->bitvector_test(h1.data(), words.data(), shift, p2.data(), n);
      EXPECT_EQ(c1, c2) << n;
      EXPECT_EQ(p1, p2) << n;
    }
  }
}

TEST(Kernels, RuntimeSelection) {
  EXPECT_TRUE(select_isa(Isa::scalar));
  EXPECT_EQ(active().isa, Isa::scalar);
  if (wide()) {
    EXPECT_TRUE(select_isa(Isa::avx2));
    EXPECT_EQ(active().isa, Isa::avx2);
  }
  EXPECT_EQ(isa_name(Isa::scalar), "scalar");
}

}  // namespace
}  // namespace mmjoin::kernels
