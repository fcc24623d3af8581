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

#include <atomic>
#include <cstdlib>
#include <string>

#include "mmjoin/kernels.hpp"

namespace mmjoin::kernels {

#if MMJOIN_HAVE_AVX2
const KernelTable* avx2_kernels_impl();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if MMJOIN_HAVE_AVX2
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if MMJOIN_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

namespace {

const KernelTable* initial_table() {
  // MMJOIN_ISA=scalar pins the reference kernels for a whole process.
  if (const char* env = std::getenv("MMJOIN_ISA"); env != nullptr && std::string(env) == "scalar") {
    return &scalar_kernels();
  }
  if (cpu_supports(Isa::avx2) && avx2_kernels() != nullptr) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select_isa(Isa isa) {
  if (isa == Isa::scalar) {
    current().store(&scalar_kernels());
    return true;
  }
  if (!cpu_supports(isa) || avx2_kernels() == nullptr) return false;
  current().store(avx2_kernels());
  return true;
}

}  // namespace mmjoin::kernels
