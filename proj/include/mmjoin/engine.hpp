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
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmjoin/catalog.hpp"
#include "mmjoin/kernels.hpp"
#include "mmjoin/querymodel.hpp"

namespace mmjoin {

/// A base relation, optionally restricted to a subset of its rows.
struct RelationView {
  const Relation* relation = nullptr;
  std::optional<std::vector<uint32_t>> rows;

  size_t size() const { return rows ? rows->size() : relation->row_count(); }
  uint32_t row(size_t i) const { return rows ? (*rows)[i] : static_cast<uint32_t>(i); }
};

/// Hashes of composite keys read from `view`-style row ids.
void hash_rows(const Relation& relation, const std::vector<std::string>& attrs, const uint32_t* rows, size_t n,
               uint64_t seed, uint64_t* hashes);

/// Chained hash table over a relation view. Row store holds the key columns,
/// the base row id and the chain link of every build row.
class HashTable {
 public:
  static constexpr uint32_t kEnd = UINT32_MAX;

  HashTable() = default;
  HashTable(const RelationView& view, const std::vector<std::string>& key_attrs,
            uint64_t seed = kernels::kDefaultHashSeed);

  size_t size() const { return row_ids_.size(); }
  size_t directory_size() const { return directory_.size(); }
  uint64_t seed() const { return seed_; }

  /// Bucket head for a hash (kEnd when empty).
  uint32_t head(uint64_t hash) const { return directory_[hash >> shift_]; }
  uint32_t next(uint32_t entry) const { return next_[entry]; }
  uint32_t row_id(uint32_t entry) const { return row_ids_[entry]; }
  int64_t key(size_t attr, uint32_t entry) const { return keys_[attr][entry]; }
  size_t key_width() const { return keys_.size(); }

  /// Probes `n` rows. Rows with `active[i] == 0` are skipped (count 0).
  /// Matching base row ids are appended to `matches` in probe order.
  /// Returns the number of probes made.
  size_t probe(const uint64_t* hashes, const std::vector<const int64_t*>& keys, const uint8_t* active, size_t n,
               uint32_t* counts, std::vector<uint32_t>& matches) const;

  /// Clears `active[i]` for rows with no match. Returns probes made.
  size_t semi_probe(const uint64_t* hashes, const std::vector<const int64_t*>& keys, uint8_t* active,
                    size_t n) const;

  /// Sum of chain lengths over all buckets; equals size() when complete.
  size_t reachable_rows() const;
  size_t chain_length(uint64_t hash, const std::vector<int64_t>& key) const;

 private:
  bool equal(uint32_t entry, const std::vector<const int64_t*>& keys, size_t i) const;

  std::vector<std::vector<int64_t>> keys_;
  std::vector<uint64_t> hashes_;
  std::vector<uint32_t> row_ids_;
  std::vector<uint32_t> next_;
  std::vector<uint32_t> directory_;
  unsigned shift_ = 61;
  uint64_t seed_ = kernels::kDefaultHashSeed;
};

/// Single-hash bitvector over 2^k bits; shares the hash table's hash.
class BitVectorFilter {
 public:
  static constexpr double kDefaultBitsPerKey = 8.0;

  BitVectorFilter() = default;
  BitVectorFilter(const RelationView& view, const std::vector<std::string>& key_attrs,
                  double bits_per_key = kDefaultBitsPerKey, uint64_t seed = kernels::kDefaultHashSeed);

  unsigned log2_bits() const { return log2_bits_; }
  size_t bits() const { return size_t{1} << log2_bits_; }
  bool test(uint64_t hash) const { return (words_[(hash >> shift_) >> 6] >> ((hash >> shift_) & 63)) & 1; }
  /// `pass[i] &= test(hashes[i])`; returns the number left set.
  size_t test_batch(const uint64_t* hashes, uint8_t* pass, size_t n) const;
  /// Fraction of set bits: the false-positive rate for absent keys.
  double fill_ratio() const;

 private:
  std::vector<uint64_t> words_;
  unsigned log2_bits_ = 6;
  unsigned shift_ = 58;
};

enum class OutputMode { Flat, Factorized, Count };

std::string_view to_string(OutputMode m);
OutputMode parse_output_mode(std::string_view text);

struct ExecOptions {
  OutputMode mode = OutputMode::Count;
  size_t chunk_size = kDefaultChunkSize;
  // Keep every flat result tuple (row ids in query node order).
  bool materialize = false;
  // Check structural invariants as the query runs.
  bool verify = false;
  // Zero disables the budget.
  double timeout_seconds = 0;
  double bits_per_key = BitVectorFilter::kDefaultBitsPerKey;
  uint64_t hash_seed = kernels::kDefaultHashSeed;
  // Per joined relation, the order its children's filters are tested in.
  // Missing entries follow plan order.
  std::map<std::string, std::vector<std::string>> filter_order;
};

struct OpCounters {
  uint64_t hash_probes = 0;
  uint64_t bitvector_probes = 0;
  uint64_t semijoin_probes = 0;
  // Rows (STD) or entries (COM) produced by this relation's join.
  uint64_t output = 0;
};

struct ExecutionStats {
  // Indexed by query node id.
  std::vector<OpCounters> per_node;
  uint64_t hash_probes = 0;
  uint64_t bitvector_probes = 0;
  uint64_t semijoin_probes = 0;
  uint64_t emitted_tuples = 0;
  uint64_t expansion_steps = 0;
  // Bitvector tests applied before the first join.
  uint64_t initial_bitvector_probes = 0;
};

struct ResultSummary {
  OutputMode mode = OutputMode::Count;
  Strategy strategy = Strategy::STD;
  Plan plan;
  uint64_t cardinality = 0;
  // Flat tuples of base row ids, one per query node, when materialized.
  std::optional<std::vector<std::vector<uint32_t>>> rows;
  ExecutionStats stats;
  double wall_seconds = 0;
  bool timed_out = false;
  bool valid = true;
  uint64_t invariant_checks = 0;
  // Fill ratio of each bitvector built (BVP only), by node.
  std::map<std::string, double> filter_fill;
  // Factorized size (entries over all groups) summed over driver chunks.
  uint64_t factorized_entries = 0;
};

/// Bottom-up full reduction of every relation view.
struct Reduction {
  std::vector<RelationView> views;
  std::vector<std::shared_ptr<const HashTable>> tables;
  // Probes made by each parent.
  std::vector<uint64_t> semijoin_probes;
  uint64_t total_probes = 0;
};

/// `child_order[v]` is the probe order of v's children; empty selects tree order.
Reduction semi_join_reduce(const Catalog& catalog, const JoinTree& tree,
                           const std::vector<std::vector<NodeId>>& child_order = {},
                           uint64_t seed = kernels::kDefaultHashSeed);

/// Runs a left-deep plan. Semi-join strategies use `sj_plan` for phase-1
/// child order when given.
ResultSummary execute(const Catalog& catalog, const JoinGraph& graph, const Plan& plan,
                      const ExecOptions& options = {}, const SJPlan* sj_plan = nullptr);

/// Writes materialized rows as CSV with `alias.column` headers.
void write_result_csv(const Catalog& catalog, const JoinGraph& graph,
                      const std::vector<std::vector<uint32_t>>& rows, const std::filesystem::path& path);

}  // namespace mmjoin
