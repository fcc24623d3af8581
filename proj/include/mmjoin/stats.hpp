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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmjoin {

class Catalog;
class Relation;
class JoinGraph;

/// Match probability and fanout for one probe direction (parent probing child).
struct EdgeStats {
  double m = 1.0;
  double fo = 1.0;
  double s() const { return m * fo; }
  bool operator==(const EdgeStats&) const = default;
};

struct ColumnSummary {
  size_t rows = 0;
  size_t distinct = 0;
};

/// Row count and number of distinct (possibly composite) key values.
ColumnSummary summarize(const Relation& relation, const std::vector<std::string>& attrs);

/// Uniformity/independence estimate for R probing S. `sp` is the predicate
/// selectivity applied to S.
EdgeStats naive_stats(const ColumnSummary& r, const ColumnSummary& s, double sp = 1.0);

/// Exhaustive m and fo of R probing S.
EdgeStats exact_stats(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                      const std::vector<std::string>& s_attrs);

/// Per-row match information for a uniform sample of R.
struct CorrelatedSample {
  std::vector<uint32_t> rows;
  std::vector<uint64_t> match_counts;
  // One uniformly drawn matching row of S per sampled row; -1 if none.
  std::vector<int64_t> match_samples;
  size_t sample_size = 0;
};

CorrelatedSample correlated_sample(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                                   const std::vector<std::string>& s_attrs, size_t sample_size, uint64_t seed);

EdgeStats sample_stats(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                       const std::vector<std::string>& s_attrs, size_t sample_size, uint64_t seed);

inline EdgeStats sample_stats(const Relation& r, const Relation& s, const std::string& attr, size_t sample_size,
                              uint64_t seed) {
  return sample_stats(r, {attr}, s, {attr}, sample_size, seed);
}

/// max(est/actual, actual/est); 1 for (0,0); +inf when only actual is 0.
double q_error(double estimate, double actual);

/// Stats of a parent probing a child whose tuples survive independently with
/// probability `ratio`.
EdgeStats adjusted_stats(const EdgeStats& base, double ratio);

/// Directed per-edge statistics keyed by relation name, plus cardinalities.
class StatsSet {
 public:
  void set(const std::string& parent, const std::string& child, EdgeStats stats);
  std::optional<EdgeStats> get(std::string_view parent, std::string_view child) const;
  const std::map<std::pair<std::string, std::string>, EdgeStats>& edges() const { return edges_; }

  void set_cardinality(const std::string& relation, double rows) { cardinality_[relation] = rows; }
  std::optional<double> cardinality(std::string_view relation) const;
  const std::map<std::string, double, std::less<>>& cardinalities() const { return cardinality_; }

 private:
  std::map<std::pair<std::string, std::string>, EdgeStats> edges_;
  std::map<std::string, double, std::less<>> cardinality_;
};

enum class Estimator { Naive, Sample, Exact };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view text);

struct EstimatorOptions {
  Estimator estimator = Estimator::Exact;
  size_t sample_size = 1000;
  uint64_t seed = 1;
  // Per-relation predicate selectivity, used by the naive estimator.
  std::map<std::string, double> predicate_selectivity;
};

/// Both directions of every graph edge plus every relation's cardinality.
StatsSet estimate_stats(const Catalog& catalog, const JoinGraph& graph, const EstimatorOptions& options);

/// `{"edges":[{"parent","child","m","fo"}...], "cardinality":{...}}`
std::string stats_to_json(const StatsSet& stats);
StatsSet parse_stats_json(std::string_view text);

}  // namespace mmjoin
