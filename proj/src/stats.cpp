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

#include "mmjoin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "key_util.hpp"
#include "mmjoin/catalog.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/querymodel.hpp"

namespace mmjoin {

ColumnSummary summarize(const Relation& relation, const std::vector<std::string>& attrs) {
  const auto cols = detail::key_columns(relation, attrs);
  std::unordered_set<detail::Key, detail::KeyHash> seen;
  for (size_t r = 0; r < relation.row_count(); ++r) seen.insert(detail::key_at(cols, r));
  return {relation.row_count(), seen.size()};
}

EdgeStats naive_stats(const ColumnSummary& r, const ColumnSummary& s, double sp) {
  if (sp < 0.0 || sp > 1.0) throw Error("predicate selectivity must lie in [0,1]");
  if (s.rows == 0 || s.distinct == 0) return {0.0, 1.0};
  const double vr = static_cast<double>(r.distinct);
  const double vs = static_cast<double>(s.distinct);
  const double rows = sp * static_cast<double>(s.rows);
  if (rows < vs) {
    const double m = vr > 0 ? std::min(rows / vr, 1.0) : 0.0;
    return {m, 1.0};
  }
  return {vs / std::max(vr, vs), rows / vs};
}

EdgeStats exact_stats(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                      const std::vector<std::string>& s_attrs) {
  if (r.row_count() == 0) return {0.0, 1.0};
  std::unordered_map<detail::Key, uint64_t, detail::KeyHash> counts;
  const auto scols = detail::key_columns(s, s_attrs);
  for (size_t i = 0; i < s.row_count(); ++i) ++counts[detail::key_at(scols, i)];
  const auto rcols = detail::key_columns(r, r_attrs);
  uint64_t matched = 0;
  uint64_t total = 0;
  for (size_t i = 0; i < r.row_count(); ++i) {
    auto it = counts.find(detail::key_at(rcols, i));
    if (it == counts.end()) continue;
    ++matched;
    total += it->second;
  }
  if (matched == 0) return {0.0, 1.0};
  return {static_cast<double>(matched) / static_cast<double>(r.row_count()),
          static_cast<double>(total) / static_cast<double>(matched)};
}

CorrelatedSample correlated_sample(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                                   const std::vector<std::string>& s_attrs, size_t sample_size, uint64_t seed) {
  if (sample_size == 0) throw Error("sample_size must be positive");
  CorrelatedSample out;
  std::mt19937_64 rng(seed);
  const size_t n = r.row_count();
  const size_t k = std::min(sample_size, n);
  std::vector<uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  out.rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  out.sample_size = k;

  const auto groups = detail::group_rows(s, s_attrs);
  const auto rcols = detail::key_columns(r, r_attrs);
  out.match_counts.reserve(k);
  out.match_samples.reserve(k);
  for (uint32_t row : out.rows) {
    auto it = groups.find(detail::key_at(rcols, row));
    if (it == groups.end()) {
      out.match_counts.push_back(0);
      out.match_samples.push_back(-1);
      continue;
    }
    out.match_counts.push_back(it->second.size());
    std::uniform_int_distribution<size_t> pick(0, it->second.size() - 1);
    out.match_samples.push_back(it->second[pick(rng)]);
  }
  return out;
}

EdgeStats sample_stats(const Relation& r, const std::vector<std::string>& r_attrs, const Relation& s,
                       const std::vector<std::string>& s_attrs, size_t sample_size, uint64_t seed) {
  if (sample_size == 0) throw Error("sample_size must be positive");
  if (r.row_count() == 0) return {0.0, 1.0};
  const CorrelatedSample cs = correlated_sample(r, r_attrs, s, s_attrs, sample_size, seed);
  uint64_t matched = 0;
  uint64_t total = 0;
  for (uint64_t c : cs.match_counts) {
    if (c == 0) continue;
    ++matched;
    total += c;
  }
  if (matched == 0) return {0.0, 1.0};
  return {static_cast<double>(matched) / static_cast<double>(cs.sample_size),
          static_cast<double>(total) / static_cast<double>(matched)};
}

double q_error(double estimate, double actual) {
  if (estimate < 0 || actual < 0) throw Error("q_error needs non-negative inputs");
  if (estimate == 0 && actual == 0) return 1.0;
  if (estimate == 0 || actual == 0) return std::numeric_limits<double>::infinity();
  return std::max(estimate / actual, actual / estimate);
}

EdgeStats adjusted_stats(const EdgeStats& base, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw Error("reduction ratio must lie in [0,1]");
  if (ratio == 0.0) return {0.0, 1.0};
  if (ratio == 1.0) return base;
  // 1-(1-r)^fo computed without cancellation for small r.
  const double hit = -std::expm1(base.fo * std::log1p(-ratio));
  return {base.m * hit, base.fo * ratio / hit};
}

void StatsSet::set(const std::string& parent, const std::string& child, EdgeStats stats) {
  if (!(stats.m >= 0.0 && stats.m <= 1.0)) throw Error("m must lie in [0,1] for " + parent + "->" + child);
  if (!(stats.fo >= 1.0)) throw Error("fo must be >= 1 for " + parent + "->" + child);
  edges_[{parent, child}] = stats;
}

std::optional<EdgeStats> StatsSet::get(std::string_view parent, std::string_view child) const {
  auto it = edges_.find({std::string(parent), std::string(child)});
  if (it == edges_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> StatsSet::cardinality(std::string_view relation) const {
  auto it = cardinality_.find(relation);
  if (it == cardinality_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Naive:
      return "naive";
    case Estimator::Sample:
      return "sample";
    case Estimator::Exact:
      return "exact";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view text) {
  if (text == "naive") return Estimator::Naive;
  if (text == "sample" || text == "sampled") return Estimator::Sample;
  if (text == "exact") return Estimator::Exact;
  throw Error("unknown estimator '" + std::string(text) + "'");
}

StatsSet estimate_stats(const Catalog& catalog, const JoinGraph& graph, const EstimatorOptions& options) {
  StatsSet out;
  for (NodeId v = 0; v < graph.size(); ++v) {
    out.set_cardinality(graph.name(v), static_cast<double>(catalog.relation(graph.base(v)).row_count()));
  }
  auto selectivity = [&](const std::string& name) {
    auto it = options.predicate_selectivity.find(name);
    return it == options.predicate_selectivity.end() ? 1.0 : it->second;
  };
  for (const auto& e : graph.edges()) {
    const Relation& ra = catalog.relation(graph.base(e.a));
    const Relation& rb = catalog.relation(graph.base(e.b));
    const std::string& na = graph.name(e.a);
    const std::string& nb = graph.name(e.b);
    switch (options.estimator) {
      case Estimator::Exact:
        out.set(na, nb, exact_stats(ra, e.attrs_a, rb, e.attrs_b));
        out.set(nb, na, exact_stats(rb, e.attrs_b, ra, e.attrs_a));
        break;
      case Estimator::Sample:
        out.set(na, nb, sample_stats(ra, e.attrs_a, rb, e.attrs_b, options.sample_size, options.seed));
        out.set(nb, na, sample_stats(rb, e.attrs_b, ra, e.attrs_a, options.sample_size, options.seed));
        break;
      case Estimator::Naive: {
        const ColumnSummary sa = summarize(ra, e.attrs_a);
        const ColumnSummary sb = summarize(rb, e.attrs_b);
        out.set(na, nb, naive_stats(sa, sb, selectivity(nb)));
        out.set(nb, na, naive_stats(sb, sa, selectivity(na)));
        break;
      }
    }
  }
  return out;
}

std::string stats_to_json(const StatsSet& stats) {
  nlohmann::ordered_json j;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, e] : stats.edges()) {
    j["edges"].push_back({{"parent", key.first}, {"child", key.second}, {"m", e.m}, {"fo", e.fo}});
  }
  j["cardinality"] = nlohmann::ordered_json::object();
  for (const auto& [name, rows] : stats.cardinalities()) j["cardinality"][name] = rows;
  return j.dump(2);
}

StatsSet parse_stats_json(std::string_view text) {
  StatsSet out;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& edges = j.is_array() ? j : j.at("edges");
    for (const auto& e : edges) {
      out.set(e.at("parent").get<std::string>(), e.at("child").get<std::string>(),
              {e.at("m").get<double>(), e.at("fo").get<double>()});
    }
    if (j.is_object() && j.contains("cardinality")) {
      for (const auto& [name, rows] : j.at("cardinality").items()) out.set_cardinality(name, rows.get<double>());
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("malformed stats JSON: ") + ex.what());
  }
  return out;
}

}  // namespace mmjoin
