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
#include <chrono>
#include <fstream>

#include "mmjoin/engine.hpp"
#include "mmjoin/error.hpp"
#include "mmjoin/factorized.hpp"

namespace mmjoin {

std::string_view to_string(OutputMode m) {
  switch (m) {
    case OutputMode::Flat:
      return "flat";
    case OutputMode::Factorized:
      return "factorized";
    case OutputMode::Count:
      return "count";
  }
  return "unknown";
}

OutputMode parse_output_mode(std::string_view text) {
  if (text == "flat") return OutputMode::Flat;
  if (text == "factorized") return OutputMode::Factorized;
  if (text == "count" || text == "count-only" || text == "count_only") return OutputMode::Count;
  throw Error("unknown output mode '" + std::string(text) + "'");
}

namespace {

/// Key values and hashes of a batch of rows of one relation.
struct KeyBatch {
  std::vector<std::vector<int64_t>> cols;
  std::vector<const int64_t*> ptrs;
  std::vector<uint64_t> hashes;

  void fill(const Relation& rel, const std::vector<std::string>& attrs, const uint32_t* rows, size_t n,
            uint64_t seed) {
    const auto& k = kernels::active();
    cols.resize(attrs.size());
    ptrs.resize(attrs.size());
    hashes.assign(n, seed);
    for (size_t a = 0; a < attrs.size(); ++a) {
      cols[a].resize(n);
      k.gather_i64(rel.column(attrs[a]).values.data(), rows, cols[a].data(), n);
      k.hash_combine(cols[a].data(), hashes.data(), n);
      ptrs[a] = cols[a].data();
    }
  }
};

class Deadline {
 public:
  explicit Deadline(double seconds) : seconds_(seconds), start_(std::chrono::steady_clock::now()) {}
  void check() const {
    if (seconds_ > 0 && elapsed() > seconds_) throw Timeout("execution exceeded " + std::to_string(seconds_) + "s");
  }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  double seconds_;
  std::chrono::steady_clock::time_point start_;
};

struct FlatChunk {
  std::vector<std::vector<uint32_t>> cols;
  size_t n = 0;
};

class Executor {
 public:
  Executor(const Catalog& catalog, const JoinTree& tree, const Plan& plan, const ExecOptions& opts,
           const SJPlan* sj_plan, ResultSummary& out)
      : catalog_(catalog), tree_(tree), opts_(opts), sj_plan_(sj_plan), out_(out), deadline_(opts.timeout_seconds) {
    if (opts.chunk_size == 0) throw Error("chunk_size must be positive");
    strategy_ = plan.strategy;
    order_ = resolve_order(tree, plan.order);
    rel_.resize(tree.size());
    for (NodeId v = 0; v < tree.size(); ++v) rel_[v] = &catalog.relation(tree.base(v));
    out_.stats.per_node.assign(tree.size(), {});
    pushed_.assign(order_.size() + 1, 0);
  }

  void run() {
    const size_t n = tree_.size();
    std::vector<RelationView> views(n);
    for (NodeId v = 0; v < n; ++v) views[v].relation = rel_[v];
    tables_.assign(n, nullptr);

    if (uses_sj(strategy_)) {
      std::vector<std::vector<NodeId>> kids;
      if (sj_plan_) kids = resolve_child_order(tree_, *sj_plan_);
      Reduction red = semi_join_reduce(catalog_, tree_, kids, opts_.hash_seed);
      for (NodeId v = 0; v < n; ++v) out_.stats.per_node[v].semijoin_probes = red.semijoin_probes[v];
      out_.stats.semijoin_probes = red.total_probes;
      views = std::move(red.views);
      tables_ = std::move(red.tables);
      deadline_.check();
    } else {
      for (NodeId v = 0; v < n; ++v) {
        if (v == tree_.root()) continue;
        tables_[v] = std::make_shared<HashTable>(views[v], tree_.child_attrs(v), opts_.hash_seed);
      }
    }
    if (opts_.verify) {
      for (const auto& t : tables_) {
        if (!t) continue;
        if (t->reachable_rows() != t->size()) throw InvariantViolation("hash chains do not cover every build row");
        ++out_.invariant_checks;
      }
    }

    filters_.assign(n, std::nullopt);
    if (uses_bvp(strategy_)) {
      for (NodeId v = 0; v < n; ++v) {
        if (v == tree_.root()) continue;
        filters_[v].emplace(views[v], tree_.child_attrs(v), opts_.bits_per_key, opts_.hash_seed);
        out_.filter_fill[tree_.name(v)] = filters_[v]->fill_ratio();
      }
    }
    setup_filter_order();

    const RelationView& driver = views[tree_.root()];
    if (opts_.materialize) out_.rows.emplace();
    for (size_t start = 0; start < driver.size(); start += opts_.chunk_size) {
      deadline_.check();
      const size_t len = std::min(opts_.chunk_size, driver.size() - start);
      std::vector<uint32_t> rows(len);
      for (size_t i = 0; i < len; ++i) rows[i] = driver.row(start + i);
      if (uses_com(strategy_)) {
        run_com_chunk(std::move(rows));
      } else {
        run_std_chunk(std::move(rows));
      }
    }
    if (opts_.verify && !uses_com(strategy_)) {
      for (size_t k = 0; k < order_.size(); ++k) {
        if (out_.stats.per_node[order_[k]].hash_probes != pushed_[k]) {
          throw InvariantViolation("flat pipeline probes differ from upstream output rows");
        }
        ++out_.invariant_checks;
      }
    }
    finish_totals();
  }

  void finish_totals() {
    auto& st = out_.stats;
    st.hash_probes = 0;
    st.bitvector_probes = 0;
    for (const auto& op : st.per_node) {
      st.hash_probes += op.hash_probes;
      st.bitvector_probes += op.bitvector_probes;
    }
    out_.cardinality = st.emitted_tuples;
  }

 private:
  void setup_filter_order() {
    std::vector<size_t> position(tree_.size(), 0);
    for (size_t k = 0; k < order_.size(); ++k) position[order_[k]] = k;
    filter_order_.assign(tree_.size(), {});
    for (NodeId v = 0; v < tree_.size(); ++v) {
      auto kids = tree_.children(v);
      std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) { return position[a] < position[b]; });
      auto it = opts_.filter_order.find(tree_.name(v));
      if (it != opts_.filter_order.end()) {
        std::vector<NodeId> given;
        for (const auto& name : it->second) given.push_back(tree_.id_of(name));
        auto a = given, b = kids;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) throw QueryError(QueryErrorCode::InvalidPlan, "filter order for " + it->first + " is not a permutation of its children");
        kids = std::move(given);
      }
      filter_order_[v] = std::move(kids);
    }
  }

  // Tests the filters of `joined`'s children on rows of `joined`; keeps only
  // passing rows.
  void filter_flat(NodeId joined, FlatChunk& chunk) {
    if (!uses_bvp(strategy_)) return;
    for (NodeId c : filter_order_[joined]) {
      if (chunk.n == 0) return;
      keys_.fill(*rel_[joined], tree_.parent_attrs(c), chunk.cols[joined].data(), chunk.n, opts_.hash_seed);
      std::vector<uint8_t> pass(chunk.n, 1);
      filters_[c]->test_batch(keys_.hashes.data(), pass.data(), chunk.n);
      out_.stats.per_node[c].bitvector_probes += chunk.n;
      if (joined == tree_.root()) out_.stats.initial_bitvector_probes += chunk.n;
      size_t w = 0;
      for (size_t i = 0; i < chunk.n; ++i) {
        if (!pass[i]) continue;
        for (auto& col : chunk.cols) {
          if (!col.empty()) col[w] = col[i];
        }
        ++w;
      }
      for (auto& col : chunk.cols) {
        if (!col.empty()) col.resize(w);
      }
      chunk.n = w;
    }
  }

  void run_std_chunk(std::vector<uint32_t> rows) {
    FlatChunk chunk;
    chunk.cols.assign(tree_.size(), {});
    chunk.n = rows.size();
    chunk.cols[tree_.root()] = std::move(rows);
    filter_flat(tree_.root(), chunk);
    pushed_[0] += chunk.n;
    push_std(0, chunk);
  }

  void emit_flat(const std::vector<std::vector<uint32_t>>& cols, size_t n) {
    out_.stats.emitted_tuples += n;
    if (!out_.rows) return;
    for (size_t i = 0; i < n; ++i) {
      std::vector<uint32_t> t(tree_.size());
      for (NodeId v = 0; v < tree_.size(); ++v) t[v] = cols[v][i];
      out_.rows->push_back(std::move(t));
    }
  }

  void push_std(size_t k, FlatChunk& chunk) {
    if (chunk.n == 0) return;
    if (k == order_.size()) {
      emit_flat(chunk.cols, chunk.n);
      return;
    }
    deadline_.check();
    const NodeId x = order_[k];
    const NodeId p = tree_.parent(x);
    KeyBatch keys;
    keys.fill(*rel_[p], tree_.parent_attrs(x), chunk.cols[p].data(), chunk.n, opts_.hash_seed);
    std::vector<uint32_t> counts(chunk.n);
    std::vector<uint32_t> matches;
    out_.stats.per_node[x].hash_probes +=
        tables_[x]->probe(keys.hashes.data(), keys.ptrs, nullptr, chunk.n, counts.data(), matches);

    FlatChunk next;
    next.cols.assign(tree_.size(), {});
    std::vector<NodeId> placed{tree_.root()};
    for (size_t j = 0; j < k; ++j) placed.push_back(order_[j]);
    auto flush = [&] {
      out_.stats.per_node[x].output += next.n;
      filter_flat(x, next);
      pushed_[k + 1] += next.n;
      push_std(k + 1, next);
      for (auto& col : next.cols) col.clear();
      next.n = 0;
    };
    size_t m = 0;
    for (size_t i = 0; i < chunk.n; ++i) {
      for (uint32_t c = 0; c < counts[i]; ++c, ++m) {
        for (NodeId v : placed) next.cols[v].push_back(chunk.cols[v][i]);
        next.cols[x].push_back(matches[m]);
        if (++next.n == opts_.chunk_size) flush();
      }
    }
    if (next.n > 0) flush();
  }

  void filter_com(FactorizedChunk& fc, NodeId joined) {
    if (!uses_bvp(strategy_)) return;
    const int g = fc.group_of(joined);
    for (NodeId c : filter_order_[joined]) {
      const ColumnGroup& grp = fc.group(g);
      const size_t n = grp.size();
      if (n == 0) return;
      std::vector<uint8_t> tested = grp.live;
      std::vector<uint8_t> pass = tested;
      keys_.fill(*rel_[joined], tree_.parent_attrs(c), grp.rows.data(), n, opts_.hash_seed);
      filters_[c]->test_batch(keys_.hashes.data(), pass.data(), n);
      const size_t tests = static_cast<size_t>(std::count(tested.begin(), tested.end(), 1));
      out_.stats.per_node[c].bitvector_probes += tests;
      if (joined == tree_.root()) out_.stats.initial_bitvector_probes += tests;
      fc.apply_filter(g, tested, pass);
      fc.recompute_liveness();
    }
  }

  void run_com_chunk(std::vector<uint32_t> rows) {
    FactorizedChunk fc(tree_.root(), std::move(rows), tree_.size());
    filter_com(fc, tree_.root());
    for (NodeId x : order_) {
      deadline_.check();
      const NodeId p = tree_.parent(x);
      const int gp = fc.group_of(p);
      const ColumnGroup& key_group = fc.group(gp);
      const size_t n = key_group.size();
      std::vector<uint8_t> active = key_group.live;
      const size_t live = static_cast<size_t>(std::count(active.begin(), active.end(), 1));
      keys_.fill(*rel_[p], tree_.parent_attrs(x), key_group.rows.data(), n, opts_.hash_seed);
      std::vector<uint32_t> counts(n);
      std::vector<uint32_t> matches;
      const size_t probes = tables_[x]->probe(keys_.hashes.data(), keys_.ptrs, active.data(), n, counts.data(), matches);
      if (opts_.verify) {
        if (probes != live) throw InvariantViolation("factorized probes differ from live entries of the key group");
        ++out_.invariant_checks;
      }
      out_.stats.per_node[x].hash_probes += probes;
      out_.stats.per_node[x].output += matches.size();
      fc.add_group(x, gp, std::move(counts), std::move(active), std::move(matches));
      fc.recompute_liveness();
      filter_com(fc, x);
      if (opts_.verify) out_.invariant_checks += fc.check_invariants();
    }
    out_.factorized_entries += fc.total_entries();
    if (opts_.mode == OutputMode::Flat) {
      const uint64_t emitted = fc.expand(
          opts_.chunk_size, [&](const std::vector<std::vector<uint32_t>>& cols, size_t k) { emit_flat(cols, k); });
      out_.stats.expansion_steps += emitted;
      if (opts_.verify) {
        if (emitted != fc.count_tuples()) throw InvariantViolation("expansion differs from the factorized count");
        ++out_.invariant_checks;
      }
    } else {
      out_.stats.emitted_tuples += fc.count_tuples();
    }
  }

  const Catalog& catalog_;
  const JoinTree& tree_;
  const ExecOptions& opts_;
  const SJPlan* sj_plan_;
  ResultSummary& out_;
  Deadline deadline_;
  Strategy strategy_ = Strategy::STD;
  std::vector<NodeId> order_;
  std::vector<const Relation*> rel_;
  std::vector<std::shared_ptr<const HashTable>> tables_;
  std::vector<std::optional<BitVectorFilter>> filters_;
  std::vector<std::vector<NodeId>> filter_order_;
  std::vector<uint64_t> pushed_;
  KeyBatch keys_;
};

}  // namespace

Reduction semi_join_reduce(const Catalog& catalog, const JoinTree& tree,
                           const std::vector<std::vector<NodeId>>& child_order, uint64_t seed) {
  const size_t n = tree.size();
  Reduction red;
  red.views.resize(n);
  red.tables.assign(n, nullptr);
  red.semijoin_probes.assign(n, 0);
  for (NodeId v = 0; v < n; ++v) red.views[v].relation = &catalog.relation(tree.base(v));

  constexpr size_t kBatch = kDefaultChunkSize;
  KeyBatch keys;
  for (NodeId v : tree.postorder()) {
    const auto& kids = child_order.empty() ? tree.children(v) : child_order.at(v);
    if (!kids.empty()) {
      const Relation& rel = *red.views[v].relation;
      std::vector<uint32_t> survivors;
      std::vector<uint32_t> rows;
      std::vector<uint8_t> active;
      for (size_t start = 0; start < rel.row_count(); start += kBatch) {
        const size_t len = std::min(kBatch, rel.row_count() - start);
        rows.resize(len);
        for (size_t i = 0; i < len; ++i) rows[i] = static_cast<uint32_t>(start + i);
        active.assign(len, 1);
        for (NodeId c : kids) {
          keys.fill(rel, tree.parent_attrs(c), rows.data(), len, seed);
          red.semijoin_probes[v] += red.tables[c]->semi_probe(keys.hashes.data(), keys.ptrs, active.data(), len);
        }
        for (size_t i = 0; i < len; ++i) {
          if (active[i]) survivors.push_back(rows[i]);
        }
      }
      red.views[v].rows = std::move(survivors);
      red.total_probes += red.semijoin_probes[v];
    }
    if (v != tree.root()) red.tables[v] = std::make_shared<HashTable>(red.views[v], tree.child_attrs(v), seed);
  }
  return red;
}

ResultSummary execute(const Catalog& catalog, const JoinGraph& graph, const Plan& plan, const ExecOptions& options,
                      const SJPlan* sj_plan) {
  if (graph.size() > kMaxNodes) throw TooManyRelations("too many relations");
  const std::string driver = plan.driver.empty() ? graph.name(0) : plan.driver;
  const JoinTree tree = root_at(graph, driver);
  if (sj_plan && !sj_plan->driver.empty() && sj_plan->driver != driver) {
    throw QueryError(QueryErrorCode::InvalidPlan, "semi-join plan driver differs from the plan driver");
  }
  ResultSummary out;
  out.mode = options.mode;
  out.strategy = plan.strategy;
  out.plan = plan;
  out.plan.driver = driver;
  Executor ex(catalog, tree, out.plan, options, sj_plan, out);
  const auto start = std::chrono::steady_clock::now();
  try {
    ex.run();
  } catch (const Timeout&) {
    ex.finish_totals();
    out.timed_out = true;
    out.valid = false;
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_result_csv(const Catalog& catalog, const JoinGraph& graph, const std::vector<std::vector<uint32_t>>& rows,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  bool first = true;
  for (NodeId v = 0; v < graph.size(); ++v) {
    for (const auto& col : catalog.relation(graph.base(v)).columns()) {
      os << (first ? "" : ",") << graph.name(v) << "." << col.name;
      first = false;
    }
  }
  os << "\n";
  for (const auto& t : rows) {
    first = true;
    for (NodeId v = 0; v < graph.size(); ++v) {
      const Relation& rel = catalog.relation(graph.base(v));
      for (const auto& col : rel.columns()) {
        os << (first ? "" : ",");
        first = false;
        const int64_t value = col.values[t[v]];
        if (col.type == ColumnType::Utf8Dict) {
          const Dictionary* dict = catalog.dictionary(graph.base(v), col.name);
          const std::string& s = dict ? dict->decode(value) : std::to_string(value);
          if (s.find_first_of(",\"\n") != std::string::npos) {
            os << '"';
            for (char ch : s) os << (ch == '"' ? "\"\"" : std::string(1, ch));
            os << '"';
          } else {
            os << s;
          }
        } else {
          os << value;
        }
      }
    }
    os << "\n";
  }
}

}  // namespace mmjoin
