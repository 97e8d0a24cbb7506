/*
 * Copyright (c) 2026, kgrec authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"
#include "kgrec/recommend.hpp"

namespace kgrec {

struct TopKMetrics {
  double ndcg = 0.0;
  double recall = 0.0;
  double hit = 0.0;
  double precision = 0.0;
};

// Binary-relevance metrics over the first k entries of `ranked`.
// DCG discounts a hit at rank r by 1/log2(r + 1); the ideal ranking places
// min(k, |relevant|) hits at the top.
template <class Id, class Set>
TopKMetrics metrics_at_k(std::span<const Id> ranked, const Set& relevant, std::size_t k) {
  if (k == 0) throw ContractError("metrics_at_k: k must be positive");
  if (relevant.empty()) throw ContractError("metrics_at_k: empty relevant set");
  double dcg = 0.0;
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (!relevant.contains(ranked[i])) continue;
    ++hits;
    dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, static_cast<std::size_t>(relevant.size()));
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);

  TopKMetrics m;
  m.ndcg = dcg / idcg;
  m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  m.hit = hits > 0 ? 1.0 : 0.0;
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  return m;
}

// Held-out purchases keyed by user local id.
struct GroundTruth {
  std::map<std::uint32_t, std::set<std::uint32_t>> items_by_user;
  // Test pairs whose user or item never made it into the graph.
  std::size_t unknown_users = 0;
  std::size_t unknown_items = 0;
};

template <class Pairs>
GroundTruth make_ground_truth_from_pairs(const KnowledgeGraph& graph, const Pairs& pairs) {
  GroundTruth truth;
  for (const auto& [user_key, item_key] : pairs) {
    auto user = graph.find(EntityKind::user, user_key);
    if (!user) {
      ++truth.unknown_users;
      continue;
    }
    auto item = graph.find(EntityKind::item, item_key);
    if (!item) {
      ++truth.unknown_items;
      continue;
    }
    truth.items_by_user[user->local_id].insert(item->local_id);
  }
  return truth;
}

inline GroundTruth make_ground_truth(const KnowledgeGraph& graph,
                                     std::span<const InteractionRecord> test) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(test.size());
  for (const auto& r : test) pairs.emplace_back(r.user_key, r.item_key);
  return make_ground_truth_from_pairs(graph, pairs);
}

// Throws LeakageError if any held-out pair is a buy triplet of the graph.
inline void check_no_leakage(const KnowledgeGraph& graph, const GroundTruth& truth) {
  for (const auto& [user, items] : truth.items_by_user) {
    for (auto item : items) {
      const Triplet t{{EntityKind::user, user}, RelationKind::buy, {EntityKind::item, item}};
      if (graph.contains(t))
        throw LeakageError("held-out pair (" + graph.key(t.head) + ", " + graph.key(t.tail) +
                           ") is a training buy triplet");
    }
  }
}

struct EvalReport {
  // Means over evaluated users, in percent.
  double ndcg = 0.0;
  double recall = 0.0;
  double hit_ratio = 0.0;
  double precision = 0.0;
  std::size_t k = 10;
  std::size_t users_evaluated = 0;
  std::string subset = "all";
  std::uint64_t seed = 0;
  Hyperparams hyperparams;
  double wall_seconds = 0.0;
};

template <class Real>
EvalReport evaluate(const BasicEmbeddingStore<Real>& store, const KnowledgeGraph& graph,
                    const GroundTruth& truth, std::size_t k = 10, std::size_t threads = 1) {
  const auto start = std::chrono::steady_clock::now();
  if (k == 0) throw ConfigError("evaluation cutoff k must be positive");
  check_no_leakage(graph, truth);

  std::vector<EntityRef> users;
  std::vector<const std::set<std::uint32_t>*> relevant;
  for (const auto& [user, items] : truth.items_by_user) {
    if (items.empty()) continue;
    users.push_back({EntityKind::user, user});
    relevant.push_back(&items);
  }
  if (users.empty()) throw EvaluationError("no users with held-out items to evaluate");

  const auto lists = recommend_all(store, graph, std::span<const EntityRef>(users), k, threads);

  double ndcg = 0, recall = 0, hit = 0, precision = 0;
  std::vector<std::uint32_t> ids;
  for (std::size_t u = 0; u < users.size(); ++u) {
    ids.clear();
    for (const auto& s : lists[u].items) ids.push_back(s.item.local_id);
    const auto m = metrics_at_k(std::span<const std::uint32_t>(ids), *relevant[u], k);
    ndcg += m.ndcg;
    recall += m.recall;
    hit += m.hit;
    precision += m.precision;
  }
  const double n = static_cast<double>(users.size());
  EvalReport report;
  report.ndcg = 100.0 * ndcg / n;
  report.recall = 100.0 * recall / n;
  report.hit_ratio = 100.0 * hit / n;
  report.precision = 100.0 * precision / n;
  report.k = k;
  report.users_evaluated = users.size();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct AblationRow {
  RelationSet subset;
  EvalReport report;
};

// The rows of the relation ablation table: buy alone, buy plus each other
// relation, and everything.
inline std::vector<RelationSet> default_ablation_subsets() {
  using R = RelationKind;
  return {RelationSet{R::buy},
          RelationSet{R::buy, R::belong_to_category},
          RelationSet{R::buy, R::belong_to_brand},
          RelationSet{R::buy, R::mention_word},
          RelationSet{R::buy, R::also_view},
          RelationSet{R::buy, R::also_bought},
          RelationSet::all()};
}

inline void require_buy(std::span<const RelationSet> subsets) {
  for (const auto& s : subsets)
    if (!s.contains(RelationKind::buy))
      throw ConfigError("relation subset '" + to_label(s) + "' omits buy");
}

// Builds, trains and evaluates one model per relation subset over the same
// split and seed. Rows come back in subset order.
inline std::vector<AblationRow> ablate(std::span<const InteractionRecord> train,
                                       std::span<const InteractionRecord> test,
                                       std::span<const ItemMetaRecord> meta,
                                       const TokenizerConfig& tokenizer,
                                       std::span<const RelationSet> subsets, const Hyperparams& hp,
                                       std::size_t k = 10) {
  require_buy(subsets);
  hp.validate();
  std::vector<AblationRow> rows;
  for (const auto& subset : subsets) {
    const auto start = std::chrono::steady_clock::now();
    auto built = build_graph(train, meta, tokenizer, subset);
    auto trained = kgrec::train(built.graph, hp);
    auto truth = make_ground_truth(built.graph, test);
    auto report = evaluate(trained.store, built.graph, truth, k, hp.threads);
    report.subset = to_label(subset);
    report.seed = hp.seed;
    report.hyperparams = hp;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back({subset, std::move(report)});
  }
  return rows;
}

// Aligned table with NDCG / Recall / HT / Prec columns (percent, 3 decimals).
inline void write_report_table(std::ostream& out, std::span<const EvalReport> reports) {
  std::size_t width = 9;
  for (const auto& r : reports) width = std::max(width, r.subset.size());
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s", static_cast<int>(width), "Relations",
                "NDCG", "Recall", "HT", "Prec");
  out << buf << '\n';
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s %9.3f %9.3f %9.3f %9.3f", static_cast<int>(width),
                  r.subset.c_str(), r.ndcg, r.recall, r.hit_ratio, r.precision);
    out << buf << '\n';
  }
}

// `subset<TAB>k<TAB>ndcg<TAB>recall<TAB>hit<TAB>precision<TAB>users<TAB>seed`
inline void write_report_record(std::ostream& out, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%zu\t%llu", r.subset.c_str(),
                r.k, r.ndcg, r.recall, r.hit_ratio, r.precision, r.users_evaluated,
                static_cast<unsigned long long>(r.seed));
  out << buf << '\n';
}

}  // namespace kgrec
