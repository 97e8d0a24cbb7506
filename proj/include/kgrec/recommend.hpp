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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"

namespace kgrec {

struct ScoredItem {
  EntityRef item;
  double distance = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

struct RankedList {
  EntityRef user;
  std::vector<ScoredItem> items;  // ascending distance, ties by item local_id
  std::size_t cutoff = 0;
};

// Top-n items for `user` by ascending d(e_buy + e_user, e_item), skipping
// the user's training purchases.
template <class Real>
RankedList recommend_top_n(const BasicEmbeddingStore<Real>& store, const KnowledgeGraph& graph,
                           const EntityRef& user, std::size_t n) {
  if (user.kind != EntityKind::user) throw LookupError("recommend_top_n expects a user entity");
  if (!graph.vocabulary().contains(user) || !store.contains(user))
    throw LookupError("unknown user local id " + std::to_string(user.local_id));
  if (n == 0) throw ConfigError("top-n cutoff must be positive");

  const std::size_t items = store.rows(EntityKind::item);
  std::vector<char> excluded(items, 0);
  for (const auto& e : graph.tails_of(user, RelationKind::buy))
    if (e.local_id < items) excluded[e.local_id] = 1;

  const auto query = translate(store.entity(user), store.relation(RelationKind::buy));
  const std::span<const double> q(query);
  std::vector<ScoredItem> scored;
  scored.reserve(items);
  for (std::uint32_t j = 0; j < items; ++j) {
    if (excluded[j]) continue;
    const EntityRef item{EntityKind::item, j};
    scored.push_back({item, distance(q, store.entity(item))});
  }

  const std::size_t keep = std::min(n, scored.size());
  auto before = [](const ScoredItem& a, const ScoredItem& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.item.local_id < b.item.local_id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    before);
  scored.resize(keep);
  return {user, std::move(scored), n};
}

// One list per input user, in input order. threads > 1 splits users across
// workers; results are identical to the sequential path.
template <class Real>
std::vector<RankedList> recommend_all(const BasicEmbeddingStore<Real>& store,
                                      const KnowledgeGraph& graph, std::span<const EntityRef> users,
                                      std::size_t n, std::size_t threads = 1) {
  std::vector<RankedList> out(users.size());
  threads = std::max<std::size_t>(1, std::min(threads, users.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < users.size(); ++i) out[i] = recommend_top_n(store, graph, users[i], n);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < users.size(); i += threads)
          out[i] = recommend_top_n(store, graph, users[i], n);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// `user_key<TAB>rank<TAB>item_key<TAB>distance`, rank from 1, 6 decimals.
inline void write_recommendations(std::ostream& out, const KnowledgeGraph& graph,
                                  std::span<const RankedList> lists) {
  char buf[64];
  for (const auto& list : lists) {
    const auto& user_key = graph.key(list.user);
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.6f", list.items[r].distance);
      out << user_key << '\t' << (r + 1) << '\t' << graph.key(list.items[r].item) << '\t' << buf
          << '\n';
    }
  }
}

}  // namespace kgrec
