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

// Small graphs and random stores shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "kgrec/eval.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"

namespace kgrec::fixture {

// Users buy a few items; items carry a brand, a category, review words and
// also_bought / also_view links, so every relation kind is present.
inline KnowledgeGraph mixed_graph(std::size_t users, std::size_t items, std::uint64_t seed) {
  KnowledgeGraph g;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> item(0, items - 1), word(0, 5);
  auto ik = [](std::size_t i) { return "i" + std::to_string(i); };
  for (std::size_t u = 0; u < users; ++u) {
    const auto uk = "u" + std::to_string(u);
    for (int n = 0; n < 3; ++n) g.add_triplet(EntityKind::user, uk, RelationKind::buy, EntityKind::item, ik(item(rng)));
    g.add_triplet(EntityKind::user, uk, RelationKind::mention_word, EntityKind::word, "w" + std::to_string(word(rng)));
  }
  for (std::size_t i = 0; i < items; ++i) {
    g.add_triplet(EntityKind::item, ik(i), RelationKind::belong_to_brand, EntityKind::brand, "b" + std::to_string(i % 3));
    g.add_triplet(EntityKind::item, ik(i), RelationKind::belong_to_category, EntityKind::category,
                  "c" + std::to_string(i % 2));
    g.add_triplet(EntityKind::item, ik(i), RelationKind::mention_word, EntityKind::word, "w" + std::to_string(word(rng)));
    g.add_triplet(EntityKind::item, ik(i), RelationKind::also_bought, EntityKind::item, ik((i + 1) % items));
    g.add_triplet(EntityKind::item, ik(i), RelationKind::also_view, EntityKind::item, ik((i + 2) % items));
  }
  return g;
}

template <class Real, class Rng>
void fill_normal(BasicEmbeddingStore<Real>& s, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto k : kAllEntityKinds)
    for (Real& x : s.entity_matrix(k)) x = static_cast<Real>(n(rng));
  for (Real& x : s.relation_matrix()) x = static_cast<Real>(n(rng));
}

// Distinct entities referenced by a positive and its corruptions.
inline std::vector<EntityRef> touched_entities(const Triplet& t, const NegativeBatch& neg) {
  std::vector<EntityRef> out;
  auto add = [&](const EntityRef& e) {
    for (const auto& x : out)
      if (x == e) return;
    out.push_back(e);
  };
  add(t.head);
  add(t.tail);
  for (const auto& c : neg.tail_corruptions) add(c.tail);
  for (const auto& c : neg.head_corruptions) add(c.head);
  return out;
}

inline std::vector<Triplet> all_corruptions(const NegativeBatch& neg) {
  std::vector<Triplet> out = neg.tail_corruptions;
  out.insert(out.end(), neg.head_corruptions.begin(), neg.head_corruptions.end());
  return out;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Three users over eight items on a line (item j at 0.1 * (j + 1), users at
// the origin, zero relation), so every ranking is ascending item id minus
// the user's purchases. Evaluated at k = 3:
//   uA bought {i0}, holds out {i2, i5}: hit at rank 2 of 2 relevant
//   uB bought {i1, i2}, holds out {i0}: hit at rank 1
//   uC bought nothing, holds out {i6, i7}: no hit
struct ThreeUserFixture {
  KnowledgeGraph graph;
  BasicEmbeddingStore<double> store;
  GroundTruth truth;
  static constexpr std::size_t k = 3;

  ThreeUserFixture() {
    for (int j = 0; j < 8; ++j) graph.intern(EntityKind::item, "i" + std::to_string(j));
    for (auto u : {"uA", "uB", "uC"}) graph.intern(EntityKind::user, u);
    graph.add_triplet(EntityKind::user, "uA", RelationKind::buy, EntityKind::item, "i0");
    graph.add_triplet(EntityKind::user, "uB", RelationKind::buy, EntityKind::item, "i1");
    graph.add_triplet(EntityKind::user, "uB", RelationKind::buy, EntityKind::item, "i2");
    store = make_store<double>(graph, 1);
    for (std::uint32_t j = 0; j < 8; ++j) store.entity({EntityKind::item, j})[0] = 0.1 * (j + 1);
    const std::vector<std::pair<std::string, std::string>> held_out = {
        {"uA", "i2"}, {"uA", "i5"}, {"uB", "i0"}, {"uC", "i6"}, {"uC", "i7"}};
    truth = make_ground_truth_from_pairs(graph, held_out);
  }
};

}  // namespace kgrec::fixture
