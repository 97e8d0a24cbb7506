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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "kgrec/ingest.hpp"
#include "kgrec/model.hpp"
#include "kgrec/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace kgrec;

namespace {

constexpr auto U = EntityKind::user;
constexpr auto I = EntityKind::item;

Hyperparams small_hp(std::size_t dim = 8, std::uint64_t seed = 1) {
  Hyperparams hp;
  hp.dim = dim;
  hp.seed = seed;
  return hp;
}

KnowledgeGraph planted_graph(std::uint64_t seed = 42) {
  PlantedSpec spec;
  spec.seed = seed;
  const auto data = make_planted(spec);
  SplitSpec split;
  split.seed = seed;
  const auto s = split_interactions(data.interactions, split);
  return build_graph(s.train, data.meta, TokenizerConfig{}).graph;
}

double row_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Init, DeterministicForSeed) {
  const auto g = fixture::mixed_graph(10, 20, 1);
  const auto a = init_embeddings(g, small_hp(16, 9));
  const auto b = init_embeddings(g, small_hp(16, 9));
  const auto c = init_embeddings(g, small_hp(16, 10));
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_FALSE(bit_equal(a, c));
}

TEST(Init, RawDrawsInOpenUnitIntervalWithMeanHalf) {
  // 5 kinds x rows x 64 columns; enough rows for 10^6 coordinates.
  KnowledgeGraph g;
  for (int u = 0; u < 8000; ++u)
    g.add_triplet(U, "u" + std::to_string(u), RelationKind::buy, I, "i" + std::to_string(u % 7700));
  auto hp = small_hp(64, 3);
  hp.normalize_entities = false;
  const auto s = init_embeddings(g, hp);
  double sum = 0.0;
  std::size_t n = 0;
  auto visit = [&](std::span<const float> m) {
    for (float x : m) {
      ASSERT_GT(x, 0.0f);
      ASSERT_LT(x, 1.0f);
      sum += x;
      ++n;
    }
  };
  for (auto k : kAllEntityKinds) visit(s.entity_matrix(k));
  visit(s.relation_matrix());
  ASSERT_GE(n, 1'000'000u);
  EXPECT_NEAR(sum / static_cast<double>(n), 0.5, 0.01);
}

TEST(Init, NormalizedRowsHaveUnitNorm) {
  const auto g = fixture::mixed_graph(10, 20, 1);
  const auto s = init_embeddings(g, small_hp(16));
  for (auto k : kAllEntityKinds)
    for (std::uint32_t r = 0; r < s.rows(k); ++r) EXPECT_NEAR(row_norm(s.entity({k, r})), 1.0, 1e-6);
}

TEST(Init, Errors) {
  const auto g = fixture::mixed_graph(3, 4, 1);
  EXPECT_THROW(init_embeddings(g, small_hp(0)), ConfigError);
  EXPECT_THROW(init_embeddings(KnowledgeGraph{}, small_hp()), ConfigError);
  auto hp = small_hp();
  hp.learning_rate = 0;
  EXPECT_THROW(init_embeddings(g, hp), ConfigError);
}

TEST(VectorOps, TranslateExamples) {
  const std::vector<double> a{1, 0}, b{0, 1}, z{0, 0};
  EXPECT_EQ(translate(std::span<const double>(a), std::span<const double>(b)), (std::vector<double>{1, 1}));
  EXPECT_EQ(translate(std::span<const double>(a), std::span<const double>(z)), a);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(translate(std::span<const double>(a), std::span<const double>(three)), ContractError);
}

TEST(VectorOps, TranslateMatchesScalarLoop) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  std::vector<float> h(300), r(300);
  for (auto& x : h) x = n(rng);
  for (auto& x : r) x = n(rng);
  const auto got = translate(std::span<const float>(h), std::span<const float>(r));
  for (std::size_t c = 0; c < 300; ++c) ASSERT_EQ(got[c], double(h[c]) + double(r[c]));
}

TEST(VectorOps, DistanceExamples) {
  const std::vector<double> o{0, 0}, p{3, 4};
  EXPECT_EQ(distance(std::span<const double>(o), std::span<const double>(p)), 5.0);
  EXPECT_EQ(distance(std::span<const double>(p), std::span<const double>(p)), 0.0);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(distance(std::span<const double>(o), std::span<const double>(three)), ContractError);
}

TEST(VectorOps, DistanceMatchesExtendedPrecision) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + trial % 300), b(a.size());
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng) * 1e3;
    const double got = distance(std::span<const double>(a), std::span<const double>(b));
    const long double ref = oracle::extended_distance(a, b);
    ASSERT_LE(std::abs(static_cast<long double>(got) - ref), 1e-13L * ref);
  }
}

TEST(VectorOps, TripletDistanceExamples) {
  KnowledgeGraph g;
  g.add_triplet(U, "u", RelationKind::buy, I, "i");
  g.intern(I, "j");
  auto s = make_store<double>(g, 2);
  const Triplet t{{U, 0}, RelationKind::buy, {I, 0}};
  std::ranges::copy(std::vector<double>{1, 0}, s.entity(t.head).begin());
  std::ranges::copy(std::vector<double>{0, 1}, s.relation(RelationKind::buy).begin());
  std::ranges::copy(std::vector<double>{1, 1}, s.entity(t.tail).begin());
  EXPECT_EQ(triplet_distance(s, t), 0.0);

  // Zero relation, equal head and tail.
  std::ranges::fill(s.relation(RelationKind::buy), 0.0);
  std::ranges::copy(std::vector<double>{1, 0}, s.entity(t.tail).begin());
  EXPECT_EQ(triplet_distance(s, t), 0.0);

  EXPECT_THROW(triplet_distance(s, Triplet{{U, 0}, RelationKind::buy, {I, 7}}), LookupError);
}

TEST(VectorOps, TripletDistanceComposes) {
  const auto g = fixture::mixed_graph(10, 15, 4);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = make_store<float>(g, 12);
    fixture::fill_normal(s, rng);
    for (const auto& t : g.triplets()) {
      const auto q = translate(s.entity(t.head), s.relation(t.relation));
      ASSERT_EQ(triplet_distance(s, t), distance(std::span<const double>(q), s.entity(t.tail)));
      ASSERT_NEAR(triplet_distance(s, t), oracle::scalar_triplet_distance(s, t), 1e-12);
    }
  }
}

TEST(VectorOps, ZeroDistanceIffTranslated) {
  const auto g = fixture::mixed_graph(4, 6, 5);
  std::mt19937_64 rng(5);
  auto s = make_store<double>(g, 6);
  fixture::fill_normal(s, rng);
  const auto& t = g.triplets().front();
  EXPECT_GT(triplet_distance(s, t), 0.0);
  auto h = s.entity(t.head);
  auto r = s.relation(t.relation);
  auto tail = s.entity(t.tail);
  for (std::size_t c = 0; c < s.dim(); ++c) tail[c] = r[c] + h[c];
  EXPECT_EQ(triplet_distance(s, t), 0.0);
  tail[0] += 1e-9;
  EXPECT_GT(triplet_distance(s, t), 0.0);
}

TEST(Sampler, CardinalityAndKinds) {
  const auto g = fixture::mixed_graph(8, 12, 6);
  auto hp = small_hp();
  hp.negatives = 2;
  std::mt19937_64 rng(6);
  const auto& buy = g.relation_triplets(RelationKind::buy);
  const auto neg = sample_negatives(g, buy.front(), hp, rng);
  ASSERT_EQ(neg.tail_corruptions.size(), 2u);
  ASSERT_EQ(neg.head_corruptions.size(), 2u);
  for (const auto& c : neg.tail_corruptions) {
    EXPECT_EQ(c.tail.kind, I);
    EXPECT_EQ(c.head, buy.front().head);
  }
  for (const auto& c : neg.head_corruptions) {
    EXPECT_EQ(c.head.kind, U);
    EXPECT_EQ(c.tail, buy.front().tail);
  }
}

TEST(Sampler, FilteredNeverReturnsObservedTriplets) {
  const auto g = fixture::mixed_graph(8, 12, 7);
  auto hp = small_hp();
  hp.negatives = 5;
  std::mt19937_64 rng(7);
  for (const auto& t : g.triplets()) {
    const auto neg = sample_negatives(g, t, hp, rng);
    ASSERT_EQ(neg.unfiltered_fallbacks, 0u);
    for (const auto& c : fixture::all_corruptions(neg)) {
      ASSERT_FALSE(g.contains(c));
      ASSERT_NE(c, t);
      ASSERT_EQ(c.head.kind, t.head.kind);
      ASSERT_EQ(c.tail.kind, t.tail.kind);
    }
  }
}

TEST(Sampler, UniformOverTenItems) {
  KnowledgeGraph g;
  for (int i = 0; i < 10; ++i) g.add_triplet(U, "u" + std::to_string(i % 2), RelationKind::buy, I, "i" + std::to_string(i));
  auto hp = small_hp();
  hp.negatives = 1;
  hp.filtered_sampling = false;
  std::mt19937_64 rng(8);
  const Triplet t = g.triplets().front();
  std::map<std::uint32_t, int> counts;
  constexpr int draws = 100000;
  for (int n = 0; n < draws; ++n) ++counts[sample_negatives(g, t, hp, rng).tail_corruptions[0].tail.local_id];
  ASSERT_EQ(counts.size(), 10u);
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (const auto& [id, c] : counts) EXPECT_LE(std::abs(c - draws / 10.0), 5 * sigma) << id;
}

TEST(Sampler, UntypedModeDrawsFromAllEntities) {
  const auto g = fixture::mixed_graph(6, 10, 9);
  auto hp = small_hp();
  hp.type_constrained_sampling = false;
  hp.filtered_sampling = false;
  hp.negatives = 50;
  std::mt19937_64 rng(9);
  const auto neg = sample_negatives(g, g.relation_triplets(RelationKind::buy).front(), hp, rng);
  std::set<EntityKind> kinds;
  for (const auto& c : neg.tail_corruptions) kinds.insert(c.tail.kind);
  for (const auto& c : neg.head_corruptions) kinds.insert(c.head.kind);
  EXPECT_EQ(kinds.size(), kEntityKindCount);
}

TEST(Sampler, RetryBudgetFallbackIsCounted) {
  // Every user bought every item: no filtered corruption exists.
  KnowledgeGraph g;
  for (auto u : {"u0", "u1"})
    for (auto i : {"i0", "i1"}) g.add_triplet(U, u, RelationKind::buy, I, i);
  auto hp = small_hp();
  hp.negatives = 3;
  std::mt19937_64 rng(10);
  const auto neg = sample_negatives(g, g.triplets().front(), hp, rng);
  EXPECT_EQ(neg.unfiltered_fallbacks, 6u);
  EXPECT_EQ(neg.tail_corruptions.size(), 3u);
}

TEST(Sampler, TinyPoolIsAnError) {
  KnowledgeGraph g;
  g.add_triplet(U, "u0", RelationKind::buy, I, "i0");
  g.intern(I, "i1");
  std::mt19937_64 rng(11);
  EXPECT_THROW(sample_negatives(g, g.triplets().front(), small_hp(), rng), SamplingError);
}

TEST(Loss, MarginExamples) {
  // 1-d store: head at 0, relation 0, so distances are |tail|.
  KnowledgeGraph g;
  g.add_triplet(U, "u", RelationKind::buy, I, "pos");
  g.intern(I, "neg");
  g.intern(U, "v");
  auto s = make_store<double>(g, 1);
  const Triplet t{{U, 0}, RelationKind::buy, {I, 0}};
  NegativeBatch neg;
  neg.tail_corruptions = {{{U, 0}, RelationKind::buy, {I, 1}}};
  auto hp = small_hp(1);

  s.entity({I, 0})[0] = 0.2;
  s.entity({I, 1})[0] = 2.0;
  auto lg = triplet_loss_and_grads(s, t, neg, hp);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.active_terms, 0u);

  s.entity({I, 0})[0] = 1.0;
  s.entity({I, 1})[0] = 1.5;
  lg = triplet_loss_and_grads(s, t, neg, hp);
  EXPECT_DOUBLE_EQ(lg.loss, 0.5);
  EXPECT_EQ(lg.active_terms, 1u);
  // d/d(pos tail) of (1 + |t_pos| - |t_neg|) = +1; of the negative tail = -1.
  EXPECT_DOUBLE_EQ((*lg.grads.find({I, 0}))[0], 1.0);
  EXPECT_DOUBLE_EQ((*lg.grads.find({I, 1}))[0], -1.0);
  EXPECT_DOUBLE_EQ((*lg.grads.find({U, 0}))[0], -1.0 + 1.0);
}

TEST(Loss, KinkAndZeroDistanceConventions) {
  KnowledgeGraph g;
  g.add_triplet(U, "u", RelationKind::buy, I, "pos");
  g.intern(I, "neg");
  auto s = make_store<double>(g, 1);
  const Triplet t{{U, 0}, RelationKind::buy, {I, 0}};
  NegativeBatch neg;
  neg.tail_corruptions = {{{U, 0}, RelationKind::buy, {I, 1}}};
  // d_pos = 0 (zero vector everywhere), d_neg = 1: hinge argument exactly 0.
  s.entity({I, 1})[0] = 1.0;
  const auto lg = triplet_loss_and_grads(s, t, neg, small_hp(1));
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.active_terms, 0u);
  for (const auto& e : lg.grads.entities)
    for (double x : e.grad) EXPECT_EQ(x, 0.0);
  for (double x : lg.grads.relation_grad) EXPECT_EQ(x, 0.0);
}

TEST(Loss, MatchesOracleAndZeroLossCondition) {
  const auto g = fixture::mixed_graph(8, 12, 12);
  std::mt19937_64 rng(12);
  auto hp = small_hp(6);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = make_store<double>(g, hp.dim);
    fixture::fill_normal(s, rng, trial % 2 ? 0.1 : 2.0);
    const auto& t = g.triplets()[trial % g.size()];
    const auto neg = sample_negatives(g, t, hp, rng);
    const auto lg = triplet_loss_and_grads(s, t, neg, hp);
    ASSERT_GE(lg.loss, 0.0);
    ASSERT_NEAR(lg.loss, oracle::margin_loss(s, t, fixture::all_corruptions(neg), hp.margin), 1e-10);
    if (lg.loss == 0.0) {
      for (const auto& e : lg.grads.entities)
        for (double x : e.grad) ASSERT_EQ(x, 0.0);
    }
  }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const auto g = fixture::mixed_graph(8, 12, 13);
  int checked = 0;
  for (std::size_t dim : {4u, 16u}) {
    auto hp = small_hp(dim);
    for (int trial = 0; trial < 60; ++trial) {
      auto s = make_store<double>(g, dim);
      fixture::fill_normal(s, rng, 0.5);
      const auto& t = g.triplets()[rng() % g.size()];
      const auto neg = sample_negatives(g, t, hp, rng);
      const auto negs = fixture::all_corruptions(neg);
      if (oracle::kink_proximity(s, t, negs, hp.margin) < 1e-6) continue;
      const auto lg = triplet_loss_and_grads(s, t, neg, hp);
      const auto touched = fixture::touched_entities(t, neg);
      const auto fd = oracle::central_differences(s, t, negs, hp.margin, touched, 1e-5);
      for (const auto& [e, num] : fd.entities) {
        const auto* an = lg.grads.find(e);
        ASSERT_NE(an, nullptr);
        for (std::size_t c = 0; c < dim; ++c) ASSERT_LT(fixture::relative_error((*an)[c], num[c]), 1e-4);
      }
      for (std::size_t c = 0; c < dim; ++c)
        ASSERT_LT(fixture::relative_error(lg.grads.relation_grad[c], fd.relation[c]), 1e-4);
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(Sgd, ZeroGradientLeavesStoreUnchanged) {
  const auto g = fixture::mixed_graph(4, 6, 14);
  auto s = init_embeddings(g, small_hp());
  const auto before = s;
  SparseGradients grads;
  grads.relation_grad.assign(8, 0.0);
  grads.entity_grad({I, 1}, 8);
  sgd_step(s, grads, small_hp());
  EXPECT_TRUE(bit_equal(s, before));
}

TEST(Sgd, SingleCoordinateStep) {
  const auto g = fixture::mixed_graph(4, 6, 15);
  auto s = init_embeddings<double>(g, small_hp());
  const auto before = s;
  SparseGradients grads;
  grads.entity_grad({I, 2}, 8)[3] = 1.0;
  sgd_step(s, grads, small_hp());
  EXPECT_EQ(s.entity({I, 2})[3], before.entity({I, 2})[3] - 0.01);
  auto restored = s;
  restored.entity({I, 2})[3] = before.entity({I, 2})[3];
  EXPECT_TRUE(bit_equal(restored, before));
}

TEST(Sgd, NonFiniteGradientAborts) {
  const auto g = fixture::mixed_graph(4, 6, 16);
  auto s = init_embeddings(g, small_hp());
  const auto before = s;
  SparseGradients grads;
  grads.entity_grad({I, 0}, 8)[0] = 1.0;
  grads.entity_grad({I, 1}, 8)[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sgd_step(s, grads, small_hp()), NumericError);
  EXPECT_TRUE(bit_equal(s, before));
  SparseGradients bad;
  bad.entity_grad({I, 99}, 8);
  EXPECT_THROW(sgd_step(s, bad, small_hp()), LookupError);
}

TEST(Sgd, StepIsDescentDirection) {
  const auto g = fixture::mixed_graph(8, 12, 17);
  std::mt19937_64 rng(17);
  auto hp = small_hp(16);
  hp.learning_rate = 1e-3;
  int steps = 0;
  while (steps < 100) {
    auto s = make_store<double>(g, hp.dim);
    fixture::fill_normal(s, rng, 0.3);
    const auto& t = g.triplets()[rng() % g.size()];
    const auto neg = sample_negatives(g, t, hp, rng);
    const auto lg = triplet_loss_and_grads(s, t, neg, hp);
    if (lg.loss == 0.0) continue;
    sgd_step(s, lg.grads, hp);
    ASSERT_LE(triplet_loss_and_grads(s, t, neg, hp).loss, lg.loss);
    ++steps;
  }
}

TEST(TrainEpoch, VisitsEveryTripletOnce) {
  KnowledgeGraph g;
  for (int n = 0; n < 100; ++n)
    g.add_triplet(U, "u" + std::to_string(n % 10), RelationKind::buy, I, "i" + std::to_string(n / 10 + 10 * (n % 3)));
  ASSERT_EQ(g.size(), 100u);
  auto hp = small_hp();
  auto s = init_embeddings(g, hp);
  std::mt19937_64 rng(18);
  EXPECT_EQ(train_epoch(g, s, hp, rng).visits, 100u);
}

TEST(TrainEpoch, RejectsForeignStore) {
  const auto g = fixture::mixed_graph(4, 6, 19);
  auto s = init_embeddings(fixture::mixed_graph(5, 6, 19), small_hp());
  std::mt19937_64 rng(19);
  EXPECT_THROW(train_epoch(g, s, small_hp(), rng), ConfigError);
}

TEST(Train, DeterministicSingleThreaded) {
  const auto g = planted_graph();
  auto hp = small_hp(16, 5);
  hp.epochs = 3;
  const auto a = train(g, hp);
  const auto b = train(g, hp);
  EXPECT_TRUE(bit_equal(a.store, b.store));
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Train, ZeroEpochsReturnsInitialStore) {
  const auto g = planted_graph();
  auto hp = small_hp(16, 5);
  const auto r = train(g, hp);
  EXPECT_TRUE(r.loss_history.empty());
  EXPECT_TRUE(bit_equal(r.store, init_embeddings(g, hp)));
}

TEST(Train, HistoryLengthAndNormInvariant) {
  const auto g = planted_graph();
  auto hp = small_hp(16, 6);
  hp.epochs = 4;
  std::size_t calls = 0;
  const auto r = train(g, hp, [&](std::size_t epoch, const EpochStats& st) {
    EXPECT_EQ(epoch, ++calls);
    EXPECT_EQ(st.visits, g.size());
  });
  EXPECT_EQ(r.loss_history.size(), 4u);
  EXPECT_EQ(calls, 4u);
  EXPECT_TRUE(r.store.all_finite());
  for (auto k : kAllEntityKinds)
    for (std::uint32_t row = 0; row < r.store.rows(k); ++row)
      ASSERT_NEAR(row_norm(r.store.entity({k, row})), 1.0, 1e-5);
}

TEST(Train, RequiresBuyTriplet) {
  KnowledgeGraph g;
  g.add_triplet(I, "i0", RelationKind::also_view, I, "i1");
  EXPECT_THROW(train(g, small_hp()), ConfigError);
}

TEST(Train, ParallelModeKeepsInvariants) {
  const auto g = planted_graph();
  auto hp = small_hp(16, 7);
  hp.epochs = 5;
  hp.threads = 4;
  const auto r = train(g, hp);
  EXPECT_TRUE(r.store.all_finite());
  for (auto k : kAllEntityKinds)
    for (std::uint32_t row = 0; row < r.store.rows(k); ++row)
      ASSERT_NEAR(row_norm(r.store.entity({k, row})), 1.0, 1e-5);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, LiteralModeRuns) {
  const auto g = planted_graph();
  auto hp = small_hp(16, 8);
  hp.epochs = 3;
  hp.normalize_entities = false;
  hp.type_constrained_sampling = false;
  const auto r = train(g, hp);
  EXPECT_TRUE(r.store.all_finite());
  EXPECT_EQ(r.loss_history.size(), 3u);
}
