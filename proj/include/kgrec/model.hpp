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
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/kg.hpp"

namespace kgrec {

struct Hyperparams {
  std::size_t dim = 300;
  double learning_rate = 0.01;
  double margin = 1.0;
  std::size_t negatives = 5;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  bool normalize_entities = true;
  bool type_constrained_sampling = true;
  bool filtered_sampling = true;
  // 1 = deterministic reference mode; >1 = lock-free parallel epochs.
  std::size_t threads = 1;

  void validate() const {
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning rate must be > 0");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be > 0");
    if (negatives == 0) throw ConfigError("negatives per triplet must be >= 1");
    if (threads == 0) throw ConfigError("threads must be >= 1");
  }
};

// Draws per corrupted slot before a filtered sample is accepted as-is.
inline constexpr std::size_t kSampleRetryBudget = 64;

// Dense row-major tables: one (rows x dim) matrix per entity kind plus a
// (6 x dim) relation matrix. Row r of kind k belongs to EntityRef{k, r}.
template <class Real>
class BasicEmbeddingStore {
  static_assert(std::is_floating_point_v<Real>);

 public:
  using value_type = Real;

  BasicEmbeddingStore() = default;

  BasicEmbeddingStore(std::size_t dim, const std::array<std::size_t, kEntityKindCount>& rows)
      : dim_(dim), rows_(rows), relations_(kRelationKindCount * dim, Real{0}) {
    for (std::size_t k = 0; k < kEntityKindCount; ++k) entities_[k].assign(rows[k] * dim, Real{0});
  }

  std::size_t dim() const { return dim_; }
  std::size_t rows(EntityKind kind) const { return rows_[index_of(kind)]; }
  const std::array<std::size_t, kEntityKindCount>& row_counts() const { return rows_; }

  bool contains(const EntityRef& e) const { return e.local_id < rows(e.kind); }

  std::span<Real> entity(const EntityRef& e) {
    check(e);
    return {entities_[index_of(e.kind)].data() + std::size_t{e.local_id} * dim_, dim_};
  }
  std::span<const Real> entity(const EntityRef& e) const {
    check(e);
    return {entities_[index_of(e.kind)].data() + std::size_t{e.local_id} * dim_, dim_};
  }

  std::span<Real> relation(RelationKind r) { return {relations_.data() + index_of(r) * dim_, dim_}; }
  std::span<const Real> relation(RelationKind r) const {
    return {relations_.data() + index_of(r) * dim_, dim_};
  }

  std::span<Real> entity_matrix(EntityKind kind) { return entities_[index_of(kind)]; }
  std::span<const Real> entity_matrix(EntityKind kind) const { return entities_[index_of(kind)]; }
  std::span<Real> relation_matrix() { return relations_; }
  std::span<const Real> relation_matrix() const { return relations_; }

  bool all_finite() const {
    auto finite = [](Real v) { return std::isfinite(v); };
    for (const auto& m : entities_)
      if (!std::ranges::all_of(m, finite)) return false;
    return std::ranges::all_of(relations_, finite);
  }

  // Bitwise equality (distinguishes -0 from +0, NaN payloads compare by bits).
  friend bool bit_equal(const BasicEmbeddingStore& a, const BasicEmbeddingStore& b) {
    if (a.dim_ != b.dim_ || a.rows_ != b.rows_) return false;
    auto same = [](std::span<const Real> x, std::span<const Real> y) {
      return std::ranges::equal(x, y, [](Real p, Real q) {
        using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
        return std::bit_cast<Bits>(p) == std::bit_cast<Bits>(q);
      });
    };
    for (std::size_t k = 0; k < kEntityKindCount; ++k)
      if (!same(a.entities_[k], b.entities_[k])) return false;
    return same(a.relations_, b.relations_);
  }

 private:
  void check(const EntityRef& e) const {
    if (!contains(e))
      throw LookupError("embedding store has no " + std::string(to_string(e.kind)) + " row " +
                        std::to_string(e.local_id));
  }

  std::size_t dim_ = 0;
  std::array<std::size_t, kEntityKindCount> rows_{};
  std::array<std::vector<Real>, kEntityKindCount> entities_;
  std::vector<Real> relations_;
};

using EmbeddingStore = BasicEmbeddingStore<float>;

// ---------------------------------------------------------------------------
// Vector primitives. Arithmetic is carried out in double regardless of the
// storage type.

template <class A, std::size_t N, class B, std::size_t M>
std::vector<double> translate(std::span<A, N> head, std::span<B, M> rel) {
  if (head.size() != rel.size())
    throw ContractError("translate: dimension mismatch " + std::to_string(head.size()) + " vs " +
                        std::to_string(rel.size()));
  std::vector<double> out(head.size());
  for (std::size_t c = 0; c < head.size(); ++c)
    out[c] = static_cast<double>(rel[c]) + static_cast<double>(head[c]);
  return out;
}

template <class A, std::size_t N, class B, std::size_t M>
double distance(std::span<A, N> a, std::span<B, M> b) {
  if (a.size() != b.size())
    throw ContractError("distance: dimension mismatch " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

template <class Real>
double triplet_distance(const BasicEmbeddingStore<Real>& store, const Triplet& t) {
  auto q = translate(store.entity(t.head), store.relation(t.relation));
  return distance(std::span<const double>(q), store.entity(t.tail));
}

template <class Real>
BasicEmbeddingStore<Real> make_store(const KnowledgeGraph& graph, std::size_t dim) {
  std::array<std::size_t, kEntityKindCount> rows{};
  for (auto k : kAllEntityKinds) rows[index_of(k)] = graph.entity_count(k);
  return BasicEmbeddingStore<Real>(dim, rows);
}

template <class Real>
void normalize_entity_rows(BasicEmbeddingStore<Real>& store) {
  const std::size_t dim = store.dim();
  for (auto kind : kAllEntityKinds) {
    auto m = store.entity_matrix(kind);
    for (std::size_t row = 0; row * dim < m.size(); ++row) {
      auto v = m.subspan(row * dim, dim);
      double sq = 0.0;
      for (Real x : v) sq += static_cast<double>(x) * static_cast<double>(x);
      const double norm = std::sqrt(sq);
      if (norm > 0.0)
        for (Real& x : v) x = static_cast<Real>(static_cast<double>(x) / norm);
    }
  }
}

// Every coordinate i.i.d. uniform on the open interval (0,1), drawn from
// hp.seed in kind/row/column order, relations last.
template <class Real = float>
BasicEmbeddingStore<Real> init_embeddings(const KnowledgeGraph& graph, const Hyperparams& hp) {
  hp.validate();
  if (graph.vocabulary().total() == 0) throw ConfigError("cannot initialize embeddings for an empty graph");
  auto store = make_store<Real>(graph, hp.dim);
  std::mt19937_64 rng(hp.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    for (;;) {
      const auto v = static_cast<Real>(unit(rng));
      if (v > Real{0} && v < Real{1}) return v;
    }
  };
  for (auto kind : kAllEntityKinds)
    for (Real& x : store.entity_matrix(kind)) x = draw();
  for (Real& x : store.relation_matrix()) x = draw();
  if (hp.normalize_entities) normalize_entity_rows(store);
  return store;
}

// ---------------------------------------------------------------------------
// Negative sampling

struct NegativeBatch {
  std::vector<Triplet> tail_corruptions;  // (head, relation, tail')
  std::vector<Triplet> head_corruptions;  // (head', relation, tail)
  // Filtered draws that exhausted the retry budget and were kept unfiltered.
  std::size_t unfiltered_fallbacks = 0;
};

namespace detail {

// Uniform draw from the candidate pool for a slot currently holding `original`.
class CandidatePool {
 public:
  CandidatePool(const KnowledgeGraph& graph, EntityKind kind, bool type_constrained) {
    if (type_constrained) {
      kinds_[0] = kind;
      offsets_[1] = graph.entity_count(kind);
      nkinds_ = 1;
    } else {
      for (auto k : kAllEntityKinds) {
        kinds_[nkinds_] = k;
        offsets_[nkinds_ + 1] = offsets_[nkinds_] + graph.entity_count(k);
        ++nkinds_;
      }
    }
    if (size() < 2)
      throw SamplingError("candidate pool for " + std::string(to_string(kind)) + " slot has " +
                          std::to_string(size()) + " entities, need at least 2");
  }

  std::size_t size() const { return offsets_[nkinds_]; }

  template <class Rng>
  EntityRef draw(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
    std::size_t i = pick(rng);
    std::size_t k = 0;
    while (i >= offsets_[k + 1]) ++k;
    return {kinds_[k], static_cast<std::uint32_t>(i - offsets_[k])};
  }

 private:
  std::array<EntityKind, kEntityKindCount> kinds_{};
  std::array<std::size_t, kEntityKindCount + 1> offsets_{};
  std::size_t nkinds_ = 0;
};

}  // namespace detail

template <class Rng>
NegativeBatch sample_negatives(const KnowledgeGraph& graph, const Triplet& t, const Hyperparams& hp,
                               Rng& rng) {
  const detail::CandidatePool tail_pool(graph, t.tail.kind, hp.type_constrained_sampling);
  const detail::CandidatePool head_pool(graph, t.head.kind, hp.type_constrained_sampling);

  NegativeBatch batch;
  batch.tail_corruptions.reserve(hp.negatives);
  batch.head_corruptions.reserve(hp.negatives);

  auto corrupt = [&](const detail::CandidatePool& pool, bool replace_tail) {
    Triplet c = t;
    EntityRef& slot = replace_tail ? c.tail : c.head;
    const EntityRef original = slot;
    for (std::size_t attempt = 1;; ++attempt) {
      slot = pool.draw(rng);
      if (!hp.filtered_sampling) break;
      if (slot != original && !graph.contains(c)) break;
      if (attempt == kSampleRetryBudget) {
        ++batch.unfiltered_fallbacks;
        break;
      }
    }
    return c;
  };

  for (std::size_t n = 0; n < hp.negatives; ++n) {
    batch.tail_corruptions.push_back(corrupt(tail_pool, true));
    batch.head_corruptions.push_back(corrupt(head_pool, false));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Margin loss and its subgradient

// Gradients for every vector touched by one positive triplet and its
// negatives. Entries are unique per entity, in first-touch order.
struct SparseGradients {
  struct Entry {
    EntityRef entity;
    std::vector<double> grad;
  };

  RelationKind relation = RelationKind::buy;
  std::vector<double> relation_grad;
  std::vector<Entry> entities;

  std::vector<double>& entity_grad(const EntityRef& e, std::size_t dim) {
    for (auto& entry : entities)
      if (entry.entity == e) return entry.grad;
    entities.push_back({e, std::vector<double>(dim, 0.0)});
    return entities.back().grad;
  }

  const std::vector<double>* find(const EntityRef& e) const {
    for (const auto& entry : entities)
      if (entry.entity == e) return &entry.grad;
    return nullptr;
  }

  bool all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::ranges::all_of(relation_grad, finite)) return false;
    for (const auto& e : entities)
      if (!std::ranges::all_of(e.grad, finite)) return false;
    return true;
  }
};

struct LossAndGrads {
  double loss = 0.0;
  std::size_t active_terms = 0;
  SparseGradients grads;
};

namespace detail {

// Local double-precision copies of the rows one update reads.
struct RowCache {
  std::vector<EntityRef> ids;
  std::vector<std::vector<double>> rows;

  const std::vector<double>* find(const EntityRef& e) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == e) return &rows[i];
    return nullptr;
  }
};

template <class Real>
struct PlainAccess {
  static double load(const Real& x) { return static_cast<double>(x); }
  static void store(Real& x, double v) { x = static_cast<Real>(v); }
};

// Relaxed per-coordinate atomics for the lock-free parallel mode: racing
// writers resolve last-writer-wins, readers never observe torn values.
template <class Real>
struct RelaxedAccess {
  static double load(Real& x) {
    return static_cast<double>(std::atomic_ref<Real>(x).load(std::memory_order_relaxed));
  }
  static void store(Real& x, double v) {
    std::atomic_ref<Real>(x).store(static_cast<Real>(v), std::memory_order_relaxed);
  }
};

template <class Access, class Row>
std::vector<double> gather_row(Row row) {
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = Access::load(row[c]);
  return out;
}

template <class Access, class Store>
void gather(Store& store, const Triplet& t, const NegativeBatch& neg, RowCache& cache,
            std::vector<double>& relation) {
  cache.ids.clear();
  cache.rows.clear();
  auto add = [&](const EntityRef& e) {
    if (cache.find(e)) return;
    cache.ids.push_back(e);
    cache.rows.push_back(gather_row<Access>(store.entity(e)));
  };
  add(t.head);
  add(t.tail);
  for (const auto& c : neg.tail_corruptions) add(c.tail);
  for (const auto& c : neg.head_corruptions) add(c.head);
  relation = gather_row<Access>(store.relation(t.relation));
}

inline double translated_distance(const std::vector<double>& head, const std::vector<double>& rel,
                                  const std::vector<double>& tail, std::vector<double>& unit) {
  const std::size_t dim = head.size();
  unit.resize(dim);
  double sq = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    unit[c] = (rel[c] + head[c]) - tail[c];
    sq += unit[c] * unit[c];
  }
  const double d = std::sqrt(sq);
  // Gradient of ||v|| at v = 0 is taken as the zero vector.
  if (d > 0.0)
    for (double& x : unit) x /= d;
  else
    std::ranges::fill(unit, 0.0);
  return d;
}

inline LossAndGrads loss_and_grads(const RowCache& cache, const std::vector<double>& relation,
                                   const Triplet& t, const NegativeBatch& neg, double margin) {
  const std::size_t dim = relation.size();
  LossAndGrads out;
  out.grads.relation = t.relation;
  out.grads.relation_grad.assign(dim, 0.0);

  std::vector<double> pos_unit;
  const double d_pos = translated_distance(*cache.find(t.head), relation, *cache.find(t.tail), pos_unit);
  // Touch the positive entities first so they lead the gradient list.
  out.grads.entity_grad(t.head, dim);
  out.grads.entity_grad(t.tail, dim);

  std::vector<double> unit;
  auto term = [&](const Triplet& c) {
    const double d_neg = translated_distance(*cache.find(c.head), relation, *cache.find(c.tail), unit);
    const double x = margin + d_pos - d_neg;
    // [x]_+ has subgradient 0 at the kink x = 0.
    if (!(x > 0.0)) {
      out.grads.entity_grad(c.head, dim);
      out.grads.entity_grad(c.tail, dim);
      return;
    }
    out.loss += x;
    ++out.active_terms;
    auto& gh = out.grads.entity_grad(c.head, dim);
    for (std::size_t i = 0; i < dim; ++i) gh[i] -= unit[i];
    auto& gt = out.grads.entity_grad(c.tail, dim);
    for (std::size_t i = 0; i < dim; ++i) gt[i] += unit[i];
    for (std::size_t i = 0; i < dim; ++i) out.grads.relation_grad[i] -= unit[i];
  };
  for (const auto& c : neg.tail_corruptions) term(c);
  for (const auto& c : neg.head_corruptions) term(c);

  if (out.active_terms > 0) {
    const double a = static_cast<double>(out.active_terms);
    auto& gh = out.grads.entity_grad(t.head, dim);
    for (std::size_t i = 0; i < dim; ++i) gh[i] += a * pos_unit[i];
    auto& gt = out.grads.entity_grad(t.tail, dim);
    for (std::size_t i = 0; i < dim; ++i) gt[i] -= a * pos_unit[i];
    for (std::size_t i = 0; i < dim; ++i) out.grads.relation_grad[i] += a * pos_unit[i];
  }
  return out;
}

template <class Access, class Real>
void apply_update(BasicEmbeddingStore<Real>& store, const SparseGradients& grads, double lr) {
  auto step = [&](std::span<Real> row, const std::vector<double>& g) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (g[c] == 0.0) continue;
      Access::store(row[c], Access::load(row[c]) - lr * g[c]);
    }
  };
  if (!grads.relation_grad.empty()) step(store.relation(grads.relation), grads.relation_grad);
  for (const auto& e : grads.entities) step(store.entity(e.entity), e.grad);
}

}  // namespace detail

// Hinge loss summed over the 2k corruptions of one positive triplet, with the
// exact subgradient for every touched vector.
template <class Real>
LossAndGrads triplet_loss_and_grads(const BasicEmbeddingStore<Real>& store, const Triplet& t,
                                    const NegativeBatch& neg, const Hyperparams& hp) {
  detail::RowCache cache;
  std::vector<double> relation;
  detail::gather<detail::PlainAccess<Real>>(store, t, neg, cache, relation);
  return detail::loss_and_grads(cache, relation, t, neg, hp.margin);
}

// v <- v - lr * g for every touched row. Rejects the whole step if any
// gradient coordinate is non-finite; untouched rows are never written.
template <class Real>
void sgd_step(BasicEmbeddingStore<Real>& store, const SparseGradients& grads, const Hyperparams& hp) {
  if (!grads.all_finite()) throw NumericError("non-finite gradient; SGD step aborted");
  if (!grads.relation_grad.empty() && grads.relation_grad.size() != store.dim())
    throw ContractError("gradient dimension does not match store");
  for (const auto& e : grads.entities) {
    if (!store.contains(e.entity)) throw LookupError("gradient references unknown entity");
    if (e.grad.size() != store.dim()) throw ContractError("gradient dimension does not match store");
  }
  detail::apply_update<detail::PlainAccess<Real>>(store, grads, hp.learning_rate);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t visits = 0;
  std::size_t unfiltered_fallbacks = 0;
};

namespace detail {

struct ChunkResult {
  double loss = 0.0;
  std::size_t visits = 0;
  std::size_t fallbacks = 0;
};

template <class Access, class Real>
ChunkResult run_chunk(const KnowledgeGraph& graph, BasicEmbeddingStore<Real>& store,
                      const Hyperparams& hp, std::span<const std::size_t> order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ChunkResult res;
  RowCache cache;
  std::vector<double> relation;
  const auto triplets = graph.triplets();
  for (auto idx : order) {
    const Triplet& t = triplets[idx];
    const auto neg = sample_negatives(graph, t, hp, rng);
    gather<Access>(store, t, neg, cache, relation);
    auto lg = loss_and_grads(cache, relation, t, neg, hp.margin);
    if (!lg.grads.all_finite()) throw NumericError("non-finite gradient; SGD step aborted");
    apply_update<Access>(store, lg.grads, hp.learning_rate);
    res.loss += lg.loss;
    res.fallbacks += neg.unfiltered_fallbacks;
    ++res.visits;
  }
  return res;
}

}  // namespace detail

// One pass over S in a shuffled order: sample negatives, one SGD step per
// positive, then (optionally) renormalize entity rows. With hp.threads > 1
// the shuffled order is cut into contiguous chunks processed concurrently.
template <class Real, class Rng>
EpochStats train_epoch(const KnowledgeGraph& graph, BasicEmbeddingStore<Real>& store,
                       const Hyperparams& hp, Rng& rng) {
  hp.validate();
  if (store.dim() != hp.dim) throw ConfigError("store dimension does not match hyperparameters");
  for (auto k : kAllEntityKinds)
    if (store.rows(k) != graph.entity_count(k))
      throw ConfigError("store was not initialized against this graph");

  std::vector<std::size_t> order(graph.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t threads = std::min(hp.threads, std::max<std::size_t>(order.size(), 1));
  std::vector<std::uint64_t> seeds(threads);
  for (auto& s : seeds) s = rng();

  std::vector<detail::ChunkResult> results(threads);
  if (threads == 1) {
    results[0] = detail::run_chunk<detail::PlainAccess<Real>>(graph, store, hp, order, seeds[0]);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    const std::size_t per = (order.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t lo = std::min(order.size(), w * per);
      const std::size_t hi = std::min(order.size(), lo + per);
      pool.emplace_back([&, w, lo, hi] {
        try {
          results[w] = detail::run_chunk<detail::RelaxedAccess<Real>>(
              graph, store, hp, std::span<const std::size_t>(order).subspan(lo, hi - lo), seeds[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EpochStats stats;
  double total = 0.0;
  for (const auto& r : results) {
    total += r.loss;
    stats.visits += r.visits;
    stats.unfiltered_fallbacks += r.fallbacks;
  }
  stats.mean_loss = stats.visits ? total / static_cast<double>(stats.visits) : 0.0;
  if (hp.normalize_entities) normalize_entity_rows(store);
  if (!store.all_finite()) throw NumericError("embedding store became non-finite");
  return stats;
}

template <class Real = float>
struct TrainResult {
  BasicEmbeddingStore<Real> store;
  std::vector<double> loss_history;
  std::size_t unfiltered_fallbacks = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

// Training RNG stream, separate from the initialization stream.
inline std::uint64_t training_seed(std::uint64_t seed) { return seed ^ 0xA5A5F00DCAFEBEEFull; }

template <class Real = float>
TrainResult<Real> train(const KnowledgeGraph& graph, const Hyperparams& hp,
                        const EpochCallback& on_epoch = {}) {
  hp.validate();
  if (graph.relation_indices(RelationKind::buy).empty())
    throw ConfigError("training requires at least one buy triplet");
  TrainResult<Real> out{init_embeddings<Real>(graph, hp), {}, 0};
  std::mt19937_64 rng(training_seed(hp.seed));
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    auto stats = train_epoch(graph, out.store, hp, rng);
    out.loss_history.push_back(stats.mean_loss);
    out.unfiltered_fallbacks += stats.unfiltered_fallbacks;
    if (on_epoch) on_epoch(e + 1, stats);
  }
  return out;
}

}  // namespace kgrec
