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
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgrec/error.hpp"

namespace kgrec {

enum class EntityKind : std::uint8_t { user, item, word, brand, category };
enum class RelationKind : std::uint8_t {
  buy,
  belong_to_category,
  belong_to_brand,
  mention_word,
  also_bought,
  also_view
};

inline constexpr std::size_t kEntityKindCount = 5;
inline constexpr std::size_t kRelationKindCount = 6;

inline constexpr std::array<EntityKind, kEntityKindCount> kAllEntityKinds = {
    EntityKind::user, EntityKind::item, EntityKind::word, EntityKind::brand,
    EntityKind::category};
inline constexpr std::array<RelationKind, kRelationKindCount> kAllRelationKinds = {
    RelationKind::buy,         RelationKind::belong_to_category,
    RelationKind::belong_to_brand, RelationKind::mention_word,
    RelationKind::also_bought, RelationKind::also_view};

constexpr std::size_t index_of(EntityKind k) { return static_cast<std::size_t>(k); }
constexpr std::size_t index_of(RelationKind r) { return static_cast<std::size_t>(r); }

constexpr std::string_view to_string(EntityKind k) {
  constexpr std::array<std::string_view, kEntityKindCount> names = {
      "user", "item", "word", "brand", "category"};
  return names[index_of(k)];
}

constexpr std::string_view to_string(RelationKind r) {
  constexpr std::array<std::string_view, kRelationKindCount> names = {
      "buy",         "belong_to_category", "belong_to_brand",
      "mention_word", "also_bought",       "also_view"};
  return names[index_of(r)];
}

inline std::optional<EntityKind> try_parse_entity_kind(std::string_view s) {
  for (auto k : kAllEntityKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<RelationKind> try_parse_relation_kind(std::string_view s) {
  for (auto r : kAllRelationKinds)
    if (to_string(r) == s) return r;
  return std::nullopt;
}

inline EntityKind parse_entity_kind(std::string_view s) {
  if (auto k = try_parse_entity_kind(s)) return *k;
  throw FormatError("unknown entity kind '" + std::string(s) + "'");
}

inline RelationKind parse_relation_kind(std::string_view s) {
  if (auto r = try_parse_relation_kind(s)) return *r;
  throw FormatError("unknown relation kind '" + std::string(s) + "'");
}

// Allowed head kinds (bitmask over EntityKind) and the single tail kind.
struct RelationSignature {
  std::uint8_t head_mask;
  EntityKind tail;

  constexpr bool accepts_head(EntityKind k) const {
    return (head_mask >> index_of(k)) & 1u;
  }
};

constexpr std::uint8_t kind_bit(EntityKind k) {
  return static_cast<std::uint8_t>(1u << index_of(k));
}

constexpr RelationSignature signature(RelationKind r) {
  switch (r) {
    case RelationKind::buy:
      return {kind_bit(EntityKind::user), EntityKind::item};
    case RelationKind::belong_to_category:
      return {kind_bit(EntityKind::item), EntityKind::category};
    case RelationKind::belong_to_brand:
      return {kind_bit(EntityKind::item), EntityKind::brand};
    case RelationKind::mention_word:
      return {static_cast<std::uint8_t>(kind_bit(EntityKind::user) |
                                        kind_bit(EntityKind::item)),
              EntityKind::word};
    case RelationKind::also_bought:
    case RelationKind::also_view:
      return {kind_bit(EntityKind::item), EntityKind::item};
  }
  return {0, EntityKind::item};
}

// Typed identity of a graph node. The external key lives in the Vocabulary;
// (kind, local_id) is the compact handle used everywhere else.
struct EntityRef {
  EntityKind kind = EntityKind::user;
  std::uint32_t local_id = 0;

  friend constexpr auto operator<=>(const EntityRef&, const EntityRef&) = default;
};

struct Triplet {
  EntityRef head;
  RelationKind relation = RelationKind::buy;
  EntityRef tail;

  friend constexpr auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct EntityRefHash {
  std::size_t operator()(const EntityRef& e) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{index_of(e.kind)} << 32) |
                                      e.local_id);
  }
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept {
    std::uint64_t a = (std::uint64_t{index_of(t.head.kind)} << 40) |
                      (std::uint64_t{index_of(t.relation)} << 32) | t.head.local_id;
    std::uint64_t b = (std::uint64_t{index_of(t.tail.kind)} << 32) | t.tail.local_id;
    // splitmix-style mixing of the two halves
    std::uint64_t h = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull);
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ull;
    h ^= h >> 29;
    return static_cast<std::size_t>(h);
  }
};

// FNV-1a, 64-bit. Used for stable (platform-independent) digests and seeds.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Per-kind bijection external_key <-> dense local_id, ids in first-seen order.
class Vocabulary {
 public:
  EntityRef intern(EntityKind kind, std::string_view key) {
    if (key.empty()) throw FormatError("empty external key for " + std::string(to_string(kind)));
    auto& table = tables_[index_of(kind)];
    auto it = table.index.find(std::string(key));
    if (it != table.index.end()) return {kind, it->second};
    auto id = static_cast<std::uint32_t>(table.keys.size());
    table.keys.emplace_back(key);
    table.index.emplace(table.keys.back(), id);
    return {kind, id};
  }

  std::optional<EntityRef> find(EntityKind kind, std::string_view key) const {
    const auto& table = tables_[index_of(kind)];
    auto it = table.index.find(std::string(key));
    if (it == table.index.end()) return std::nullopt;
    return EntityRef{kind, it->second};
  }

  bool contains(const EntityRef& e) const { return e.local_id < size(e.kind); }

  const std::string& key(const EntityRef& e) const {
    if (!contains(e))
      throw LookupError("no " + std::string(to_string(e.kind)) + " with local id " +
                        std::to_string(e.local_id));
    return tables_[index_of(e.kind)].keys[e.local_id];
  }

  std::size_t size(EntityKind kind) const { return tables_[index_of(kind)].keys.size(); }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& t : tables_) n += t.keys.size();
    return n;
  }

  std::span<const std::string> keys(EntityKind kind) const {
    return tables_[index_of(kind)].keys;
  }

  // Order-sensitive digest of every (kind, key) pair; pairs a model file
  // with the graph it was trained on.
  std::uint64_t digest() const {
    std::uint64_t h = fnv1a64("kgrec-vocab");
    for (auto kind : kAllEntityKinds) {
      h = fnv1a64(to_string(kind), h);
      const std::string count = std::to_string(size(kind));
      h = fnv1a64(count, h);
      for (const auto& k : keys(kind)) {
        h = fnv1a64(k, h);
        h = fnv1a64(std::string_view("\0", 1), h);
      }
    }
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    for (auto kind : kAllEntityKinds)
      if (!std::ranges::equal(a.keys(kind), b.keys(kind))) return false;
    return true;
  }

 private:
  struct Table {
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::uint32_t> index;
  };
  std::array<Table, kEntityKindCount> tables_;
};

struct GraphStats {
  std::array<std::size_t, kEntityKindCount> entities{};
  std::array<std::size_t, kRelationKindCount> triplets{};
  // |buy| / (#users * #items) as a fraction; 0 when either count is 0.
  double buy_density = 0.0;

  std::size_t users() const { return entities[index_of(EntityKind::user)]; }
  std::size_t items() const { return entities[index_of(EntityKind::item)]; }
  std::size_t interactions() const { return triplets[index_of(RelationKind::buy)]; }
};

inline double buy_density(std::size_t users, std::size_t items, std::size_t buys) {
  if (users == 0 || items == 0) return 0.0;
  return static_cast<double>(buys) /
         (static_cast<double>(users) * static_cast<double>(items));
}

// Deduplicated triplet store over a Vocabulary, with per-relation and
// per-(head, relation) indexes. Single writer during construction; read-only
// afterwards.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  const Vocabulary& vocabulary() const { return vocab_; }

  EntityRef intern(EntityKind kind, std::string_view key) { return vocab_.intern(kind, key); }

  std::optional<EntityRef> find(EntityKind kind, std::string_view key) const {
    return vocab_.find(kind, key);
  }

  const std::string& key(const EntityRef& e) const { return vocab_.key(e); }

  std::size_t entity_count(EntityKind kind) const { return vocab_.size(kind); }

  // Interns both keys and inserts the triplet. Returns false when it was
  // already present. Signature violations and self-loops throw before
  // anything is interned.
  bool add_triplet(EntityKind head_kind, std::string_view head_key, RelationKind relation,
                   EntityKind tail_kind, std::string_view tail_key) {
    check_signature(head_kind, relation, tail_kind);
    if (head_key.empty() || tail_key.empty())
      throw FormatError("empty external key in triplet");
    if (head_kind == tail_kind && head_key == tail_key)
      throw SignatureError("self-loop " + std::string(to_string(relation)) + " on " +
                           std::string(head_key));
    EntityRef head = vocab_.intern(head_kind, head_key);
    EntityRef tail = vocab_.intern(tail_kind, tail_key);
    return insert(Triplet{head, relation, tail});
  }

  // Inserts a triplet whose entities are already interned.
  bool add_triplet(const Triplet& t) {
    check_signature(t.head.kind, t.relation, t.tail.kind);
    if (!vocab_.contains(t.head) || !vocab_.contains(t.tail))
      throw LookupError("triplet references an entity missing from the vocabulary");
    if (t.head == t.tail)
      throw SignatureError("self-loop " + std::string(to_string(t.relation)));
    return insert(t);
  }

  bool contains(const Triplet& t) const { return set_.contains(t); }

  // Tails j with (head, relation, j) in S, ascending by local id. Unknown
  // heads yield an empty set.
  std::vector<EntityRef> tails_of(const EntityRef& head, RelationKind relation) const {
    std::vector<EntityRef> out;
    auto it = by_head_.find(head_key(head, relation));
    if (it == by_head_.end()) return out;
    const EntityKind tail_kind = signature(relation).tail;
    out.reserve(it->second.size());
    for (auto id : it->second) out.push_back({tail_kind, id});
    std::ranges::sort(out);
    return out;
  }

  std::span<const Triplet> triplets() const { return triplets_; }
  std::size_t size() const { return triplets_.size(); }
  bool empty() const { return triplets_.empty(); }

  // Positions into triplets() of every triplet with the given relation.
  std::span<const std::size_t> relation_indices(RelationKind r) const {
    return by_relation_[index_of(r)];
  }

  std::vector<Triplet> relation_triplets(RelationKind r) const {
    std::vector<Triplet> out;
    out.reserve(by_relation_[index_of(r)].size());
    for (auto i : by_relation_[index_of(r)]) out.push_back(triplets_[i]);
    return out;
  }

  GraphStats stats() const {
    GraphStats s;
    for (auto k : kAllEntityKinds) s.entities[index_of(k)] = vocab_.size(k);
    for (auto r : kAllRelationKinds) s.triplets[index_of(r)] = by_relation_[index_of(r)].size();
    s.buy_density = buy_density(s.users(), s.items(), s.interactions());
    return s;
  }

 private:
  static void check_signature(EntityKind head, RelationKind relation, EntityKind tail) {
    const auto sig = signature(relation);
    if (!sig.accepts_head(head) || sig.tail != tail)
      throw SignatureError(std::string(to_string(relation)) + " does not accept " +
                           std::string(to_string(head)) + " -> " +
                           std::string(to_string(tail)));
  }

  static std::uint64_t head_key(const EntityRef& head, RelationKind r) {
    return (std::uint64_t{index_of(head.kind)} << 40) |
           (std::uint64_t{index_of(r)} << 32) | head.local_id;
  }

  bool insert(const Triplet& t) {
    if (!set_.insert(t).second) return false;
    by_relation_[index_of(t.relation)].push_back(triplets_.size());
    triplets_.push_back(t);
    by_head_[head_key(t.head, t.relation)].push_back(t.tail.local_id);
    return true;
  }

  Vocabulary vocab_;
  std::vector<Triplet> triplets_;
  std::unordered_set<Triplet, TripletHash> set_;
  std::array<std::vector<std::size_t>, kRelationKindCount> by_relation_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> by_head_;
};

// Bitset over RelationKind, used to restrict graph construction.
class RelationSet {
 public:
  constexpr RelationSet() = default;
  constexpr RelationSet(std::initializer_list<RelationKind> rs) {
    for (auto r : rs) insert(r);
  }

  static constexpr RelationSet all() {
    RelationSet s;
    for (auto r : kAllRelationKinds) s.insert(r);
    return s;
  }

  constexpr void insert(RelationKind r) { bits_ |= static_cast<std::uint8_t>(1u << index_of(r)); }
  constexpr bool contains(RelationKind r) const { return (bits_ >> index_of(r)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  friend constexpr bool operator==(RelationSet, RelationSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

// Short relation names used in ablation labels ("buy+category").
constexpr std::string_view short_name(RelationKind r) {
  constexpr std::array<std::string_view, kRelationKindCount> names = {
      "buy", "category", "brand", "mention", "also_bought", "also_view"};
  return names[index_of(r)];
}

inline std::string to_label(RelationSet s) {
  if (s == RelationSet::all()) return "all";
  std::string out;
  for (auto r : kAllRelationKinds) {
    if (!s.contains(r)) continue;
    if (!out.empty()) out += '+';
    out += short_name(r);
  }
  return out;
}

// Accepts "all" or '+'-joined relation names, short or full.
inline RelationSet parse_relation_set(std::string_view text) {
  if (text == "all") return RelationSet::all();
  RelationSet s;
  while (!text.empty()) {
    auto pos = text.find('+');
    auto part = text.substr(0, pos);
    bool found = false;
    for (auto r : kAllRelationKinds) {
      if (part == short_name(r) || part == to_string(r)) {
        s.insert(r);
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown relation '" + std::string(part) + "' in subset");
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  if (s.empty()) throw ConfigError("empty relation subset");
  return s;
}

}  // namespace kgrec
