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

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"

namespace kgrec {

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void check_key(std::string_view key) {
  if (key.find_first_of("\t\r\n") != std::string_view::npos)
    throw FormatError("external key contains a tab or newline: '" + std::string(key) + "'");
}

}  // namespace detail

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? (std::ios::binary | std::ios::trunc) : std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// Triplet file
//
//   # kgrec triplets v1
//   #@digest<TAB><16 hex digits>
//   #@entity<TAB>kind<TAB>key          (full vocabulary, id order)
//   head_kind:head_key<TAB>relation<TAB>tail_kind:tail_key
//
// Plain '#' lines are comments. The #@ directives pin the vocabulary so a
// reload reproduces local ids exactly; readers that skip them still recover
// the same triplet set.

inline void write_triplets(std::ostream& out, const KnowledgeGraph& graph) {
  const auto& vocab = graph.vocabulary();
  out << "# kgrec triplets v1\n";
  out << "#@digest\t" << detail::hex64(vocab.digest()) << '\n';
  for (auto kind : kAllEntityKinds) {
    for (const auto& key : vocab.keys(kind)) {
      detail::check_key(key);
      out << "#@entity\t" << to_string(kind) << '\t' << key << '\n';
    }
  }
  for (const auto& t : graph.triplets()) {
    out << to_string(t.head.kind) << ':' << graph.key(t.head) << '\t' << to_string(t.relation)
        << '\t' << to_string(t.tail.kind) << ':' << graph.key(t.tail) << '\n';
  }
}

inline KnowledgeGraph read_triplets(std::istream& in, std::string_view source = "<triplets>") {
  KnowledgeGraph graph;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::string> digest;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto parse_entity = [&](std::string_view field) {
    auto colon = field.find(':');
    if (colon == std::string_view::npos) throw fail("expected kind:key, got '" + std::string(field) + "'");
    auto kind = try_parse_entity_kind(field.substr(0, colon));
    if (!kind) throw fail("unknown entity kind in '" + std::string(field) + "'");
    auto key = field.substr(colon + 1);
    if (key.empty()) throw fail("empty key");
    return std::pair{*kind, key};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view v(line);
    if (v.starts_with("#@entity\t")) {
      auto rest = v.substr(9);
      auto tab = rest.find('\t');
      if (tab == std::string_view::npos) throw fail("malformed #@entity directive");
      auto kind = try_parse_entity_kind(rest.substr(0, tab));
      if (!kind || rest.size() == tab + 1) throw fail("malformed #@entity directive");
      graph.intern(*kind, rest.substr(tab + 1));
      continue;
    }
    if (v.starts_with("#@digest\t")) {
      digest = std::string(v.substr(9));
      continue;
    }
    if (v.front() == '#') continue;

    auto t1 = v.find('\t');
    auto t2 = t1 == std::string_view::npos ? t1 : v.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || v.find('\t', t2 + 1) != std::string_view::npos)
      throw fail("expected 3 tab-separated fields");
    auto [hk, hkey] = parse_entity(v.substr(0, t1));
    auto rel = try_parse_relation_kind(v.substr(t1 + 1, t2 - t1 - 1));
    if (!rel) throw fail("unknown relation '" + std::string(v.substr(t1 + 1, t2 - t1 - 1)) + "'");
    auto [tk, tkey] = parse_entity(v.substr(t2 + 1));
    try {
      graph.add_triplet(hk, hkey, *rel, tk, tkey);
    } catch (const SignatureError& e) {
      throw fail(e.what());
    }
  }
  if (digest && *digest != detail::hex64(graph.vocabulary().digest()))
    throw FormatError(std::string(source) + ": vocabulary digest mismatch");
  return graph;
}

inline void save_triplets(const std::string& path, const KnowledgeGraph& graph) {
  auto out = open_output(path);
  write_triplets(out, graph);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline KnowledgeGraph load_triplets(const std::string& path) {
  auto in = open_input(path);
  return read_triplets(in, path);
}

// ---------------------------------------------------------------------------
// Held-out pairs: `user_key<TAB>item_key` per line.

using KeyPairs = std::vector<std::pair<std::string, std::string>>;

inline void write_pairs(std::ostream& out, const KeyPairs& pairs) {
  for (const auto& [u, i] : pairs) {
    detail::check_key(u);
    detail::check_key(i);
    out << u << '\t' << i << '\n';
  }
}

inline KeyPairs read_pairs(std::istream& in, std::string_view source = "<pairs>") {
  KeyPairs out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw FormatError(std::string(source) + ":" + std::to_string(line_no) +
                        ": expected user_key<TAB>item_key");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// KGE1 model file (all integers and floats little-endian):
//
//   "KGE1"
//   u32 dim, u32 rows[user,item,word,brand,category], u32 relation_count, u32 flags
//   f32 entity matrices in kind order, then the relation matrix; row-major
//   vocabulary: per kind, per row: u32 byte length + UTF-8 bytes
//   u32 digest_lo, u32 digest_hi   (vocabulary digest)

inline constexpr std::array<char, 4> kModelMagic = {'K', 'G', 'E', '1'};

enum ModelFlags : std::uint32_t {
  kFlagNormalizedEntities = 1u << 0,
  kFlagTypeConstrained = 1u << 1,
  kFlagFiltered = 1u << 2,
};

inline std::uint32_t model_flags(const Hyperparams& hp) {
  std::uint32_t f = 0;
  if (hp.normalize_entities) f |= kFlagNormalizedEntities;
  if (hp.type_constrained_sampling) f |= kFlagTypeConstrained;
  if (hp.filtered_sampling) f |= kFlagFiltered;
  return f;
}

struct ModelFile {
  EmbeddingStore store;
  Vocabulary vocab;
  std::uint32_t flags = 0;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated model file");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw FormatError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline void write_model(std::ostream& out, const EmbeddingStore& store, const Vocabulary& vocab,
                        std::uint32_t flags) {
  for (auto k : kAllEntityKinds)
    if (vocab.size(k) != store.rows(k))
      throw ContractError("vocabulary and store disagree on " + std::string(to_string(k)) + " count");
  out.write(kModelMagic.data(), 4);
  detail::put_u32(out, detail::checked_u32(store.dim(), "dim"));
  for (auto k : kAllEntityKinds) detail::put_u32(out, detail::checked_u32(store.rows(k), "row count"));
  detail::put_u32(out, static_cast<std::uint32_t>(kRelationKindCount));
  detail::put_u32(out, flags);
  for (auto k : kAllEntityKinds)
    for (float x : store.entity_matrix(k)) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  for (float x : store.relation_matrix()) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  for (auto k : kAllEntityKinds) {
    for (const auto& key : vocab.keys(k)) {
      detail::put_u32(out, detail::checked_u32(key.size(), "key length"));
      out.write(key.data(), static_cast<std::streamsize>(key.size()));
    }
  }
  const auto digest = vocab.digest();
  detail::put_u32(out, static_cast<std::uint32_t>(digest & 0xffffffffu));
  detail::put_u32(out, static_cast<std::uint32_t>(digest >> 32));
}

inline ModelFile read_model(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kModelMagic) throw FormatError("not a KGE1 model file");
  const std::uint32_t dim = detail::get_u32(in);
  std::array<std::size_t, kEntityKindCount> rows{};
  for (auto& r : rows) r = detail::get_u32(in);
  const std::uint32_t relations = detail::get_u32(in);
  if (relations != kRelationKindCount)
    throw FormatError("model file has " + std::to_string(relations) + " relations, expected 6");
  ModelFile mf;
  mf.flags = detail::get_u32(in);
  if (dim == 0) throw FormatError("model file has dim 0");

  mf.store = EmbeddingStore(dim, rows);
  for (auto k : kAllEntityKinds)
    for (float& x : mf.store.entity_matrix(k)) x = std::bit_cast<float>(detail::get_u32(in));
  for (float& x : mf.store.relation_matrix()) x = std::bit_cast<float>(detail::get_u32(in));

  std::string key;
  for (auto k : kAllEntityKinds) {
    for (std::size_t r = 0; r < rows[index_of(k)]; ++r) {
      const auto len = detail::get_u32(in);
      key.resize(len);
      if (len && !in.read(key.data(), len)) throw FormatError("truncated vocabulary in model file");
      const auto ref = mf.vocab.intern(k, key);
      if (ref.local_id != r) throw FormatError("duplicate key '" + key + "' in model vocabulary");
    }
  }
  const std::uint64_t lo = detail::get_u32(in);
  const std::uint64_t hi = detail::get_u32(in);
  if ((hi << 32 | lo) != mf.vocab.digest()) throw FormatError("model vocabulary digest mismatch");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model");
  return mf;
}

inline void save_model(const std::string& path, const EmbeddingStore& store, const Vocabulary& vocab,
                       std::uint32_t flags) {
  auto out = open_output(path, true);
  write_model(out, store, vocab, flags);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ModelFile load_model(const std::string& path) {
  auto in = open_input(path, true);
  return read_model(in);
}

// ---------------------------------------------------------------------------
// Text export: `kind<TAB>external_key<TAB>v1 v2 ... vD`, relations under the
// kind "relation". Values use the shortest decimal form that round-trips.

inline void export_text(std::ostream& out, const EmbeddingStore& store, const Vocabulary& vocab) {
  char buf[32];
  auto row = [&](std::string_view kind, std::string_view key, std::span<const float> v) {
    detail::check_key(key);
    out << kind << '\t' << key << '\t';
    for (std::size_t c = 0; c < v.size(); ++c) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v[c]);
      if (c) out << ' ';
      out.write(buf, p - buf);
    }
    out << '\n';
  };
  for (auto k : kAllEntityKinds) {
    const auto keys = vocab.keys(k);
    for (std::uint32_t r = 0; r < keys.size(); ++r) row(to_string(k), keys[r], store.entity({k, r}));
  }
  for (auto r : kAllRelationKinds) row("relation", to_string(r), store.relation(r));
}

inline ModelFile import_text(std::istream& in, std::string_view source = "<text export>") {
  struct Row {
    std::string kind, key;
    std::vector<float> values;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    return FormatError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw fail("expected kind<TAB>key<TAB>values");
    Row row{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), {}};
    const char* p = line.data() + t2 + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      float v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw fail("bad number");
      row.values.push_back(v);
      p = next;
      if (p < end && *p == ' ') ++p;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(std::string(source) + ": empty text export");

  const std::size_t dim = rows.front().values.size();
  ModelFile mf;
  for (const auto& r : rows) {
    if (r.values.size() != dim) throw FormatError(std::string(source) + ": inconsistent dimension");
    if (r.kind != "relation") mf.vocab.intern(parse_entity_kind(r.kind), r.key);
  }
  std::array<std::size_t, kEntityKindCount> counts{};
  for (auto k : kAllEntityKinds) counts[index_of(k)] = mf.vocab.size(k);
  mf.store = EmbeddingStore(dim, counts);
  for (const auto& r : rows) {
    std::span<float> dst = r.kind == "relation"
                               ? mf.store.relation(parse_relation_kind(r.key))
                               : mf.store.entity(*mf.vocab.find(parse_entity_kind(r.kind), r.key));
    std::ranges::copy(r.values, dst.begin());
  }
  return mf;
}

}  // namespace kgrec
