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
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/kg.hpp"

namespace kgrec {

struct InteractionRecord {
  std::string user_key;
  std::string item_key;
  std::optional<std::string> review_text;
  std::optional<std::int64_t> timestamp;
};

struct ItemMetaRecord {
  std::string item_key;
  std::optional<std::string> brand;
  std::vector<std::string> categories;
  std::vector<std::string> also_bought;
  std::vector<std::string> also_viewed;
};

struct SplitSpec {
  double train_fraction = 0.70;
  std::uint64_t seed = 0;
  std::size_t min_train_items = 2;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("train_fraction must lie in (0,1), got " + std::to_string(train_fraction));
    if (min_train_items == 0) throw ConfigError("min_train_items must be positive");
  }
};

inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",     "about", "an",    "and",   "are",  "as",    "at",   "be",   "but",
      "by",    "for",   "from",  "had",   "has",  "have",  "he",   "her",  "his",
      "i",     "if",    "in",    "into",  "is",   "it",    "its",  "me",   "my",
      "no",    "not",   "of",    "on",    "or",   "our",   "she",  "so",   "that",
      "the",   "their", "them",  "then",  "there", "these", "they", "this", "to",
      "too",   "very",  "was",   "we",    "were", "what",  "when", "which", "will",
      "with",  "would", "you",   "your"};
  return words;
}

struct TokenizerConfig {
  std::size_t min_token_length = 2;
  std::size_t min_corpus_frequency = 5;
  std::size_t max_vocab = 50000;
  std::set<std::string> stopwords = default_stopwords();

  void validate() const {
    if (min_token_length == 0 || min_corpus_frequency == 0 || max_vocab == 0)
      throw ConfigError("tokenizer thresholds must be positive");
  }
};

struct InteractionSplit {
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> test;
};

namespace detail {

inline std::size_t train_count(std::size_t n, const SplitSpec& spec) {
  if (n < spec.min_train_items) return n;
  // The epsilon keeps exact products such as 0.7 * 10 from rounding up.
  auto k = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9));
  return std::min(std::max<std::size_t>(k, 1), n);
}

}  // namespace detail

// Per-user split: the first ceil(fraction * n_u) distinct items of each user
// go to train, ordered by ascending timestamp when every record of that user
// has one, otherwise by a shuffle seeded from (seed, user_key). Every record
// of a (user, item) pair lands on the same side. Output preserves input order.
inline InteractionSplit split_interactions(std::span<const InteractionRecord> records,
                                           const SplitSpec& spec) {
  spec.validate();
  if (records.empty()) throw ConfigError("no interaction records to split");

  struct ItemInfo {
    std::int64_t first_ts = 0;
    bool all_timestamped = true;
  };
  std::unordered_map<std::string, std::map<std::string, ItemInfo>> per_user;
  for (const auto& r : records) {
    auto [it, fresh] = per_user[r.user_key].try_emplace(r.item_key);
    auto& info = it->second;
    if (!r.timestamp) {
      info.all_timestamped = false;
    } else if (fresh || *r.timestamp < info.first_ts) {
      info.first_ts = *r.timestamp;
    }
  }

  std::unordered_map<std::string, std::unordered_set<std::string>> train_items;
  for (auto& [user, items] : per_user) {
    // items is keyed (and so ordered) by item key, which makes the result
    // independent of input order.
    std::vector<std::pair<std::string, ItemInfo>> order(items.begin(), items.end());
    const bool temporal = std::ranges::all_of(order, [](const auto& p) { return p.second.all_timestamped; });
    if (temporal) {
      std::ranges::stable_sort(order, {}, [](const auto& p) { return p.second.first_ts; });
    } else {
      std::mt19937_64 rng(spec.seed ^ fnv1a64(user));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const auto k = detail::train_count(order.size(), spec);
    auto& chosen = train_items[user];
    for (std::size_t i = 0; i < k; ++i) chosen.insert(order[i].first);
  }

  InteractionSplit out;
  for (const auto& r : records) {
    if (train_items[r.user_key].contains(r.item_key))
      out.train.push_back(r);
    else
      out.test.push_back(r);
  }
  return out;
}

// Lowercased maximal alphanumeric runs of at least min_length bytes. Bytes
// >= 0x80 count as word characters so UTF-8 words stay intact.
inline std::vector<std::string> split_tokens(std::string_view text, std::size_t min_length) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= min_length) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

struct ReviewWords {
  // Surviving words, descending corpus frequency then lexicographic.
  std::vector<std::string> vocabulary;
  std::map<std::string, std::size_t> frequency;
  std::map<std::string, std::set<std::string>> by_user;
  std::map<std::string, std::set<std::string>> by_item;
};

inline ReviewWords tokenize_reviews(std::span<const InteractionRecord> records,
                                    const TokenizerConfig& config) {
  config.validate();
  std::vector<std::vector<std::string>> tokens(records.size());
  std::unordered_map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].review_text) continue;
    for (auto& tok : split_tokens(*records[i].review_text, config.min_token_length)) {
      if (config.stopwords.contains(tok)) continue;
      ++counts[tok];
      tokens[i].push_back(std::move(tok));
    }
  }

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts)
    if (c >= config.min_corpus_frequency) ranked.emplace_back(w, c);
  std::ranges::sort(ranked, [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > config.max_vocab) ranked.resize(config.max_vocab);

  ReviewWords out;
  std::unordered_set<std::string> keep;
  for (auto& [w, c] : ranked) {
    out.vocabulary.push_back(w);
    out.frequency.emplace(w, c);
    keep.insert(w);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& tok : tokens[i]) {
      if (!keep.contains(tok)) continue;
      out.by_user[records[i].user_key].insert(tok);
      out.by_item[records[i].item_key].insert(tok);
    }
  }
  return out;
}

struct GraphBuild {
  KnowledgeGraph graph;
  std::size_t skipped_meta_records = 0;  // metadata for items absent from train
  std::size_t skipped_links = 0;         // also_* targets unknown or self-referencing
};

// Builds the user-item graph from TRAIN interactions only. Users and items of
// every train record are interned even when `relations` omits buy.
inline GraphBuild build_graph(std::span<const InteractionRecord> train,
                              std::span<const ItemMetaRecord> meta,
                              const TokenizerConfig& config,
                              RelationSet relations = RelationSet::all()) {
  GraphBuild out;
  auto& g = out.graph;

  for (const auto& r : train) {
    g.intern(EntityKind::user, r.user_key);
    g.intern(EntityKind::item, r.item_key);
    if (relations.contains(RelationKind::buy))
      g.add_triplet(EntityKind::user, r.user_key, RelationKind::buy, EntityKind::item, r.item_key);
  }

  auto add_links = [&](const std::string& head, const std::vector<std::string>& targets,
                       RelationKind rel) {
    if (!relations.contains(rel)) return;
    for (const auto& t : targets) {
      if (t == head || !g.find(EntityKind::item, t)) {
        ++out.skipped_links;
        continue;
      }
      g.add_triplet(EntityKind::item, head, rel, EntityKind::item, t);
    }
  };

  for (const auto& m : meta) {
    if (!g.find(EntityKind::item, m.item_key)) {
      ++out.skipped_meta_records;
      continue;
    }
    if (m.brand && !m.brand->empty() && relations.contains(RelationKind::belong_to_brand))
      g.add_triplet(EntityKind::item, m.item_key, RelationKind::belong_to_brand,
                    EntityKind::brand, *m.brand);
    if (relations.contains(RelationKind::belong_to_category))
      for (const auto& c : m.categories)
        g.add_triplet(EntityKind::item, m.item_key, RelationKind::belong_to_category,
                      EntityKind::category, c);
    add_links(m.item_key, m.also_bought, RelationKind::also_bought);
    add_links(m.item_key, m.also_viewed, RelationKind::also_view);
  }

  if (relations.contains(RelationKind::mention_word)) {
    auto words = tokenize_reviews(train, config);
    for (const auto& [user, ws] : words.by_user)
      for (const auto& w : ws)
        g.add_triplet(EntityKind::user, user, RelationKind::mention_word, EntityKind::word, w);
    for (const auto& [item, ws] : words.by_item)
      for (const auto& w : ws)
        g.add_triplet(EntityKind::item, item, RelationKind::mention_word, EntityKind::word, w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Input file formats (tab-separated, UTF-8)

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep,
                                                  std::size_t max_fields) {
  std::vector<std::string_view> out;
  while (out.size() + 1 < max_fields) {
    auto pos = line.find(sep);
    if (pos == std::string_view::npos) break;
    out.push_back(line.substr(0, pos));
    line.remove_prefix(pos + 1);
  }
  out.push_back(line);
  return out;
}

inline std::vector<std::string> split_list(std::string_view field) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto part : split_fields(field, '|', std::string_view::npos)) {
    if (part.empty()) continue;
    std::string s(part);
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

inline std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

inline bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace detail

// `user_key<TAB>item_key<TAB>timestamp<TAB>review_text`; trailing fields may be
// empty or absent. Blank lines are skipped.
inline std::vector<InteractionRecord> read_interactions(std::istream& in,
                                                        std::string_view source = "<interactions>") {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_fields(line, '\t', 4);
    if (f.size() < 2 || f[0].empty() || f[1].empty())
      throw FormatError(detail::where(source, line_no) + ": expected user_key and item_key");
    InteractionRecord r{std::string(f[0]), std::string(f[1]), std::nullopt, std::nullopt};
    if (f.size() > 2 && !f[2].empty()) {
      std::int64_t ts = 0;
      auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), ts);
      if (ec != std::errc{} || p != f[2].data() + f[2].size())
        throw FormatError(detail::where(source, line_no) + ": bad timestamp '" +
                          std::string(f[2]) + "'");
      r.timestamp = ts;
    }
    if (f.size() > 3 && !f[3].empty()) r.review_text = std::string(f[3]);
    out.push_back(std::move(r));
  }
  return out;
}

// `item_key<TAB>brand<TAB>cat1|cat2<TAB>ab1|ab2<TAB>av1|av2`.
inline std::vector<ItemMetaRecord> read_item_meta(std::istream& in,
                                                  std::string_view source = "<metadata>") {
  std::vector<ItemMetaRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_fields(line, '\t', 5);
    if (f[0].empty()) throw FormatError(detail::where(source, line_no) + ": empty item_key");
    if (f.size() == 5 && f[4].find('\t') != std::string_view::npos)
      throw FormatError(detail::where(source, line_no) + ": too many fields");
    ItemMetaRecord m;
    m.item_key = std::string(f[0]);
    if (f.size() > 1 && !f[1].empty()) m.brand = std::string(f[1]);
    if (f.size() > 2) m.categories = detail::split_list(f[2]);
    if (f.size() > 3) m.also_bought = detail::split_list(f[3]);
    if (f.size() > 4) m.also_viewed = detail::split_list(f[4]);
    out.push_back(std::move(m));
  }
  return out;
}

// Writers for the two input formats above; missing optional fields are left
// empty.
inline void write_interactions(std::ostream& out, std::span<const InteractionRecord> records) {
  for (const auto& r : records) {
    out << r.user_key << '\t' << r.item_key << '\t';
    if (r.timestamp) out << *r.timestamp;
    out << '\t' << r.review_text.value_or("") << '\n';
  }
}

inline void write_item_meta(std::ostream& out, std::span<const ItemMetaRecord> meta) {
  auto join = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "|" : "") << v[i];
  };
  for (const auto& m : meta) {
    out << m.item_key << '\t' << m.brand.value_or("") << '\t';
    join(m.categories);
    out << '\t';
    join(m.also_bought);
    out << '\t';
    join(m.also_viewed);
    out << '\n';
  }
}

}  // namespace kgrec
