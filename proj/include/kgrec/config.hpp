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
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/eval.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"

namespace kgrec {

// Everything a CLI run needs. Serialized as flat `key = value` lines; the
// same keys double as long flag names (`--dim 32`).
struct RunConfig {
  // paths
  std::string interactions;
  std::string metadata;
  std::string graph;
  std::string test_pairs;
  std::string model;
  std::string loss_csv;
  std::string report;
  std::string record;
  std::string output;
  std::string users;

  // split + tokenizer
  double train_fraction = 0.70;
  std::size_t min_train_items = 2;
  std::size_t min_token_length = 2;
  std::size_t min_corpus_frequency = 5;
  std::size_t max_vocab = 50000;

  // model
  std::size_t dim = 300;
  double lr = 0.01;
  double margin = 1.0;
  std::size_t negatives = 5;
  std::optional<std::size_t> epochs;
  std::uint64_t seed = 0;
  bool normalize_entities = true;
  bool type_constrained = true;
  bool filtered = true;
  std::string mode = "default";  // or "literal-paper"

  // ranking / orchestration
  std::string relations = "all";
  std::string subsets = "buy;buy+category;buy+brand;buy+mention;buy+also_view;buy+also_bought;all";
  std::size_t top_n = 10;
  std::size_t threads = 1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  SplitSpec split_spec() const {
    SplitSpec s;
    s.train_fraction = train_fraction;
    s.seed = seed;
    s.min_train_items = min_train_items;
    return s;
  }

  TokenizerConfig tokenizer() const {
    TokenizerConfig t;
    t.min_token_length = min_token_length;
    t.min_corpus_frequency = min_corpus_frequency;
    t.max_vocab = max_vocab;
    return t;
  }

  // The literal-paper mode samples uniformly over all entities and never
  // renormalizes, overriding the corresponding keys.
  Hyperparams hyperparams() const {
    Hyperparams hp;
    hp.dim = dim;
    hp.learning_rate = lr;
    hp.margin = margin;
    hp.negatives = negatives;
    hp.epochs = epochs.value_or(0);
    hp.seed = seed;
    hp.normalize_entities = normalize_entities;
    hp.type_constrained_sampling = type_constrained;
    hp.filtered_sampling = filtered;
    hp.threads = threads;
    if (mode == "literal-paper") {
      hp.normalize_entities = false;
      hp.type_constrained_sampling = false;
    }
    return hp;
  }

  RelationSet relation_set() const { return parse_relation_set(relations); }

  std::vector<RelationSet> subset_list() const {
    std::vector<RelationSet> out;
    std::string_view rest(subsets);
    while (!rest.empty()) {
      auto pos = rest.find(';');
      auto part = rest.substr(0, pos);
      if (!part.empty()) out.push_back(parse_relation_set(part));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (out.empty()) throw ConfigError("no relation subsets configured");
    return out;
  }

  // Checks value invariants without touching the filesystem.
  void validate() const {
    split_spec().validate();
    tokenizer().validate();
    hyperparams().validate();
    if (mode != "default" && mode != "literal-paper")
      throw ConfigError("mode must be 'default' or 'literal-paper', got '" + mode + "'");
    if (top_n == 0) throw ConfigError("top-n must be positive");
    relation_set();
    subset_list();
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "interactions", "metadata", "graph", "test-pairs", "model", "loss-csv", "report",
        "record", "output", "users", "train-fraction", "min-train-items", "min-token-length",
        "min-corpus-frequency", "max-vocab", "dim", "lr", "margin", "negatives", "epochs", "seed",
        "normalize-entities", "type-constrained", "filtered", "mode", "relations", "subsets",
        "top-n", "threads"};
    return k;
  }

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  std::string to_text() const {
    std::string out;
    for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || p != value.data() + value.size())
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

inline void RunConfig::set(std::string_view key, std::string_view value) {
  using detail::parse_bool;
  using detail::parse_number;
  value = detail::trim(value);
  std::string* path = key == "interactions"   ? &interactions
                      : key == "metadata"     ? &metadata
                      : key == "graph"        ? &graph
                      : key == "test-pairs"   ? &test_pairs
                      : key == "model"        ? &model
                      : key == "loss-csv"     ? &loss_csv
                      : key == "report"       ? &report
                      : key == "record"       ? &record
                      : key == "output"       ? &output
                      : key == "users"        ? &users
                      : key == "mode"         ? &mode
                      : key == "relations"    ? &relations
                      : key == "subsets"      ? &subsets
                                              : nullptr;
  if (path) {
    *path = std::string(value);
    return;
  }
  if (key == "train-fraction") train_fraction = parse_number<double>(key, value);
  else if (key == "min-train-items") min_train_items = parse_number<std::size_t>(key, value);
  else if (key == "min-token-length") min_token_length = parse_number<std::size_t>(key, value);
  else if (key == "min-corpus-frequency") min_corpus_frequency = parse_number<std::size_t>(key, value);
  else if (key == "max-vocab") max_vocab = parse_number<std::size_t>(key, value);
  else if (key == "dim") dim = parse_number<std::size_t>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "margin") margin = parse_number<double>(key, value);
  else if (key == "negatives") negatives = parse_number<std::size_t>(key, value);
  else if (key == "epochs") {
    if (value.empty()) epochs.reset();
    else epochs = parse_number<std::size_t>(key, value);
  }
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "normalize-entities") normalize_entities = parse_bool(key, value);
  else if (key == "type-constrained") type_constrained = parse_bool(key, value);
  else if (key == "filtered") filtered = parse_bool(key, value);
  else if (key == "top-n") top_n = parse_number<std::size_t>(key, value);
  else if (key == "threads") threads = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

inline std::string RunConfig::get(std::string_view key) const {
  using detail::format_double;
  if (key == "interactions") return interactions;
  if (key == "metadata") return metadata;
  if (key == "graph") return graph;
  if (key == "test-pairs") return test_pairs;
  if (key == "model") return model;
  if (key == "loss-csv") return loss_csv;
  if (key == "report") return report;
  if (key == "record") return record;
  if (key == "output") return output;
  if (key == "users") return users;
  if (key == "train-fraction") return format_double(train_fraction);
  if (key == "min-train-items") return std::to_string(min_train_items);
  if (key == "min-token-length") return std::to_string(min_token_length);
  if (key == "min-corpus-frequency") return std::to_string(min_corpus_frequency);
  if (key == "max-vocab") return std::to_string(max_vocab);
  if (key == "dim") return std::to_string(dim);
  if (key == "lr") return format_double(lr);
  if (key == "margin") return format_double(margin);
  if (key == "negatives") return std::to_string(negatives);
  if (key == "epochs") return epochs ? std::to_string(*epochs) : std::string();
  if (key == "seed") return std::to_string(seed);
  if (key == "normalize-entities") return normalize_entities ? "true" : "false";
  if (key == "type-constrained") return type_constrained ? "true" : "false";
  if (key == "filtered") return filtered ? "true" : "false";
  if (key == "mode") return mode;
  if (key == "relations") return relations;
  if (key == "subsets") return subsets;
  if (key == "top-n") return std::to_string(top_n);
  if (key == "threads") return std::to_string(threads);
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

// Applies `key = value` lines onto `cfg`. Blank lines and '#' comments are
// ignored; later lines win.
inline void apply_config_text(RunConfig& cfg, std::istream& in, std::string_view source = "<config>") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto v = detail::trim(line);
    if (v.empty() || v.front() == '#') continue;
    auto eq = v.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      cfg.set(detail::trim(v.substr(0, eq)), v.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline RunConfig parse_config_text(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  apply_config_text(cfg, in);
  return cfg;
}

}  // namespace kgrec
