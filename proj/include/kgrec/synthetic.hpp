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
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kgrec/error.hpp"
#include "kgrec/ingest.hpp"

namespace kgrec {

// Synthetic data with latent clusters. Items are split into contiguous
// clusters; each item's category is its cluster, its brand is item % brands.
// Users belong to cluster (user % clusters) and buy mostly within it.
struct PlantedSpec {
  std::size_t users = 30;
  std::size_t items = 50;
  std::size_t clusters = 2;
  std::size_t brands = 2;
  std::size_t purchases_per_user = 12;
  double own_cluster_probability = 0.9;
  // Purchases in the last (n - ceil(0.7 n)) timestamp slots mention this word,
  // which therefore only ever appears in held-out reviews under a 70/30 split.
  std::string late_word = "latecomer";
  std::size_t words_per_cluster = 8;
  std::size_t links_per_item = 2;
  std::uint64_t seed = 42;
};

struct PlantedData {
  std::vector<InteractionRecord> interactions;
  std::vector<ItemMetaRecord> meta;
  std::vector<std::size_t> user_cluster;
  std::vector<std::size_t> item_cluster;
};

inline std::string planted_user_key(std::size_t u) { return "u" + std::to_string(u); }
inline std::string planted_item_key(std::size_t i) { return "i" + std::to_string(i); }

inline PlantedData make_planted(const PlantedSpec& spec) {
  if (spec.clusters < 1 || spec.items < spec.clusters || spec.brands < 1)
    throw ConfigError("planted spec needs items >= clusters >= 1 and brands >= 1");
  if (spec.purchases_per_user > spec.items)
    throw ConfigError("purchases_per_user exceeds item count");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  PlantedData d;

  std::vector<std::vector<std::size_t>> members(spec.clusters);
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::size_t c = i * spec.clusters / spec.items;
    d.item_cluster.push_back(c);
    members[c].push_back(i);
  }
  auto cluster_word = [&](std::size_t c, std::size_t w) {
    return "topic" + std::string(1, static_cast<char>('a' + c % 26)) + std::to_string(w);
  };

  const std::size_t late_from = static_cast<std::size_t>(
      std::ceil(0.7 * static_cast<double>(spec.purchases_per_user) - 1e-9));
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::size_t own = u % spec.clusters;
    d.user_cluster.push_back(own);
    std::vector<char> bought(spec.items, 0);
    for (std::size_t n = 0; n < spec.purchases_per_user; ++n) {
      std::size_t c = own;
      if (spec.clusters > 1 && coin(rng) >= spec.own_cluster_probability) {
        std::uniform_int_distribution<std::size_t> other(0, spec.clusters - 2);
        c = other(rng);
        if (c >= own) ++c;
      }
      std::vector<std::size_t> open;
      for (auto i : members[c])
        if (!bought[i]) open.push_back(i);
      if (open.empty())
        for (std::size_t i = 0; i < spec.items; ++i)
          if (!bought[i]) open.push_back(i);
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      const std::size_t item = open[pick(rng)];
      bought[item] = 1;

      std::string review;
      std::uniform_int_distribution<std::size_t> word(0, spec.words_per_cluster - 1);
      for (int w = 0; w < 3; ++w) review += cluster_word(d.item_cluster[item], word(rng)) + " ";
      review += "good";
      if (n >= late_from) review += " " + spec.late_word;

      d.interactions.push_back({planted_user_key(u), planted_item_key(item), std::move(review),
                                static_cast<std::int64_t>(1000 + n)});
    }
  }

  for (std::size_t i = 0; i < spec.items; ++i) {
    ItemMetaRecord m;
    m.item_key = planted_item_key(i);
    m.brand = "brand" + std::to_string(i % spec.brands);
    m.categories = {"category" + std::to_string(d.item_cluster[i])};
    const auto& peers = members[d.item_cluster[i]];
    std::uniform_int_distribution<std::size_t> peer(0, peers.size() - 1);
    std::uniform_int_distribution<std::size_t> any(0, spec.items - 1);
    for (std::size_t l = 0; l < spec.links_per_item; ++l) {
      const auto p = peers[peer(rng)];
      const auto a = any(rng);
      auto link = [&](std::vector<std::string>& list, std::size_t target) {
        const auto key = planted_item_key(target);
        if (target != i && std::ranges::find(list, key) == list.end()) list.push_back(key);
      };
      link(m.also_bought, p);
      link(m.also_viewed, a);
    }
    d.meta.push_back(std::move(m));
  }
  return d;
}

}  // namespace kgrec
