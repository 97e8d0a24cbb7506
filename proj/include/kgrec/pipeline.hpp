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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "kgrec/config.hpp"
#include "kgrec/error.hpp"
#include "kgrec/eval.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/io.hpp"
#include "kgrec/kg.hpp"
#include "kgrec/model.hpp"
#include "kgrec/recommend.hpp"

// Orchestration behind the CLI subcommands. Each command reads only the
// paths named in the RunConfig and never modifies its inputs.

namespace kgrec {

namespace detail {

inline const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required --") + key);
  return value;
}

inline const std::string& require_input(const std::string& value, const char* key) {
  require_path(value, key);
  if (!std::filesystem::is_regular_file(value))
    throw IoError(std::string("--") + key + " '" + value + "' does not exist");
  return value;
}

inline std::string or_default(const std::string& value, const std::string& fallback) {
  return value.empty() ? fallback : value;
}

inline std::vector<InteractionRecord> load_interactions(const std::string& path) {
  auto in = open_input(path);
  return read_interactions(in, path);
}

inline std::vector<ItemMetaRecord> load_meta(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_input(path);
  return read_item_meta(in, path);
}

inline std::string dataset_name(const std::string& path) {
  auto stem = std::filesystem::path(path).stem().string();
  return stem.empty() ? "dataset" : stem;
}

}  // namespace detail

// Users / items / interactions / density in the dataset-statistics layout,
// followed by per-relation triplet counts.
inline void write_stats(std::ostream& out, const std::string& name, const GraphStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %9s %9s %14s %10s", "Dataset", "#Users", "#Items",
                "#Interactions", "Density");
  out << buf << '\n';
  std::snprintf(buf, sizeof buf, "%-16s %9zu %9zu %14zu %9.4f%%", name.c_str(), s.users(),
                s.items(), s.interactions(), 100.0 * s.buy_density);
  out << buf << '\n';
  for (auto k : {EntityKind::word, EntityKind::brand, EntityKind::category}) {
    std::snprintf(buf, sizeof buf, "  entities %-20s %zu", std::string(to_string(k)).c_str(),
                  s.entities[index_of(k)]);
    out << buf << '\n';
  }
  for (auto r : kAllRelationKinds) {
    std::snprintf(buf, sizeof buf, "  triplets %-20s %zu", std::string(to_string(r)).c_str(),
                  s.triplets[index_of(r)]);
    out << buf << '\n';
  }
}

struct BuildSummary {
  GraphStats stats;
  std::size_t train_records = 0;
  std::size_t test_pairs = 0;
  std::size_t skipped_meta_records = 0;
  std::size_t skipped_links = 0;
};

inline KeyPairs unique_pairs(std::span<const InteractionRecord> records) {
  KeyPairs out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records)
    if (seen.emplace(r.user_key, r.item_key).second) out.emplace_back(r.user_key, r.item_key);
  return out;
}

inline BuildSummary cmd_build_graph(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto& interactions = detail::require_input(cfg.interactions, "interactions");
  if (!cfg.metadata.empty()) detail::require_input(cfg.metadata, "metadata");
  const auto& graph_path = detail::require_path(cfg.graph, "graph");
  const auto pairs_path = detail::or_default(cfg.test_pairs, graph_path + ".test.tsv");

  const auto records = detail::load_interactions(interactions);
  if (records.empty()) throw ConfigError("no interactions in '" + interactions + "'");
  const auto meta = detail::load_meta(cfg.metadata);
  const auto split = split_interactions(records, cfg.split_spec());
  if (split.train.empty()) throw ConfigError("split produced an empty training set");

  auto built = build_graph(split.train, meta, cfg.tokenizer(), cfg.relation_set());
  save_triplets(graph_path, built.graph);
  const auto pairs = unique_pairs(split.test);
  {
    auto out = open_output(pairs_path);
    write_pairs(out, pairs);
  }

  BuildSummary s{built.graph.stats(), split.train.size(), pairs.size(),
                 built.skipped_meta_records, built.skipped_links};
  write_stats(log, detail::dataset_name(interactions), s.stats);
  log << "  train records " << s.train_records << ", held-out pairs " << s.test_pairs
      << ", skipped metadata records " << s.skipped_meta_records << ", skipped links "
      << s.skipped_links << '\n';
  return s;
}

inline TrainResult<float> cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (!cfg.epochs) throw ConfigError("missing required --epochs");
  const auto hp = cfg.hyperparams();
  const auto& graph_path = detail::require_input(cfg.graph, "graph");
  const auto& model_path = detail::require_path(cfg.model, "model");
  const auto loss_path = detail::or_default(cfg.loss_csv, model_path + ".loss.csv");

  const auto graph = load_triplets(graph_path);
  auto result = train(graph, hp, [&](std::size_t epoch, const EpochStats& st) {
    log << "epoch " << epoch << " mean_loss " << st.mean_loss << '\n';
  });
  save_model(model_path, result.store, graph.vocabulary(), model_flags(hp));
  auto csv = open_output(loss_path);
  csv << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, result.loss_history[e]);
    csv << buf;
  }
  return result;
}

namespace detail {

struct LoadedPair {
  KnowledgeGraph graph;
  ModelFile model;
};

inline LoadedPair load_graph_and_model(const RunConfig& cfg) {
  LoadedPair p{load_triplets(require_input(cfg.graph, "graph")),
               load_model(require_input(cfg.model, "model"))};
  if (p.graph.vocabulary().digest() != p.model.vocab.digest())
    throw FormatError("model '" + cfg.model + "' was not trained on graph '" + cfg.graph +
                      "' (vocabulary digest mismatch)");
  return p;
}

}  // namespace detail

inline std::vector<RankedList> cmd_recommend(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto loaded = detail::load_graph_and_model(cfg);
  const auto& graph = loaded.graph;
  std::vector<EntityRef> users;
  if (!cfg.users.empty()) {
    auto in = open_input(cfg.users);
    std::string line;
    while (std::getline(in, line)) {
      auto key = detail::trim(line);
      if (key.empty()) continue;
      auto u = graph.find(EntityKind::user, key);
      if (!u) throw LookupError("unknown user '" + std::string(key) + "'");
      users.push_back(*u);
    }
  } else {
    for (std::uint32_t u = 0; u < graph.entity_count(EntityKind::user); ++u)
      users.push_back({EntityKind::user, u});
  }
  auto lists = recommend_all(loaded.model.store, graph, std::span<const EntityRef>(users),
                             cfg.top_n, cfg.threads);
  if (cfg.output.empty()) {
    write_recommendations(out, graph, lists);
  } else {
    auto f = open_output(cfg.output);
    write_recommendations(f, graph, lists);
  }
  return lists;
}

namespace detail {

inline void write_reports(const RunConfig& cfg, std::span<const EvalReport> reports, std::ostream& out) {
  write_report_table(out, reports);
  if (!cfg.report.empty()) {
    auto f = open_output(cfg.report);
    write_report_table(f, reports);
  }
  if (!cfg.record.empty()) {
    auto f = open_output(cfg.record);
    for (const auto& r : reports) write_report_record(f, r);
  }
}

}  // namespace detail

inline EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto pairs_path =
      detail::or_default(cfg.test_pairs, detail::require_path(cfg.graph, "graph") + ".test.tsv");
  const auto loaded = detail::load_graph_and_model(cfg);
  KeyPairs pairs;
  {
    auto in = open_input(detail::require_input(pairs_path, "test-pairs"));
    pairs = read_pairs(in, pairs_path);
  }
  const auto truth = make_ground_truth_from_pairs(loaded.graph, pairs);
  auto report = evaluate(loaded.model.store, loaded.graph, truth, cfg.top_n, cfg.threads);
  report.subset = to_label(cfg.relation_set());
  report.seed = cfg.seed;
  report.hyperparams = cfg.hyperparams();
  detail::write_reports(cfg, std::span<const EvalReport>(&report, 1), out);
  return report;
}

inline std::vector<EvalReport> cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto subsets = cfg.subset_list();
  require_buy(subsets);
  if (!cfg.epochs) throw ConfigError("missing required --epochs");
  const auto& interactions = detail::require_input(cfg.interactions, "interactions");
  if (!cfg.metadata.empty()) detail::require_input(cfg.metadata, "metadata");

  const auto records = detail::load_interactions(interactions);
  if (records.empty()) throw ConfigError("no interactions in '" + interactions + "'");
  const auto meta = detail::load_meta(cfg.metadata);
  const auto split = split_interactions(records, cfg.split_spec());
  const auto rows = ablate(split.train, split.test, meta, cfg.tokenizer(), subsets,
                           cfg.hyperparams(), cfg.top_n);
  std::vector<EvalReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  detail::write_reports(cfg, reports, out);
  return reports;
}

}  // namespace kgrec
