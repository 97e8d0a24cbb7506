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

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "kgrec/kgrec.hpp"

namespace {

const std::map<std::string, std::string>& help_text() {
  static const std::map<std::string, std::string> h = {
      {"interactions", "interactions file (user, item, timestamp, review; tab-separated)"},
      {"metadata", "item metadata file (item, brand, categories, also_bought, also_viewed)"},
      {"graph", "triplet file"},
      {"test-pairs", "held-out user/item pairs (default: <graph>.test.tsv)"},
      {"model", "KGE1 model file"},
      {"loss-csv", "per-epoch loss CSV (default: <model>.loss.csv)"},
      {"report", "plain-text metric table output"},
      {"record", "machine-readable metric record output"},
      {"output", "recommendation output (default: stdout)"},
      {"users", "file with one user key per line (default: all users)"},
      {"train-fraction", "per-user share of items used for training (0.7)"},
      {"min-train-items", "users with fewer items stay entirely in train (2)"},
      {"min-token-length", "shortest review token kept (2)"},
      {"min-corpus-frequency", "minimum corpus count for a review word (5)"},
      {"max-vocab", "word vocabulary cap (50000)"},
      {"dim", "embedding dimension (300)"},
      {"lr", "SGD learning rate (0.01)"},
      {"margin", "hinge margin (1.0)"},
      {"negatives", "head and tail corruptions per triplet (5)"},
      {"epochs", "training epochs (required for train/ablate)"},
      {"seed", "random seed for split, init and sampling (0)"},
      {"normalize-entities", "renormalize entity rows each epoch (true)"},
      {"type-constrained", "draw corruptions from the replaced slot's kind (true)"},
      {"filtered", "reject corruptions that are observed triplets (true)"},
      {"mode", "'default' or 'literal-paper' (untyped sampling, no renormalization)"},
      {"relations", "relation subset for build-graph, e.g. buy+category (all)"},
      {"subsets", "';'-separated relation subsets for ablate"},
      {"top-n", "recommendation / evaluation cutoff (10)"},
      {"threads", "worker threads; 1 is the deterministic mode (1)"},
  };
  return h;
}

struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;
  std::string config_path;
  bool print_config = false;

  void attach(CLI::App& parent, const std::string& name, const std::string& description) {
    app = parent.add_subcommand(name, description);
    app->add_option("--config", config_path, "flat key = value config file");
    app->add_flag("--print-config", print_config, "print the effective configuration and exit");
    for (const auto& key : kgrec::RunConfig::keys())
      app->add_option("--" + key, values[key], help_text().at(key));
  }

  kgrec::RunConfig resolve() {
    kgrec::RunConfig cfg;
    if (!config_path.empty()) {
      auto in = kgrec::open_input(config_path);
      kgrec::apply_config_text(cfg, in, config_path);
    }
    for (const auto& key : kgrec::RunConfig::keys())
      if (app->get_option("--" + key)->count() > 0) cfg.set(key, values[key]);
    return cfg;
  }
};

int exit_code(const kgrec::Error& e) {
  const auto& c = e.error_class();
  if (c == "ConfigError") return 2;
  if (c == "FormatError") return 3;
  if (c == "IoError") return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"kgrec: knowledge-graph embeddings for top-N recommendation"};
  cli.require_subcommand(1);

  Command build, train, recommend, evaluate, ablate;
  build.attach(cli, "build-graph", "split interactions and build the triplet graph");
  train.attach(cli, "train", "learn embeddings for a triplet graph");
  recommend.attach(cli, "recommend", "write top-N recommendations");
  evaluate.attach(cli, "evaluate", "score held-out purchases at top-N");
  ablate.attach(cli, "ablate", "train and evaluate once per relation subset");

  kgrec::PlantedSpec planted;
  std::string synth_interactions, synth_metadata;
  auto* synth = cli.add_subcommand("synth", "write a synthetic clustered dataset");
  synth->add_option("--interactions", synth_interactions, "interactions output")->required();
  synth->add_option("--metadata", synth_metadata, "metadata output")->required();
  synth->add_option("--users", planted.users, "number of users");
  synth->add_option("--items", planted.items, "number of items");
  synth->add_option("--clusters", planted.clusters, "latent clusters");
  synth->add_option("--purchases", planted.purchases_per_user, "purchases per user");
  synth->add_option("--seed", planted.seed, "generator seed");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (synth->parsed()) {
      const auto data = kgrec::make_planted(planted);
      auto out = kgrec::open_output(synth_interactions);
      kgrec::write_interactions(out, data.interactions);
      auto meta = kgrec::open_output(synth_metadata);
      kgrec::write_item_meta(meta, data.meta);
      return 0;
    }

    for (Command* cmd : {&build, &train, &recommend, &evaluate, &ablate}) {
      if (!cmd->app->parsed()) continue;
      const auto cfg = cmd->resolve();
      if (cmd->print_config) {
        std::cout << cfg.to_text();
        return 0;
      }
      if (cmd == &build) kgrec::cmd_build_graph(cfg, std::cout);
      else if (cmd == &train) kgrec::cmd_train(cfg, std::cerr);
      else if (cmd == &recommend) kgrec::cmd_recommend(cfg, std::cout);
      else if (cmd == &evaluate) kgrec::cmd_evaluate(cfg, std::cout);
      else kgrec::cmd_ablate(cfg, std::cout);
    }
  } catch (const kgrec::Error& e) {
    std::cerr << "error\t" << e.error_class() << '\t' << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error\tInternalError\t" << e.what() << '\n';
    return 1;
  }
  return 0;
}
