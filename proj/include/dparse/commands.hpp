// Copyright 2026 The dparse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "dparse/ablation.hpp"
#include "dparse/config.hpp"
#include "dparse/eval.hpp"
#include "dparse/experiment.hpp"
#include "dparse/impact.hpp"
#include "dparse/tsv.hpp"

// Multi-seed experiment drivers shared by the command line tool and the
// acceptance suite.
namespace dparse::run {

inline std::vector<Sentence> read_treebank(const std::string& path) {
  if (path.empty()) throw ConfigError("no treebank path given");
  std::ifstream in(path);
  if (!in) throw IoError("cannot read treebank " + path);
  try {
    return parse_conllu(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.line());
  }
}

inline void write_treebank(const std::string& path, const std::vector<Sentence>& corpus, bool predicted) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_conllu(out, corpus, predicted);
}

inline std::string treebank_name(const std::string& path) {
  const std::string stem = std::filesystem::path(path).stem().string();
  return stem.empty() ? "treebank" : stem;
}

// Short model identifier for result tables.
inline std::string model_name(const Config& c) {
  std::string name;
  if (c.is_graph()) {
    name = "graph-" + c.order;
    if (c.decoder == "cle") name += "-cle";
    const std::string surface = graph::surface_name(graph::parse_surface(c.surface));
    if (surface != "none") name += "+" + surface;
  } else {
    const auto fs = transition::feature_set_name(transition::parse_feature_set(c.features));
    if (fs == transition::feature_set_name(transition::simple_features())) name = "transition-simple";
    else if (fs == transition::feature_set_name(transition::extended_features())) name = "transition-extended";
    else name = "transition[" + fs + "]";
  }
  if (c.mode == "direct") name += "-direct";
  if (c.ablation != "none") name += "-drop:" + c.ablation;
  return name;
}

inline std::vector<TrainResult> train_seeds(const Config& c, const std::vector<Sentence>& train_set,
                                            const std::vector<Sentence>& dev_set, std::ostream* log = nullptr) {
  std::vector<TrainResult> out;
  for (auto seed : c.seeds) out.push_back(train(c, train_set, dev_set, seed, log));
  return out;
}

inline std::vector<double> best_las(const std::vector<TrainResult>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.best_las);
  return out;
}

// Per-epoch training log.
inline void write_train_log(const std::string& path, const std::vector<TrainResult>& runs) {
  std::vector<TsvRow> rows;
  for (const auto& r : runs) {
    for (const auto& e : r.log) {
      rows.push_back({std::to_string(r.parser->seed()), std::to_string(e.epoch), fixed(e.loss, 4), fixed(e.dev_las, 2),
                      e.epoch == r.best_epoch ? "*" : ""});
    }
  }
  write_tsv_file(path, {"seed", "epoch", "loss", "dev_las", "best"}, rows);
}

// Feature sweep ---------------------------------------------------------------

struct SweepRow {
  std::string cell;
  std::string mode;
  std::vector<double> las;
  eval::SeedStats stats;
};

// Every ladder cell in both encoder modes; graph configs are additionally
// crossed with `orders`.
inline std::vector<SweepRow> sweep(const Config& base, const std::vector<Sentence>& train_set,
                                   const std::vector<Sentence>& dev_set, const std::vector<std::string>& ladder,
                                   const std::vector<std::string>& orders, std::ostream* log = nullptr) {
  if (ladder.empty()) throw ConfigError("empty feature ladder");
  std::vector<SweepRow> rows;
  const auto cells = ladder_cells(ladder);
  const std::vector<std::string> graph_orders = base.is_graph() ? orders : std::vector<std::string>{""};
  for (const auto& order : graph_orders) {
    for (const auto& cell : cells) {
      for (const std::string mode : {"bilstm", "direct"}) {
        Config c = base;
        c.mode = mode;
        if (c.is_graph()) {
          c.set("order", order);
          c.decoder = order == "second" ? "eisner2" : (c.decoder == "eisner2" ? "eisner" : c.decoder);
          c.surface = cell.features;
        } else {
          c.features = cell.features;
        }
        c.validate();
        if (log != nullptr) *log << "# cell " << (order.empty() ? "" : order + ":") << cell.name << " " << mode << "\n";
        SweepRow r{order.empty() ? cell.name : order + ":" + cell.name, mode, best_las(train_seeds(c, train_set, dev_set, log)), {}};
        r.stats = eval::seed_stats(r.las);
        rows.push_back(r);
      }
    }
  }
  return rows;
}

inline void write_sweep(const std::string& path, const std::vector<SweepRow>& rows) {
  std::vector<TsvRow> out;
  for (const auto& r : rows) out.push_back({r.cell, r.mode, fixed(r.stats.mean, 2), fixed(r.stats.stddev, 2)});
  write_tsv_file(path, {"cell", "mode", "mean_las", "stddev"}, out);
}

// Ablation ------------------------------------------------------------------

struct AblationOutcome {
  std::vector<ablation::RunResult> baseline;
  std::vector<ablation::RunResult> ablated;
  std::vector<ablation::DropRow> rows;
};

inline AblationOutcome ablate(const Config& base, const std::vector<Sentence>& train_set,
                              const std::vector<Sentence>& dev_set, const std::vector<std::string>& specs,
                              std::ostream* log = nullptr) {
  if (specs.empty()) throw ConfigError("no ablation specs given");
  const std::uint64_t corpus = corpus_fingerprint(dev_set);
  AblationOutcome out;
  Config b = base;
  b.ablation = "none";
  if (log != nullptr) *log << "# baseline\n";
  for (const auto& r : train_seeds(b, train_set, dev_set, log)) {
    out.baseline.push_back({"none", r.parser->seed(), r.best_las, corpus});
  }
  for (const auto& spec : specs) {
    Config c = base;
    c.ablation = spec;
    c.validate();
    if (log != nullptr) *log << "# ablation " << spec << "\n";
    for (const auto& r : train_seeds(c, train_set, dev_set, log)) {
      out.ablated.push_back({spec, r.parser->seed(), r.best_las, corpus});
    }
  }
  out.rows = ablation::compare(out.baseline, out.ablated);
  return out;
}

// Impact ----------------------------------------------------------------------

// BiLSTM impacts (bilstm encoders only) and score impacts for one model.
inline impact::Aggregator impact_report(Parser& p, const std::vector<Sentence>& dev_set, bool lstm = true,
                                        bool scores = true) {
  impact::Aggregator agg;
  if (lstm && p.config().mode == "bilstm") agg.merge(impact::lstm_corpus(p.encoder(), dev_set));
  if (scores) {
    if (auto* g = p.graph_model()) agg.merge(impact::graph_corpus(*g, dev_set));
    if (auto* t = p.transition_model()) agg.merge(impact::transition_corpus(*t, dev_set));
  }
  return agg;
}

// Evaluation ------------------------------------------------------------------

// Models with the same name are seeds of one configuration: LAS is averaged
// over them and the length curves pool their predictions.
struct ModelGroup {
  std::string name;
  std::vector<double> las;
  std::vector<DepTree> gold;
  std::vector<DepTree> pred;
};

inline std::vector<ModelGroup> evaluate_models(const std::vector<Parser*>& parsers, const std::vector<Sentence>& dev_set) {
  std::vector<ModelGroup> groups;
  for (Parser* p : parsers) {
    const std::string name = model_name(p->config());
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ModelGroup& g) { return g.name == name; });
    if (it == groups.end()) {
      groups.push_back({name, {}, {}, {}});
      it = groups.end() - 1;
    }
    const auto gold = eval::gold_trees(dev_set, p->labels());
    const auto pred = p->parse_all(dev_set);
    it->las.push_back(eval::attachment(gold, pred).las);
    it->gold.insert(it->gold.end(), gold.begin(), gold.end());
    it->pred.insert(it->pred.end(), pred.begin(), pred.end());
  }
  return groups;
}

// table1.tsv, fig2.tsv, fig8.tsv and significance.tsv (pairwise rank-sum
// p-values between groups) in `dir`.
inline void write_evaluation(const std::string& dir, const std::string& treebank, const std::vector<ModelGroup>& groups,
                             int cap) {
  std::vector<eval::LasRow> table;
  std::vector<std::pair<std::string, std::vector<eval::LengthPoint>>> curves;
  for (const auto& g : groups) {
    table.push_back({g.name, treebank, eval::seed_stats(g.las)});
    curves.emplace_back(g.name, eval::by_length(g.gold, g.pred, cap));
  }
  const std::filesystem::path d(dir);
  eval::write_las_table((d / "table1.tsv").string(), table);
  eval::write_length_curves((d / "fig2.tsv").string(), false, curves, cap);
  eval::write_length_curves((d / "fig8.tsv").string(), true, curves, cap);
  std::vector<TsvRow> sig;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      if (groups[i].las.size() < 2 || groups[j].las.size() < 2) continue;
      sig.push_back({groups[i].name, groups[j].name, fixed(eval::rank_sum_p(groups[i].las, groups[j].las), 4)});
    }
  }
  write_tsv_file((d / "significance.tsv").string(), {"model_a", "model_b", "p_value"}, sig);
}

}  // namespace dparse::run
