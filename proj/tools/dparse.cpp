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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dparse/commands.hpp"
#include "dparse/config.hpp"
#include "dparse/model_io.hpp"
#include "dparse/synth.hpp"

namespace {

using namespace dparse;
namespace fs = std::filesystem;

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string treebank;
  std::string dev;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& o) {
  cmd->add_option("--config", o.configs, "Experiment config file (key = value lines); later files override earlier ones");
  cmd->add_option("--set", o.sets, "Override one config key, as key=value");
  cmd->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
  cmd->add_option("--out-dir", o.out_dir, "Directory for models and TSV outputs");
  cmd->add_option("--treebank", o.treebank, "Training treebank (CoNLL-U)");
  cmd->add_option("--dev", o.dev, "Development treebank (CoNLL-U)");
  cmd->add_flag("--quiet", o.quiet, "No progress output on stderr");
}

Config resolve(const Common& o) {
  Config c;
  for (const auto& path : o.configs) load_config(c, path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (o.seed) c.seeds = {*o.seed};
  if (!o.treebank.empty()) c.treebank = o.treebank;
  if (!o.dev.empty()) c.dev = o.dev;
  c.validate();
  return c;
}

std::string out_path(const Common& o, const std::string& file) {
  fs::create_directories(o.out_dir);
  return (fs::path(o.out_dir) / file).string();
}

std::ostream* progress(const Common& o) { return o.quiet ? nullptr : &std::cerr; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_table(const std::string& path) {
  std::ifstream in(path);
  std::cout << in.rdbuf();
}

int cmd_train(const Common& o) {
  const Config c = resolve(o);
  const auto train_set = run::read_treebank(c.treebank);
  const auto dev_set = run::read_treebank(c.dev);
  auto runs = run::train_seeds(c, train_set, dev_set, progress(o));
  std::vector<Parser*> parsers;
  for (auto& r : runs) {
    model_io::save(*r.parser, out_path(o, "model.seed" + std::to_string(r.parser->seed()) + ".dprs"));
    parsers.push_back(r.parser.get());
  }
  std::ofstream(out_path(o, "config.txt")) << c.to_text();
  run::write_train_log(out_path(o, "train_log.tsv"), runs);
  run::write_evaluation(o.out_dir, run::treebank_name(c.treebank), run::evaluate_models(parsers, dev_set), c.length_cap);
  print_table(out_path(o, "table1.tsv"));
  return 0;
}

int cmd_parse(const std::string& model, const std::string& input, const std::string& output) {
  auto p = model_io::load(model);
  const auto corpus = run::read_treebank(input);
  const auto parsed = with_predictions(corpus, p->parse_all(corpus), p->labels());
  if (output.empty() || output == "-") {
    write_conllu(std::cout, parsed, true);
  } else {
    run::write_treebank(output, parsed, true);
  }
  return 0;
}

std::vector<std::unique_ptr<Parser>> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("no --model files given");
  std::vector<std::unique_ptr<Parser>> out;
  for (const auto& p : paths) out.push_back(model_io::load(p));
  return out;
}

std::string dev_path(const Common& o, const Parser& p) {
  if (!o.dev.empty()) return o.dev;
  if (!p.config().dev.empty()) return p.config().dev;
  throw ConfigError("no --dev treebank given");
}

int cmd_eval(const Common& o, const std::vector<std::string>& models) {
  auto loaded = load_models(models);
  const auto dev_set = run::read_treebank(dev_path(o, *loaded.front()));
  std::vector<Parser*> parsers;
  for (auto& p : loaded) parsers.push_back(p.get());
  const std::string tb = run::treebank_name(loaded.front()->config().treebank);
  fs::create_directories(o.out_dir);
  run::write_evaluation(o.out_dir, tb, run::evaluate_models(parsers, dev_set), loaded.front()->config().length_cap);
  print_table(out_path(o, "table1.tsv"));
  return 0;
}

int cmd_sweep(const Common& o, const std::string& ladder, const std::string& orders) {
  const Config c = resolve(o);
  const auto train_set = run::read_treebank(c.treebank);
  const auto dev_set = run::read_treebank(c.dev);
  const auto steps = ladder.empty() ? (c.is_graph() ? graph_ladder() : transition_ladder()) : split_list(ladder);
  const auto rows = run::sweep(c, train_set, dev_set, steps, split_list(orders), progress(o));
  const std::string path = out_path(o, c.is_graph() ? "fig3b.tsv" : "fig3a.tsv");
  run::write_sweep(path, rows);
  print_table(path);
  return 0;
}

int cmd_impact(const Common& o, const std::vector<std::string>& models, const std::string& taxonomy) {
  if (taxonomy != "all" && taxonomy != "lstm" && taxonomy != "scores") {
    throw ConfigError("unknown taxonomy '" + taxonomy + "' (expected all, lstm or scores)");
  }
  auto loaded = load_models(models);
  const auto dev_set = run::read_treebank(dev_path(o, *loaded.front()));
  impact::Aggregator agg;
  for (auto& p : loaded) agg.merge(run::impact_report(*p, dev_set, taxonomy != "scores", taxonomy != "lstm"));
  auto write = [&](const std::string& file, std::vector<std::string> taxonomies) {
    std::vector<impact::Row> rows;
    for (const auto& t : taxonomies) {
      const auto r = agg.rows(t);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    if (rows.empty()) return;
    impact::write_rows(out_path(o, file), rows);
    print_table(out_path(o, file));
  };
  write("fig4.tsv", {"distance_relation", "distance"});
  write("fig5a.tsv", {"config_position"});
  write("fig5b.tsv", {"tree_position"});
  if (agg.empty()) throw ConfigError("no impact rows: BiLSTM impacts need a bilstm model");
  return 0;
}

int cmd_ablate(const Common& o, const std::string& specs) {
  const Config c = resolve(o);
  const auto train_set = run::read_treebank(c.treebank);
  const auto dev_set = run::read_treebank(c.dev);
  const auto out = run::ablate(c, train_set, dev_set, split_list(specs), progress(o));
  const std::string path = out_path(o, c.is_graph() ? "fig6b.tsv" : "fig6a.tsv");
  ablation::write_drops(path, out.rows);
  print_table(path);
  return 0;
}

int cmd_synth(const Common& o, int sentences, const std::string& output) {
  synth::Options opt;
  opt.sentences = sentences;
  opt.seed = o.seed.value_or(1);
  if (sentences < 1) throw ConfigError("--sentences must be positive");
  const auto corpus = synth::generate(opt);
  if (output.empty() || output == "-") {
    write_conllu(std::cout, corpus);
  } else {
    run::write_treebank(output, corpus, false);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dparse: BiLSTM transition- and graph-based dependency parsers with analysis tools"};
  app.require_subcommand(1);
  Common o;

  auto* train = app.add_subcommand("train", "Train one model per seed, keeping the best dev epoch");
  add_common(train, o);

  auto* parse = app.add_subcommand("parse", "Parse a CoNLL-U file with a trained model");
  add_common(parse, o);
  std::string model, input, output;
  parse->add_option("--model", model, "Model file")->required();
  parse->add_option("--input", input, "CoNLL-U input")->required();
  parse->add_option("--output", output, "CoNLL-U output (default stdout)");

  auto* evaluate = app.add_subcommand("eval", "LAS table, length curves and significance for trained models");
  add_common(evaluate, o);
  std::vector<std::string> models;
  evaluate->add_option("--model", models, "Model files (repeatable)")->required();

  auto* sweep = app.add_subcommand("sweep", "Train a cumulative feature ladder with and without BiLSTMs");
  add_common(sweep, o);
  std::string ladder, orders = "first,second";
  sweep->add_option("--ladder", ladder, "Comma-separated ladder steps");
  sweep->add_option("--orders", orders, "Graph model orders to cross with the ladder");

  auto* imp = app.add_subcommand("impact", "Gradient-based impact of input tokens");
  add_common(imp, o);
  std::vector<std::string> imodels;
  std::string taxonomy = "all";
  imp->add_option("--model", imodels, "Model files (repeatable)")->required();
  imp->add_option("--taxonomy", taxonomy, "all, lstm or scores");

  auto* abl = app.add_subcommand("ablate", "Retrain with one structural token removed from the BiLSTM input");
  add_common(abl, o);
  std::string specs;
  abl->add_option("--specs", specs, "Comma-separated positions, e.g. s0L,s1R or sibling,child")->required();

  auto* syn = app.add_subcommand("synth", "Write a synthetic treebank");
  add_common(syn, o);
  int sentences = 500;
  std::string synth_out;
  syn->add_option("--sentences", sentences, "Number of sentences");
  syn->add_option("--output", synth_out, "CoNLL-U output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (parse->parsed()) return cmd_parse(model, input, output);
    if (evaluate->parsed()) return cmd_eval(o, models);
    if (sweep->parsed()) return cmd_sweep(o, ladder, orders);
    if (imp->parsed()) return cmd_impact(o, imodels, taxonomy);
    if (abl->parsed()) return cmd_ablate(o, specs);
    if (syn->parsed()) return cmd_synth(o, sentences, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "dparse: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dparse: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
