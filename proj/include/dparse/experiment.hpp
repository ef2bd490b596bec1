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
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "dparse/ablation.hpp"
#include "dparse/config.hpp"
#include "dparse/eval.hpp"
#include "dparse/graph.hpp"
#include "dparse/transition.hpp"
#include "dparse/treebank.hpp"
#include "dparse/tsv.hpp"

namespace dparse {

// A trained or trainable parser of either family, owned together with the
// configuration and seed that produced it.
class Parser {
 public:
  Parser(const Config& config, Vocab vocab, LabelVocab labels, std::uint64_t seed) : config_(config), seed_(seed) {
    config_.validate();
    if (config_.is_graph()) {
      graph_ = std::make_unique<graph::Model<float>>(config_.graph_model(), std::move(vocab), std::move(labels), seed);
      if (config_.ablation != "none") graph_drop_ = ablation::graph_policy(config_.ablation);
    } else {
      transition_ =
          std::make_unique<transition::Model<float>>(config_.transition_model(), std::move(vocab), std::move(labels), seed);
      if (config_.ablation != "none") transition_drop_ = ablation::transition_policy(config_.ablation);
    }
  }

  const Config& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  const Vocab& vocab() const { return graph_ ? graph_->vocab() : transition_->vocab(); }
  const LabelVocab& labels() const { return graph_ ? graph_->labels() : transition_->labels(); }
  ad::ParameterStore<float>& store() { return graph_ ? graph_->store() : transition_->store(); }
  const ad::ParameterStore<float>& store() const { return graph_ ? graph_->store() : transition_->store(); }
  const Encoder<float>& encoder() const { return graph_ ? graph_->encoder() : transition_->encoder(); }

  transition::Model<float>* transition_model() { return transition_.get(); }
  graph::Model<float>* graph_model() { return graph_.get(); }

  // One shuffled pass; returns the summed training loss.
  double train_epoch(const std::vector<Sentence>& corpus, Rng& shuffle, Rng& dropout, Rng& ablation) {
    const auto adam = config_.adam();
    if (graph_) {
      const auto st = graph::train_epoch(*graph_, corpus, shuffle, dropout, ablation, adam, graph_drop_);
      return st.loss + st.label_loss;
    }
    return transition::train_epoch(*transition_, corpus, shuffle, dropout, ablation, adam, transition_drop_).loss;
  }

  DepTree parse(const Sentence& s, Rng& ablation) {
    if (graph_) {
      if (config_.ablate_at_test && graph_drop_) return graph::parse(*graph_, s, std::nullopt, graph_drop_, &ablation);
      return graph::parse(*graph_, s);
    }
    if (config_.ablate_at_test && transition_drop_) return transition::parse(*transition_, s, transition_drop_, &ablation);
    return transition::parse(*transition_, s);
  }

  // Parses a corpus with a fresh ablation stream so repeated calls agree.
  std::vector<DepTree> parse_all(const std::vector<Sentence>& corpus) {
    Rng ablation = Rng::derive(seed_, Stream::kAblation, 1);
    std::vector<DepTree> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) out.push_back(parse(s, ablation));
    return out;
  }

  eval::Report evaluate(const std::vector<Sentence>& corpus) {
    return eval::attachment(eval::gold_trees(corpus, labels()), parse_all(corpus));
  }

  std::vector<std::vector<float>> snapshot() const {
    std::vector<std::vector<float>> out;
    for (const auto& p : store().params()) out.push_back(p.value);
    return out;
  }

  void restore(const std::vector<std::vector<float>>& values) {
    auto& params = store().params();
    if (values.size() != params.size()) throw ContractError("snapshot does not match the parameter store");
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
  }

 private:
  Config config_;
  std::uint64_t seed_;
  std::unique_ptr<transition::Model<float>> transition_;
  std::unique_ptr<graph::Model<float>> graph_;
  transition::DropPolicy transition_drop_;
  graph::DropPolicy graph_drop_;
};

// Writes predicted heads and labels into a copy of `corpus`.
inline std::vector<Sentence> with_predictions(const std::vector<Sentence>& corpus, const std::vector<DepTree>& trees,
                                              const LabelVocab& labels) {
  if (corpus.size() != trees.size()) throw AlignmentError("prediction count does not match the corpus");
  std::vector<Sentence> out = corpus;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& tokens = out[i].tokens;
    if (static_cast<int>(tokens.size()) != trees[i].size()) throw AlignmentError("prediction length mismatch");
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const int d = static_cast<int>(t) + 1;
      tokens[t].predicted_head = trees[i].head(d);
      const int l = trees[i].label(d);
      tokens[t].predicted_label = l >= 0 && l < labels.size() ? labels.name(l) : "_";
    }
  }
  return out;
}

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double dev_las = 0.0;
};

struct TrainResult {
  std::unique_ptr<Parser> parser;
  double best_las = 0.0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

// Trains for config.epochs and keeps the parameters of the epoch with the
// best dev LAS (earliest on ties).
inline TrainResult train(const Config& config, const std::vector<Sentence>& train_set,
                         const std::vector<Sentence>& dev_set, std::uint64_t seed, std::ostream* log = nullptr) {
  if (train_set.empty()) throw ConfigError("training corpus is empty");
  if (dev_set.empty()) throw ConfigError("development corpus is empty");
  TrainResult r;
  r.parser = std::make_unique<Parser>(config, build_vocab(train_set), build_labels(train_set), seed);
  Rng shuffle = Rng::derive(seed, Stream::kShuffle);
  Rng dropout = Rng::derive(seed, Stream::kDropout);
  Rng ablation = Rng::derive(seed, Stream::kAblation);
  std::vector<std::vector<float>> best;
  r.best_las = -1.0;
  for (int e = 1; e <= config.epochs; ++e) {
    const double loss = r.parser->train_epoch(train_set, shuffle, dropout, ablation);
    const double las = r.parser->evaluate(dev_set).las;
    r.log.push_back({e, loss, las});
    if (log != nullptr) *log << "seed " << seed << " epoch " << e << " loss " << fixed(loss, 4) << " dev_las " << fixed(las, 2) << "\n";
    if (las > r.best_las) {
      r.best_las = las;
      r.best_epoch = e;
      best = r.parser->snapshot();
    }
  }
  r.parser->restore(best);
  return r;
}

// Cumulative feature ladders for the sweep.
inline std::vector<std::string> transition_ladder() {
  return {"s0", "s1", "b0", "s0L", "s0R", "s1L", "s1R", "s2", "s2L", "s2R", "b0L"};
}

inline std::vector<std::string> graph_ladder() { return {"none", "dist", "hd1", "hd2"}; }

// Cell names and feature strings for a cumulative ladder: cell i uses the
// first i+1 steps. "none" contributes nothing.
struct LadderCell {
  std::string name;
  std::string features;
};

inline std::vector<LadderCell> ladder_cells(const std::vector<std::string>& steps) {
  std::vector<LadderCell> out;
  std::string acc;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] != "none") acc += (acc.empty() ? "" : ",") + steps[i];
    out.push_back({i == 0 ? steps[i] : "+" + steps[i], acc.empty() ? "none" : acc});
  }
  return out;
}

}  // namespace dparse
