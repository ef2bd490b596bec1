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

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dparse/autodiff.hpp"
#include "dparse/errors.hpp"
#include "dparse/rng.hpp"
#include "dparse/treebank.hpp"

namespace dparse {

// Word and POS inventories. Id 0 is UNK in both tables; training words get
// ids 1.. in first-occurrence order and keep their corpus frequency.
class Vocab {
 public:
  static constexpr int kUnk = 0;

  Vocab() { clear(); }

  void clear() {
    word_ids_.clear();
    pos_ids_.clear();
    words_ = {"<unk>"};
    tags_ = {"<unk>"};
    freq_ = {0};
  }

  int add_word(const std::string& w, long count = 1) {
    auto [it, inserted] = word_ids_.try_emplace(w, static_cast<int>(words_.size()));
    if (inserted) {
      words_.push_back(w);
      freq_.push_back(0);
    }
    freq_[static_cast<std::size_t>(it->second)] += count;
    return it->second;
  }

  int add_tag(const std::string& t) {
    auto [it, inserted] = pos_ids_.try_emplace(t, static_cast<int>(tags_.size()));
    if (inserted) tags_.push_back(t);
    return it->second;
  }

  int word(const std::string& w) const {
    auto it = word_ids_.find(w);
    return it == word_ids_.end() ? kUnk : it->second;
  }

  int tag(const std::string& t) const {
    auto it = pos_ids_.find(t);
    return it == pos_ids_.end() ? kUnk : it->second;
  }

  long frequency(int word_id) const { return freq_.at(static_cast<std::size_t>(word_id)); }
  int num_words() const { return static_cast<int>(words_.size()); }
  int num_tags() const { return static_cast<int>(tags_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& tags() const { return tags_; }

  bool operator==(const Vocab& o) const { return words_ == o.words_ && tags_ == o.tags_ && freq_ == o.freq_; }

 private:
  std::unordered_map<std::string, int> word_ids_;
  std::unordered_map<std::string, int> pos_ids_;
  std::vector<std::string> words_;
  std::vector<std::string> tags_;
  std::vector<long> freq_;
};

inline Vocab build_vocab(const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  Vocab v;
  for (const Sentence& s : corpus) {
    for (const Token& t : s.tokens) {
      v.add_word(t.form);
      v.add_tag(t.upos);
    }
  }
  return v;
}

enum class EncoderMode { kBiLstm, kDirect };

struct EncoderConfig {
  EncoderMode mode = EncoderMode::kBiLstm;
  int word_dim = 100;
  int pos_dim = 20;
  int lstm_layers = 2;
  int lstm_dim = 125;
  double word_dropout = 0.25;
  // Feed a learned ROOT vector through the BiLSTM as position 0 instead of
  // representing the root by the MISSING vector.
  bool root_token = false;

  int input_dim() const { return word_dim + pos_dim; }
  int output_dim() const { return mode == EncoderMode::kBiLstm ? 2 * lstm_dim : input_dim(); }
};

// Per-sentence encoder output. Index 0 is the artificial root; `x[i]` and
// `v[i]` belong to token i. `v[j]` is invalid when token j was excluded.
template <class Real>
struct EncodedSentence {
  std::vector<ad::Value<Real>> x;
  std::vector<ad::Value<Real>> v;
  ad::Value<Real> missing;
  std::optional<int> excluded;

  int size() const { return static_cast<int>(v.size()) - 1; }

  // Vector for node i: the token's context vector, the root vector, or
  // MISSING for positions outside the sentence and excluded tokens.
  ad::Value<Real> at(int i) const {
    if (i < 0 || i > size()) return missing;
    const auto& val = v[static_cast<std::size_t>(i)];
    return val.valid() ? val : missing;
  }
};

template <class Real>
class Encoder {
 public:
  Encoder(ad::ParameterStore<Real>& store, const EncoderConfig& config, const Vocab& vocab, Rng& rng)
      : config_(config), vocab_(&vocab) {
    const int x_dim = config.input_dim();
    words_ = &store.add_uniform("enc.word", vocab.num_words(), config.word_dim,
                                std::sqrt(3.0 / config.word_dim), rng, true);
    tags_ = &store.add_uniform("enc.pos", vocab.num_tags(), config.pos_dim, std::sqrt(3.0 / config.pos_dim), rng, true);
    if (config.mode == EncoderMode::kBiLstm) {
      const int h = config.lstm_dim;
      for (int layer = 0; layer < config.lstm_layers; ++layer) {
        const int in = layer == 0 ? x_dim : 2 * h;
        for (const char* dir : {"f", "b"}) {
          const std::string base = "enc.l" + std::to_string(layer) + "." + dir;
          Cell cell;
          cell.w = &store.add_glorot(base + ".W", 4 * h, in + h, rng);
          cell.b = &store.add(base + ".b", 4 * h, 1);
          cells_.push_back(cell);
        }
      }
    }
    const int v_dim = config.output_dim();
    missing_ = &store.add_uniform("enc.missing", v_dim, 1, std::sqrt(3.0 / v_dim), rng);
    if (config.root_token) root_ = &store.add_uniform("enc.root", x_dim, 1, std::sqrt(3.0 / x_dim), rng);
  }

  const EncoderConfig& config() const { return config_; }
  const Vocab& vocab() const { return *vocab_; }
  int output_dim() const { return config_.output_dim(); }

  // Word representations x_i = e(w_i) o e(t_i); slot 0 holds the ROOT input
  // when enabled. Word dropout replaces a form by UNK with probability
  // alpha / (alpha + #(w)) and only fires when `training`.
  std::vector<ad::Value<Real>> embed(ad::Tape<Real>& tape, const Sentence& s, bool training, Rng* rng) const {
    std::vector<ad::Value<Real>> x(static_cast<std::size_t>(s.size() + 1));
    if (root_ != nullptr) x[0] = tape.parameter(*root_);
    for (const Token& t : s.tokens) {
      int w = vocab_->word(t.form);
      if (training && rng != nullptr && w != Vocab::kUnk && config_.word_dropout > 0.0) {
        const double a = config_.word_dropout;
        if (rng->bernoulli(a / (a + static_cast<double>(vocab_->frequency(w))))) w = Vocab::kUnk;
      }
      const auto we = tape.lookup(*words_, w);
      const auto te = tape.lookup(*tags_, vocab_->tag(t.upos));
      x[static_cast<std::size_t>(t.index)] = tape.concat({we, te});
    }
    return x;
  }

  // Context vectors over the tokens of `x`, with token `exclude` removed
  // from the sequence before the BiLSTM runs.
  EncodedSentence<Real> contextualize(ad::Tape<Real>& tape, const std::vector<ad::Value<Real>>& x,
                                      std::optional<int> exclude = std::nullopt) const {
    const int n = static_cast<int>(x.size()) - 1;
    if (exclude && (*exclude < 1 || *exclude > n)) {
      throw ContractError("exclude index " + std::to_string(*exclude) + " outside sentence of length " +
                          std::to_string(n));
    }
    EncodedSentence<Real> enc;
    enc.x = x;
    enc.excluded = exclude;
    enc.missing = tape.parameter(*missing_);
    enc.v.assign(static_cast<std::size_t>(n + 1), ad::Value<Real>{});
    if (config_.mode == EncoderMode::kDirect) {
      for (int i = 1; i <= n; ++i) {
        if (!exclude || *exclude != i) enc.v[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
      }
      return enc;
    }
    // Positions fed to the BiLSTM, in surface order.
    std::vector<int> positions;
    std::vector<ad::Value<Real>> seq;
    if (root_ != nullptr) {
      positions.push_back(0);
      seq.push_back(x[0]);
    }
    for (int i = 1; i <= n; ++i) {
      if (exclude && *exclude == i) continue;
      positions.push_back(i);
      seq.push_back(x[static_cast<std::size_t>(i)]);
    }
    const auto out = run_bilstm(tape, seq);
    for (std::size_t k = 0; k < positions.size(); ++k) enc.v[static_cast<std::size_t>(positions[k])] = out[k];
    return enc;
  }

  EncodedSentence<Real> encode(ad::Tape<Real>& tape, const Sentence& s, std::optional<int> exclude = std::nullopt,
                               bool training = false, Rng* rng = nullptr) const {
    if (s.size() == 0) throw ContractError("cannot encode an empty sentence");
    return contextualize(tape, embed(tape, s, training, rng), exclude);
  }

  // Stacked BiLSTM over a sequence of column vectors.
  std::vector<ad::Value<Real>> run_bilstm(ad::Tape<Real>& tape, const std::vector<ad::Value<Real>>& seq) const {
    std::vector<ad::Value<Real>> layer_in = seq;
    for (int layer = 0; layer < config_.lstm_layers; ++layer) {
      const auto fwd = run_lstm(tape, cells_[static_cast<std::size_t>(2 * layer)], layer_in, false);
      const auto bwd = run_lstm(tape, cells_[static_cast<std::size_t>(2 * layer + 1)], layer_in, true);
      std::vector<ad::Value<Real>> next(layer_in.size());
      for (std::size_t t = 0; t < layer_in.size(); ++t) next[t] = tape.concat({fwd[t], bwd[t]});
      layer_in = std::move(next);
    }
    return layer_in;
  }

 private:
  struct Cell {
    ad::Parameter<Real>* w = nullptr;
    ad::Parameter<Real>* b = nullptr;
  };

  // Gates in [input; forget; output; candidate] order:
  //   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
  std::vector<ad::Value<Real>> run_lstm(ad::Tape<Real>& tape, const Cell& cell,
                                        const std::vector<ad::Value<Real>>& seq, bool reverse) const {
    const int h = config_.lstm_dim;
    const int n = static_cast<int>(seq.size());
    std::vector<ad::Value<Real>> out(seq.size());
    const std::vector<Real> zeros(static_cast<std::size_t>(h), Real(0));
    auto hidden = tape.constant(zeros);
    auto memory = tape.constant(zeros);
    const auto w = tape.parameter(*cell.w);
    const auto b = tape.parameter(*cell.b);
    for (int k = 0; k < n; ++k) {
      const int t = reverse ? n - 1 - k : k;
      const auto z = tape.affine(w, tape.concat({seq[static_cast<std::size_t>(t)], hidden}), b);
      const auto i = tape.logistic(tape.slice(z, 0, h));
      const auto f = tape.logistic(tape.slice(z, h, h));
      const auto o = tape.logistic(tape.slice(z, 2 * h, h));
      const auto g = tape.tanh(tape.slice(z, 3 * h, h));
      memory = tape.add(tape.product(f, memory), tape.product(i, g));
      hidden = tape.product(o, tape.tanh(memory));
      out[static_cast<std::size_t>(t)] = hidden;
    }
    return out;
  }

  EncoderConfig config_;
  const Vocab* vocab_;
  ad::Parameter<Real>* words_ = nullptr;
  ad::Parameter<Real>* tags_ = nullptr;
  ad::Parameter<Real>* missing_ = nullptr;
  ad::Parameter<Real>* root_ = nullptr;
  std::vector<Cell> cells_;
};

// Encodings of one sentence under every exclusion requested so far, sharing
// a single set of word representations on one tape.
template <class Real>
class ExclusionCache {
 public:
  ExclusionCache(const Encoder<Real>& encoder, ad::Tape<Real>& tape, const Sentence& s, bool training, Rng* rng)
      : encoder_(&encoder), tape_(&tape), x_(encoder.embed(tape, s, training, rng)) {}

  const EncodedSentence<Real>& get(std::optional<int> exclude) {
    const int key = exclude.value_or(0);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, encoder_->contextualize(*tape_, x_, exclude)).first;
    return it->second;
  }

  const std::vector<ad::Value<Real>>& inputs() const { return x_; }
  std::size_t encodings() const { return cache_.size(); }

 private:
  const Encoder<Real>* encoder_;
  ad::Tape<Real>* tape_;
  std::vector<ad::Value<Real>> x_;
  std::map<int, EncodedSentence<Real>> cache_;
};

}  // namespace dparse
