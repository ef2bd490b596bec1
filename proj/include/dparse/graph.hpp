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

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dparse/autodiff.hpp"
#include "dparse/decoders.hpp"
#include "dparse/encoder.hpp"
#include "dparse/errors.hpp"
#include "dparse/rng.hpp"
#include "dparse/treebank.hpp"

// Graph-based parser: arc-factored or sibling-factored MLP scores over
// encoder vectors, exact decoding, post-hoc labeling.
namespace dparse::graph {

enum class Order { kFirst = 1, kSecond = 2 };
enum class Decoder { kEisner, kEisner2, kCle };

inline Decoder parse_decoder(const std::string& name) {
  if (name == "eisner") return Decoder::kEisner;
  if (name == "eisner2") return Decoder::kEisner2;
  if (name == "cle") return Decoder::kCle;
  throw ConfigError("unknown decoder '" + name + "'");
}

inline std::string decoder_name(Decoder d) {
  switch (d) {
    case Decoder::kEisner: return "eisner";
    case Decoder::kEisner2: return "eisner2";
    case Decoder::kCle: return "cle";
  }
  return "?";
}

inline Order decoder_order(Decoder d) { return d == Decoder::kEisner2 ? Order::kSecond : Order::kFirst; }

// Surface features: distance embedding, and the vectors of tokens one or
// two positions away from head and dependent.
struct Surface {
  bool dist = false;
  bool near = false;  // h-1, h+1, d-1, d+1
  bool far = false;   // h-2, h+2, d-2, d+2

  bool operator==(const Surface&) const = default;
};

inline Surface parse_surface(const std::string& spec) {
  Surface s;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string::npos) comma = spec.size();
    std::string tok = spec.substr(start, comma - start);
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok == "dist") {
      s.dist = true;
    } else if (tok == "hd1") {
      s.near = true;
    } else if (tok == "hd2") {
      s.far = true;
    } else if (!tok.empty() && tok != "none") {
      throw ConfigError("unknown surface feature '" + tok + "'");
    }
    start = comma + 1;
  }
  return s;
}

inline std::string surface_name(const Surface& s) {
  std::string out;
  auto add = [&](const char* t) { out += (out.empty() ? "" : ",") + std::string(t); };
  if (s.dist) add("dist");
  if (s.near) add("hd1");
  if (s.far) add("hd2");
  return out.empty() ? "none" : out;
}

inline constexpr int kDistBuckets = 24;
inline constexpr int kDistClip = 10;

// Root arcs, two overflow buckets, then signed h - d in [-10, 10].
inline int distance_bucket(int h, int d) {
  if (h == 0) return 0;
  const int diff = h - d;
  if (diff < -kDistClip) return 1;
  if (diff > kDistClip) return 2;
  return 3 + diff + kDistClip;
}

struct ModelConfig {
  EncoderConfig encoder;
  Order order = Order::kFirst;
  Decoder decoder = Decoder::kEisner;
  Surface surface;
  int hidden = 100;
  int label_hidden = 100;
  int dist_dim = 20;
};

// Token to drop from the encoder when scoring arc h -> d (ablation).
using DropPolicy = std::function<std::optional<int>(int h, int d, const DepTree& gold, Rng&)>;

template <class Real>
class Model {
 public:
  Model(const ModelConfig& config, Vocab vocab, LabelVocab labels, std::uint64_t seed)
      : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)) {
    if (decoder_order(config.decoder) != config.order) {
      throw ConfigError("decoder '" + decoder_name(config.decoder) + "' does not match the model order");
    }
    Rng init = Rng::derive(seed, Stream::kInit);
    encoder_ = std::make_unique<Encoder<Real>>(store_, config.encoder, vocab_, init);
    const int v = encoder_->output_dim();
    const int hid = config.hidden;
    offsets_.clear();
    if (config.surface.near) offsets_.insert(offsets_.end(), {{0, -1}, {0, 1}, {1, -1}, {1, 1}});
    if (config.surface.far) offsets_.insert(offsets_.end(), {{0, -2}, {0, 2}, {1, -2}, {1, 2}});
    const int vectors = 2 + (config.order == Order::kSecond ? 1 : 0) + static_cast<int>(offsets_.size());
    const int fan_in = vectors * v + (config.surface.dist ? config.dist_dim : 0);
    const double bound = std::sqrt(6.0 / (hid + fan_in));
    arc_h_ = &store_.add_uniform("arc.h", hid, v, bound, init);
    arc_d_ = &store_.add_uniform("arc.d", hid, v, bound, init);
    if (config.order == Order::kSecond) arc_s_ = &store_.add_uniform("arc.s", hid, v, bound, init);
    for (const auto& [side, off] : offsets_) {
      const std::string name = std::string("arc.") + (side == 0 ? "h" : "d") + (off > 0 ? "+" : "") + std::to_string(off);
      arc_nb_.push_back(&store_.add_uniform(name, hid, v, bound, init));
    }
    if (config.surface.dist) {
      dist_emb_ = &store_.add_uniform("arc.dist.emb", kDistBuckets, config.dist_dim, std::sqrt(3.0 / config.dist_dim),
                                      init, true);
      arc_dist_ = &store_.add_uniform("arc.dist", hid, config.dist_dim, bound, init);
    }
    arc_b1_ = &store_.add("arc.b1", hid, 1);
    arc_w2_ = &store_.add_glorot("arc.w2", 1, hid, init);
    arc_b2_ = &store_.add("arc.b2", 1, 1);

    const int lh = config.label_hidden;
    const double lbound = std::sqrt(6.0 / (lh + 2 * v));
    lab_h_ = &store_.add_uniform("lab.h", lh, v, lbound, init);
    lab_d_ = &store_.add_uniform("lab.d", lh, v, lbound, init);
    lab_b1_ = &store_.add("lab.b1", lh, 1);
    lab_w2_ = &store_.add_glorot("lab.W2", std::max(1, labels_.size()), lh, init);
    lab_b2_ = &store_.add("lab.b2", std::max(1, labels_.size()), 1);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const LabelVocab& labels() const { return labels_; }
  const Encoder<Real>& encoder() const { return *encoder_; }
  ad::ParameterStore<Real>& store() { return store_; }
  const ad::ParameterStore<Real>& store() const { return store_; }

 private:
  template <class>
  friend class Scorer;

  ModelConfig config_;
  Vocab vocab_;
  LabelVocab labels_;
  ad::ParameterStore<Real> store_;
  std::unique_ptr<Encoder<Real>> encoder_;
  std::vector<std::pair<int, int>> offsets_;  // (0 head / 1 dependent, offset)
  ad::Parameter<Real>* arc_h_ = nullptr;
  ad::Parameter<Real>* arc_d_ = nullptr;
  ad::Parameter<Real>* arc_s_ = nullptr;
  std::vector<ad::Parameter<Real>*> arc_nb_;
  ad::Parameter<Real>* dist_emb_ = nullptr;
  ad::Parameter<Real>* arc_dist_ = nullptr;
  ad::Parameter<Real>* arc_b1_ = nullptr;
  ad::Parameter<Real>* arc_w2_ = nullptr;
  ad::Parameter<Real>* arc_b2_ = nullptr;
  ad::Parameter<Real>* lab_h_ = nullptr;
  ad::Parameter<Real>* lab_d_ = nullptr;
  ad::Parameter<Real>* lab_b1_ = nullptr;
  ad::Parameter<Real>* lab_w2_ = nullptr;
  ad::Parameter<Real>* lab_b2_ = nullptr;
};

// Per-sentence scoring state on one tape. The first MLP layer is split into
// per-vector blocks, so each block is applied once per token and arc scores
// only add precomputed projections.
template <class Real>
class Scorer {
 public:
  using V = ad::Value<Real>;

  Scorer(Model<Real>& model, ad::Tape<Real>& tape, const Sentence& s, bool training, Rng* dropout)
      : m_(&model), tape_(&tape), n_(s.size()), cache_(model.encoder(), tape, s, training, dropout) {
    if (n_ < 1) throw ContractError("cannot score an empty sentence");
    if (m_->dist_emb_ != nullptr) {
      const V w = tape.parameter(*m_->arc_dist_);
      for (int b = 0; b < kDistBuckets; ++b) dist_.push_back(tape.matmul(w, tape.lookup(*m_->dist_emb_, b)));
    }
    b1_ = tape.parameter(*m_->arc_b1_);
    w2_ = tape.parameter(*m_->arc_w2_);
    b2_ = tape.parameter(*m_->arc_b2_);
    lb1_ = tape.parameter(*m_->lab_b1_);
    lw2_ = tape.parameter(*m_->lab_w2_);
    lb2_ = tape.parameter(*m_->lab_b2_);
  }

  int size() const { return n_; }
  ExclusionCache<Real>& cache() { return cache_; }
  const EncodedSentence<Real>& encoding(std::optional<int> exclude = std::nullopt) { return cache_.get(exclude); }

  // Arc (or sibling part, s = 0 for NONE) score as a tape value.
  V arc(int h, int d, int s = decode::SiblingScores::kNone, std::optional<int> exclude = std::nullopt) {
    const Frame& f = frame(exclude);
    std::vector<V> terms{b1_, f.blocks[0][slot(h)], f.blocks[1][slot(d)]};
    add_surface(terms, f, h, d, s);
    V z = terms[0];
    for (std::size_t k = 1; k < terms.size(); ++k) z = tape_->add(z, terms[k]);
    return tape_->affine(w2_, tape_->tanh(z), b2_);
  }

  double arc_value(int h, int d, int s = decode::SiblingScores::kNone, std::optional<int> exclude = std::nullopt) {
    const Frame& f = frame(exclude);
    const int hid = m_->config_.hidden;
    z_.assign(static_cast<std::size_t>(hid), 0.0);
    accumulate(b1_);
    accumulate(f.blocks[0][slot(h)]);
    accumulate(f.blocks[1][slot(d)]);
    surface_values(f, h, d, s);
    return finish();
  }

  // Numeric first-order scores; `exclusions` (optional) gives the dropped
  // token per arc.
  decode::ArcScores arc_scores(const std::function<std::optional<int>(int, int)>& exclusions = {}) {
    decode::ArcScores sc(n_);
    for (int h = 0; h <= n_; ++h) {
      for (int d = 1; d <= n_; ++d) {
        if (h != d) sc(h, d) = arc_value(h, d, 0, exclusions ? exclusions(h, d) : std::nullopt);
      }
    }
    return sc;
  }

  // Numeric sibling-part scores for every (h, d, s) the decoder can use.
  decode::SiblingScores sibling_scores() {
    if (m_->arc_s_ == nullptr) throw ConfigError("sibling scores need a second-order model");
    const Frame& f = frame(std::nullopt);
    const int hid = m_->config_.hidden;
    decode::SiblingScores sc(n_);
    std::vector<double> base(static_cast<std::size_t>(hid));
    for (int h = 0; h <= n_; ++h) {
      for (int d = 1; d <= n_; ++d) {
        if (h == d) continue;
        z_.assign(static_cast<std::size_t>(hid), 0.0);
        accumulate(b1_);
        accumulate(f.blocks[0][slot(h)]);
        accumulate(f.blocks[1][slot(d)]);
        surface_values(f, h, d, -1);
        base = z_;
        const int lo = std::min(h, d) + 1, hi = std::max(h, d);
        for (int s = lo - 1; s < hi; ++s) {
          const int sib = s < lo ? decode::SiblingScores::kNone : s;
          z_ = base;
          accumulate(f.blocks[2][slot(sib)]);
          sc(h, d, sib) = finish();
        }
      }
    }
    return sc;
  }

  V label_scores(int h, int d, std::optional<int> exclude = std::nullopt) {
    const Frame& f = frame(exclude);
    const V z = tape_->add(tape_->add(lb1_, f.lab_h[slot(h)]), f.lab_d[slot(d)]);
    return tape_->affine(lw2_, tape_->tanh(z), lb2_);
  }

  int best_label(int h, int d, std::optional<int> exclude = std::nullopt) {
    const auto v = label_scores(h, d, exclude).value();
    int best = 0;
    for (int l = 1; l < static_cast<int>(v.size()); ++l) {
      if (v[static_cast<std::size_t>(l)] > v[static_cast<std::size_t>(best)]) best = l;
    }
    return best;
  }

 private:
  struct Frame {
    // blocks[0] head, [1] dependent, [2] sibling (second order), then the
    // neighbor blocks; each indexed by position 0..n with n+1 = MISSING.
    std::vector<std::vector<V>> blocks;
    std::vector<V> lab_h, lab_d;
  };

  std::size_t slot(int p) const { return static_cast<std::size_t>(p < 0 || p > n_ ? n_ + 1 : p); }

  const Frame& frame(std::optional<int> exclude) {
    const int key = exclude.value_or(0);
    auto it = frames_.find(key);
    if (it != frames_.end()) return it->second;
    const auto& enc = cache_.get(exclude);
    Frame f;
    auto project = [&](ad::Parameter<Real>* p) {
      const V w = tape_->parameter(*p);
      std::vector<V> out;
      out.reserve(static_cast<std::size_t>(n_ + 2));
      for (int i = 0; i <= n_ + 1; ++i) out.push_back(tape_->matmul(w, enc.at(i > n_ ? -1 : i)));
      return out;
    };
    f.blocks.push_back(project(m_->arc_h_));
    f.blocks.push_back(project(m_->arc_d_));
    f.blocks.push_back(m_->arc_s_ != nullptr ? project(m_->arc_s_) : std::vector<V>{});
    for (auto* p : m_->arc_nb_) f.blocks.push_back(project(p));
    f.lab_h = project(m_->lab_h_);
    f.lab_d = project(m_->lab_d_);
    return frames_.emplace(key, std::move(f)).first->second;
  }

  void add_surface(std::vector<V>& terms, const Frame& f, int h, int d, int s) {
    if (m_->arc_s_ != nullptr) terms.push_back(f.blocks[2][slot(s)]);
    for (std::size_t k = 0; k < m_->offsets_.size(); ++k) {
      const auto [side, off] = m_->offsets_[k];
      terms.push_back(f.blocks[3 + k][slot((side == 0 ? h : d) + off)]);
    }
    if (!dist_.empty()) terms.push_back(dist_[static_cast<std::size_t>(distance_bucket(h, d))]);
  }

  // Numeric counterpart of add_surface; s < 0 skips the sibling block.
  void surface_values(const Frame& f, int h, int d, int s) {
    if (m_->arc_s_ != nullptr && s >= 0) accumulate(f.blocks[2][slot(s)]);
    for (std::size_t k = 0; k < m_->offsets_.size(); ++k) {
      const auto [side, off] = m_->offsets_[k];
      accumulate(f.blocks[3 + k][slot((side == 0 ? h : d) + off)]);
    }
    if (!dist_.empty()) accumulate(dist_[static_cast<std::size_t>(distance_bucket(h, d))]);
  }

  void accumulate(V v) {
    const auto x = v.value();
    for (std::size_t i = 0; i < z_.size(); ++i) z_[i] += static_cast<double>(x[i]);
  }

  double finish() const {
    const auto w = w2_.value();
    double out = static_cast<double>(b2_.scalar());
    for (std::size_t i = 0; i < z_.size(); ++i) out += static_cast<double>(w[i]) * std::tanh(z_[i]);
    return out;
  }

  Model<Real>* m_;
  ad::Tape<Real>* tape_;
  int n_;
  ExclusionCache<Real> cache_;
  std::map<int, Frame> frames_;
  std::vector<V> dist_;
  V b1_, w2_, b2_, lb1_, lw2_, lb2_;
  std::vector<double> z_;
};

inline DepTree run_decoder(Decoder dec, const decode::ArcScores& arcs, const decode::SiblingScores* sib) {
  switch (dec) {
    case Decoder::kEisner: return decode::eisner(arcs);
    case Decoder::kCle: return decode::chu_liu_edmonds(arcs);
    case Decoder::kEisner2: return decode::eisner2(arcs, *sib);
  }
  return decode::eisner(arcs);
}

struct TrainStats {
  double loss = 0.0;
  double label_loss = 0.0;
  long arcs = 0;
  long head_errors = 0;
  long sentences = 0;
};

// Exclusion per arc, drawn once per sentence so decoding and the loss see
// the same encodings.
class ArcExclusions {
 public:
  ArcExclusions(int n, const DropPolicy& drop, const DepTree& gold, Rng& rng) : n_(n) {
    if (!drop) return;
    table_.assign(static_cast<std::size_t>((n + 1) * (n + 1)), 0);
    for (int h = 0; h <= n; ++h) {
      for (int d = 1; d <= n; ++d) {
        if (h == d) continue;
        const auto e = drop(h, d, gold, rng);
        table_[static_cast<std::size_t>(h * (n + 1) + d)] = e.value_or(0);
      }
    }
  }

  bool active() const { return !table_.empty(); }
  std::optional<int> operator()(int h, int d) const {
    if (table_.empty()) return std::nullopt;
    const int e = table_[static_cast<std::size_t>(h * (n_ + 1) + d)];
    return e > 0 ? std::optional<int>(e) : std::nullopt;
  }

 private:
  int n_;
  std::vector<int> table_;
};

// One sentence of structured hinge training: cost-augmented decoding with
// +1 on every non-gold arc, loss = augmented score - gold score, plus a
// margin-1 label hinge on every gold arc.
template <class Real>
TrainStats train_sentence(Model<Real>& model, const Sentence& s, const ad::AdamConfig& adam, Rng& dropout,
                          Rng& ablation, const DropPolicy& drop = {}) {
  TrainStats st;
  const int n = s.size();
  const DepTree gold = gold_tree(s, &model.labels());
  const bool second = model.config().order == Order::kSecond;
  if (second && drop) throw ConfigError("ablation is only defined for first-order graph models");
  ad::Tape<Real> tape;
  Scorer<Real> scorer(model, tape, s, true, &dropout);
  const ArcExclusions excl(n, drop, gold, ablation);
  auto ex = [&](int h, int d) { return excl(h, d); };

  decode::ArcScores arcs = second ? decode::ArcScores(n) : scorer.arc_scores(ex);
  std::optional<decode::SiblingScores> sib;
  if (second) sib = scorer.sibling_scores();
  decode::ArcScores augmented = arcs;
  for (int d = 1; d <= n; ++d) {
    for (int h = 0; h <= n; ++h) {
      if (h != d && gold.head(d) != h) augmented(h, d) += 1.0;
    }
  }
  const DepTree pred = run_decoder(model.config().decoder, augmented, sib ? &*sib : nullptr);

  std::vector<ad::Value<Real>> terms;
  double margin = 0.0;
  for (int d = 1; d <= n; ++d) {
    const int hp = pred.head(d), hg = gold.head(d);
    const int sp = second ? decode::inner_sibling(pred, d) : 0;
    const int sg = second ? decode::inner_sibling(gold, d) : 0;
    ++st.arcs;
    if (hp != hg) ++st.head_errors;
    if (hp == hg && sp == sg) continue;
    const double vp = second ? (*sib)(hp, d, sp) : arcs(hp, d);
    const double vg = second ? (*sib)(hg, d, sg) : arcs(hg, d);
    margin += vp - vg + (hp != hg ? 1.0 : 0.0);
  }
  if (margin > 0.0) {
    st.loss = margin;
    for (int d = 1; d <= n; ++d) {
      const int hp = pred.head(d), hg = gold.head(d);
      const int sp = second ? decode::inner_sibling(pred, d) : 0;
      const int sg = second ? decode::inner_sibling(gold, d) : 0;
      if (hp == hg && sp == sg) continue;
      terms.push_back(scorer.arc(hp, d, sp, excl(hp, d)));
      terms.push_back(tape.scale(scorer.arc(hg, d, sg, excl(hg, d)), -1.0));
    }
  }
  for (int d = 1; d <= n; ++d) {
    const int h = gold.head(d), g = gold.label(d);
    if (g < 0 || model.labels().size() < 2) continue;
    const auto ls = scorer.label_scores(h, d, excl(h, d));
    const auto v = ls.value();
    int wrong = -1;
    for (int l = 0; l < static_cast<int>(v.size()); ++l) {
      if (l != g && (wrong < 0 || v[static_cast<std::size_t>(l)] > v[static_cast<std::size_t>(wrong)])) wrong = l;
    }
    const double lm = 1.0 + static_cast<double>(v[static_cast<std::size_t>(wrong)]) - static_cast<double>(v[static_cast<std::size_t>(g)]);
    if (lm > 0.0) {
      st.label_loss += lm;
      terms.push_back(tape.sub(tape.pick(ls, wrong), tape.pick(ls, g)));
    }
  }
  if (!terms.empty()) {
    tape.backward(tape.sum_all(terms));
    model.store().adam_step(adam);
  }
  st.sentences = 1;
  return st;
}

template <class Real>
TrainStats train_epoch(Model<Real>& model, const std::vector<Sentence>& corpus, Rng& shuffle, Rng& dropout,
                       Rng& ablation, const ad::AdamConfig& adam, const DropPolicy& drop = {}) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle.shuffle(std::span<std::size_t>(order));
  TrainStats total;
  for (std::size_t idx : order) {
    const TrainStats st = train_sentence(model, corpus[idx], adam, dropout, ablation, drop);
    total.loss += st.loss;
    total.label_loss += st.label_loss;
    total.arcs += st.arcs;
    total.head_errors += st.head_errors;
    total.sentences += st.sentences;
  }
  return total;
}

// Decode with `decoder`, then label every predicted arc.
template <class Real>
DepTree parse(Model<Real>& model, const Sentence& s, std::optional<Decoder> decoder = std::nullopt,
              const DropPolicy& drop = {}, Rng* ablation = nullptr) {
  const Decoder dec = decoder.value_or(model.config().decoder);
  if (decoder_order(dec) != model.config().order) {
    throw ConfigError("decoder '" + decoder_name(dec) + "' does not match the model order");
  }
  const int n = s.size();
  ad::Tape<Real> tape;
  Scorer<Real> scorer(model, tape, s, false, nullptr);
  Rng fallback(0);
  const DepTree gold = drop ? gold_tree(s, &model.labels()) : DepTree(n);
  const ArcExclusions excl(n, drop, gold, ablation != nullptr ? *ablation : fallback);
  DepTree t(n);
  if (model.config().order == Order::kSecond) {
    const auto sib = scorer.sibling_scores();
    t = run_decoder(dec, decode::ArcScores(n), &sib);
  } else {
    t = run_decoder(dec, scorer.arc_scores([&](int h, int d) { return excl(h, d); }), nullptr);
  }
  for (int d = 1; d <= n; ++d) {
    t.labels[static_cast<std::size_t>(d)] = scorer.best_label(t.head(d), d, excl(t.head(d), d));
  }
  return t;
}

}  // namespace dparse::graph
