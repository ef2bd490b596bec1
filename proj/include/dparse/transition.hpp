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

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dparse/autodiff.hpp"
#include "dparse/encoder.hpp"
#include "dparse/errors.hpp"
#include "dparse/rng.hpp"
#include "dparse/treebank.hpp"

// Arc-standard transition system with SWAP for non-projective trees.
namespace dparse::transition {

enum class Kind { kShift, kSwap, kLeftArc, kRightArc };

struct Transition {
  Kind kind = Kind::kShift;
  int label = -1;

  bool operator==(const Transition&) const = default;
};

// Action ids: 0 SHIFT, 1 SWAP, 2..L+1 LEFT-ARC(l), L+2..2L+1 RIGHT-ARC(l).
class ActionSet {
 public:
  explicit ActionSet(int num_labels) : labels_(num_labels) {}

  int size() const { return 2 + 2 * labels_; }
  int num_labels() const { return labels_; }

  int id(const Transition& t) const {
    switch (t.kind) {
      case Kind::kShift: return 0;
      case Kind::kSwap: return 1;
      case Kind::kLeftArc: return 2 + t.label;
      case Kind::kRightArc: return 2 + labels_ + t.label;
    }
    return -1;
  }

  Transition at(int id) const {
    if (id == 0) return {Kind::kShift, -1};
    if (id == 1) return {Kind::kSwap, -1};
    if (id < 2 + labels_) return {Kind::kLeftArc, id - 2};
    return {Kind::kRightArc, id - 2 - labels_};
  }

 private:
  int labels_;
};

// <stack, buffer, arcs>. Node 0 is the artificial root and sits at the
// bottom of the stack; heads are -1 until attached.
struct Configuration {
  std::vector<int> stack;
  std::deque<int> buffer;
  std::vector<int> heads;
  std::vector<int> labels;
  std::vector<std::vector<int>> children;

  static Configuration initial(int n) {
    Configuration c;
    c.stack = {0};
    for (int i = 1; i <= n; ++i) c.buffer.push_back(i);
    c.heads.assign(static_cast<std::size_t>(n + 1), -1);
    c.labels.assign(static_cast<std::size_t>(n + 1), -1);
    c.children.assign(static_cast<std::size_t>(n + 1), {});
    return c;
  }

  int size() const { return static_cast<int>(heads.size()) - 1; }
  bool terminal() const { return buffer.empty() && stack.size() == 1; }

  // i-th stack item from the top, or -1.
  int s(int i) const {
    const int k = static_cast<int>(stack.size()) - 1 - i;
    return k >= 0 ? stack[static_cast<std::size_t>(k)] : -1;
  }

  int b(int i) const { return i < static_cast<int>(buffer.size()) ? buffer[static_cast<std::size_t>(i)] : -1; }

  std::vector<int> left_children(int node) const {
    std::vector<int> out;
    if (node < 0) return out;
    for (int c : children[static_cast<std::size_t>(node)]) {
      if (c < node) out.push_back(c);
    }
    return out;
  }

  std::vector<int> right_children(int node) const {
    std::vector<int> out;
    if (node < 0) return out;
    for (int c : children[static_cast<std::size_t>(node)]) {
      if (c > node) out.push_back(c);
    }
    return out;
  }

  int leftmost_child(int node) const {
    const auto l = left_children(node);
    return l.empty() ? -1 : l.front();
  }

  int rightmost_child(int node) const {
    const auto r = right_children(node);
    return r.empty() ? -1 : r.back();
  }

  DepTree tree() const {
    DepTree t(size());
    for (int i = 1; i <= size(); ++i) {
      t.heads[static_cast<std::size_t>(i)] = heads[static_cast<std::size_t>(i)];
      t.labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)];
    }
    return t;
  }
};

struct Legal {
  bool shift = false;
  bool swap = false;
  bool left_arc = false;
  bool right_arc = false;

  bool any() const { return shift || swap || left_arc || right_arc; }
  bool allows(Kind k) const {
    switch (k) {
      case Kind::kShift: return shift;
      case Kind::kSwap: return swap;
      case Kind::kLeftArc: return left_arc;
      case Kind::kRightArc: return right_arc;
    }
    return false;
  }
};

inline Legal legal(const Configuration& c) {
  Legal l;
  l.shift = !c.buffer.empty();
  if (c.stack.size() >= 2) {
    const int s0 = c.s(0);
    const int s1 = c.s(1);
    l.left_arc = s1 != 0;
    l.right_arc = s0 != 0;
    l.swap = s1 > 0 && s1 < s0;
  }
  return l;
}

inline void apply(Configuration& c, const Transition& t) {
  if (!legal(c).allows(t.kind)) throw ContractError("illegal transition in current configuration");
  auto attach = [&](int head, int dep) {
    c.heads[static_cast<std::size_t>(dep)] = head;
    c.labels[static_cast<std::size_t>(dep)] = t.label;
    auto& ch = c.children[static_cast<std::size_t>(head)];
    ch.insert(std::upper_bound(ch.begin(), ch.end(), dep), dep);
  };
  switch (t.kind) {
    case Kind::kShift:
      c.stack.push_back(c.buffer.front());
      c.buffer.pop_front();
      break;
    case Kind::kSwap: {
      const int s0 = c.stack.back();
      c.stack.pop_back();
      const int s1 = c.stack.back();
      c.stack.pop_back();
      c.stack.push_back(s0);
      c.buffer.push_front(s1);
      break;
    }
    case Kind::kLeftArc: {
      const int s0 = c.stack.back();
      c.stack.pop_back();
      const int s1 = c.stack.back();
      c.stack.pop_back();
      attach(s0, s1);
      c.stack.push_back(s0);
      break;
    }
    case Kind::kRightArc: {
      const int s0 = c.stack.back();
      c.stack.pop_back();
      attach(c.stack.back(), s0);
      break;
    }
  }
}

// Gold-side data the static oracles consult.
struct OracleContext {
  DepTree gold;
  std::vector<int> order;           // projective order rank per node
  std::vector<int> component;       // maximal projective component id per node
  std::vector<int> gold_children;   // number of gold dependents per node

  explicit OracleContext(const DepTree& tree) : gold(tree), order(projective_order(tree)) {
    const int n = tree.size();
    gold_children.assign(static_cast<std::size_t>(n + 1), 0);
    for (int d = 1; d <= n; ++d) ++gold_children[static_cast<std::size_t>(tree.head(d))];
    component = projective_components();
  }

  bool complete(const Configuration& c, int node) const {
    return static_cast<int>(c.children[static_cast<std::size_t>(node)].size()) ==
           gold_children[static_cast<std::size_t>(node)];
  }

  // Arc transition licensed by the gold tree between s0 and s1, if any.
  std::optional<Transition> arc(const Configuration& c) const {
    if (c.stack.size() < 2) return std::nullopt;
    const int s0 = c.s(0);
    const int s1 = c.s(1);
    if (s1 != 0 && gold.head(s1) == s0 && complete(c, s1)) return Transition{Kind::kLeftArc, gold.label(s1)};
    if (gold.head(s0) == s1 && complete(c, s0)) return Transition{Kind::kRightArc, gold.label(s0)};
    return std::nullopt;
  }

 private:
  // Components left by arc-standard without SWAP on the original order:
  // arcs are built whenever licensed, and each token's component is the
  // top of its partial tree at the end.
  std::vector<int> projective_components() const {
    const int n = gold.size();
    Configuration c = Configuration::initial(n);
    for (;;) {
      if (auto t = arc(c)) {
        apply(c, *t);
      } else if (!c.buffer.empty()) {
        apply(c, {Kind::kShift, -1});
      } else {
        break;
      }
    }
    std::vector<int> comp(static_cast<std::size_t>(n + 1), 0);
    for (int i = 0; i <= n; ++i) {
      int r = i;
      while (c.heads[static_cast<std::size_t>(r)] >= 0) r = c.heads[static_cast<std::size_t>(r)];
      comp[static_cast<std::size_t>(i)] = r;
    }
    return comp;
  }
};

// Lazy SWAP oracle: arcs first, then SWAP only when s0 and s1 are out of
// projective order and s0 is not in the same projective component as b0.
inline Transition lazy_oracle(const Configuration& c, const OracleContext& ctx) {
  if (auto t = ctx.arc(c)) return *t;
  if (c.stack.size() >= 2) {
    const int s0 = c.s(0);
    const int s1 = c.s(1);
    const auto& pi = ctx.order;
    if (s1 > 0 && pi[static_cast<std::size_t>(s1)] > pi[static_cast<std::size_t>(s0)]) {
      const bool same = !c.buffer.empty() && ctx.component[static_cast<std::size_t>(s0)] ==
                                                 ctx.component[static_cast<std::size_t>(c.b(0))];
      if (!same) return {Kind::kSwap, -1};
    }
  }
  if (c.buffer.empty()) throw OracleError("configuration is not reachable from the gold tree");
  return {Kind::kShift, -1};
}

// Eager variant: swap whenever s1 follows s0 in projective order.
inline Transition eager_oracle(const Configuration& c, const OracleContext& ctx) {
  if (auto t = ctx.arc(c)) return *t;
  if (c.stack.size() >= 2) {
    const int s0 = c.s(0);
    const int s1 = c.s(1);
    if (s1 > 0 && ctx.order[static_cast<std::size_t>(s1)] > ctx.order[static_cast<std::size_t>(s0)]) {
      return {Kind::kSwap, -1};
    }
  }
  if (c.buffer.empty()) throw OracleError("configuration is not reachable from the gold tree");
  return {Kind::kShift, -1};
}

// Oracle transition sequence for a gold tree, checked for legality at every
// step and bounded in length.
inline std::vector<Transition> oracle_sequence(const DepTree& gold, bool lazy = true) {
  const OracleContext ctx(gold);
  const int n = gold.size();
  Configuration c = Configuration::initial(n);
  std::vector<Transition> seq;
  const std::size_t limit = static_cast<std::size_t>(4 * n * n + 4);
  while (!c.terminal()) {
    const Transition t = lazy ? lazy_oracle(c, ctx) : eager_oracle(c, ctx);
    if (!legal(c).allows(t.kind)) throw OracleError("oracle produced an illegal transition");
    apply(c, t);
    seq.push_back(t);
    if (seq.size() > limit) throw OracleError("oracle did not terminate");
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Feature positions.

struct Position {
  enum class Anchor { kStack, kBuffer };
  enum class Child { kSelf, kLeftmost, kRightmost };

  Anchor anchor = Anchor::kStack;
  int depth = 0;
  Child child = Child::kSelf;

  std::string name() const {
    std::string n = (anchor == Anchor::kStack ? "s" : "b") + std::to_string(depth);
    if (child == Child::kLeftmost) n += "L";
    if (child == Child::kRightmost) n += "R";
    return n;
  }

  bool operator==(const Position&) const = default;

  static std::optional<Position> parse(const std::string& text) {
    if (text.size() < 2 || text.size() > 3) return std::nullopt;
    Position p;
    if (text[0] == 's') {
      p.anchor = Anchor::kStack;
    } else if (text[0] == 'b') {
      p.anchor = Anchor::kBuffer;
    } else {
      return std::nullopt;
    }
    if (text[1] < '0' || text[1] > '2') return std::nullopt;
    p.depth = text[1] - '0';
    if (text.size() == 3) {
      if (text[2] == 'L') {
        p.child = Child::kLeftmost;
      } else if (text[2] == 'R' && p.anchor == Anchor::kStack) {
        p.child = Child::kRightmost;
      } else {
        return std::nullopt;
      }
      if (p.anchor == Anchor::kBuffer && p.depth != 0) return std::nullopt;
    }
    return p;
  }

  // Token at this position, 0 for the root, or -1 when the slot is empty.
  int resolve(const Configuration& c) const {
    const int base = anchor == Anchor::kStack ? c.s(depth) : c.b(depth);
    if (base < 0 || child == Child::kSelf) return base;
    return child == Child::kLeftmost ? c.leftmost_child(base) : c.rightmost_child(base);
  }
};

using FeatureSet = std::vector<Position>;

inline FeatureSet parse_feature_set(const std::string& spec) {
  FeatureSet out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string::npos) comma = spec.size();
    std::string tok = spec.substr(start, comma - start);
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (!tok.empty()) {
      auto p = Position::parse(tok);
      if (!p) throw ConfigError("unknown feature position '" + tok + "'");
      out.push_back(*p);
    }
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty feature set");
  return out;
}

inline std::string feature_set_name(const FeatureSet& fs) {
  std::string out;
  for (const auto& p : fs) out += (out.empty() ? "" : ",") + p.name();
  return out;
}

inline FeatureSet simple_features() { return parse_feature_set("s0,s1,b0"); }
inline FeatureSet extended_features() { return parse_feature_set("s0,s1,s2,b0,s0L,s0R,s1L,s1R,s2L,s2R,b0L"); }

// Concatenated feature vectors; empty slots and excluded tokens read the
// MISSING vector.
template <class Real>
ad::Value<Real> extract_features(ad::Tape<Real>& tape, const Configuration& c, const EncodedSentence<Real>& enc,
                                 const FeatureSet& features) {
  std::vector<ad::Value<Real>> parts;
  parts.reserve(features.size());
  for (const auto& p : features) {
    const int tok = p.resolve(c);
    parts.push_back(tok < 0 ? enc.missing : enc.at(tok));
  }
  return tape.concat(parts);
}

// ---------------------------------------------------------------------------
// Model.

struct ModelConfig {
  EncoderConfig encoder;
  FeatureSet features = simple_features();
  int hidden = 100;
};

// Picks the token to exclude from the BiLSTM for one configuration
// (ablation); nullopt keeps the full encoding.
using DropPolicy = std::function<std::optional<int>(const Configuration&, Rng&)>;

template <class Real>
class Model {
 public:
  Model(const ModelConfig& config, Vocab vocab, LabelVocab labels, std::uint64_t seed)
      : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)), actions_(labels_.size()) {
    Rng init = Rng::derive(seed, Stream::kInit);
    encoder_ = std::make_unique<Encoder<Real>>(store_, config.encoder, vocab_, init);
    const int in = static_cast<int>(config.features.size()) * encoder_->output_dim();
    w1_ = &store_.add_glorot("mlp.W1", config.hidden, in, init);
    b1_ = &store_.add("mlp.b1", config.hidden, 1);
    w2_ = &store_.add_glorot("mlp.W2", actions_.size(), config.hidden, init);
    b2_ = &store_.add("mlp.b2", actions_.size(), 1);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const LabelVocab& labels() const { return labels_; }
  const ActionSet& actions() const { return actions_; }
  const Encoder<Real>& encoder() const { return *encoder_; }
  ad::ParameterStore<Real>& store() { return store_; }
  const ad::ParameterStore<Real>& store() const { return store_; }

  // MLP scores for every action in configuration `c`.
  ad::Value<Real> score(ad::Tape<Real>& tape, const Configuration& c, const EncodedSentence<Real>& enc) {
    const auto f = extract_features(tape, c, enc, config_.features);
    return score_features(tape, f);
  }

  ad::Value<Real> score_features(ad::Tape<Real>& tape, ad::Value<Real> features) {
    const auto h = tape.tanh(tape.affine(tape.parameter(*w1_), features, tape.parameter(*b1_)));
    return tape.affine(tape.parameter(*w2_), h, tape.parameter(*b2_));
  }

 private:
  ModelConfig config_;
  Vocab vocab_;
  LabelVocab labels_;
  ActionSet actions_;
  ad::ParameterStore<Real> store_;
  std::unique_ptr<Encoder<Real>> encoder_;
  ad::Parameter<Real>* w1_ = nullptr;
  ad::Parameter<Real>* b1_ = nullptr;
  ad::Parameter<Real>* w2_ = nullptr;
  ad::Parameter<Real>* b2_ = nullptr;
};

// Highest-scoring legal action id; ties go to the lowest id. -1 if none.
template <class Real>
int best_legal(const ActionSet& actions, const Legal& l, std::span<const Real> scores, int skip = -1) {
  int best = -1;
  for (int id = 0; id < actions.size(); ++id) {
    if (id == skip || !l.allows(actions.at(id).kind)) continue;
    if (best < 0 || scores[static_cast<std::size_t>(id)] > scores[static_cast<std::size_t>(best)]) best = id;
  }
  return best;
}

struct TrainStats {
  double loss = 0.0;
  long decisions = 0;
  long errors = 0;
  long sentences = 0;
};

// One pass over `order` (indices into `corpus`) with the static lazy oracle
// and a margin-1 hinge against the best incorrect legal action. Parameters
// are updated once per sentence.
template <class Real>
TrainStats train_sentence(Model<Real>& model, const Sentence& s, const ad::AdamConfig& adam, Rng& dropout,
                          Rng& ablation, const DropPolicy& drop = {}) {
  TrainStats st;
  const DepTree gold = gold_tree(s, &model.labels());
  const OracleContext ctx(gold);
  ad::Tape<Real> tape;
  ExclusionCache<Real> cache(model.encoder(), tape, s, true, &dropout);
  Configuration c = Configuration::initial(s.size());
  std::vector<ad::Value<Real>> losses;
  const ActionSet& actions = model.actions();
  const std::size_t limit = static_cast<std::size_t>(4 * s.size() * s.size() + 4);
  std::size_t steps = 0;
  while (!c.terminal()) {
    const Transition o = lazy_oracle(c, ctx);
    const int oid = actions.id(o);
    const std::optional<int> excl = drop ? drop(c, ablation) : std::nullopt;
    const auto sc = model.score(tape, c, cache.get(excl));
    const auto vals = sc.value();
    const int wrong = best_legal<Real>(actions, legal(c), vals, oid);
    ++st.decisions;
    if (wrong >= 0) {
      const double margin = 1.0 + static_cast<double>(vals[static_cast<std::size_t>(wrong)]) -
                            static_cast<double>(vals[static_cast<std::size_t>(oid)]);
      if (vals[static_cast<std::size_t>(wrong)] >= vals[static_cast<std::size_t>(oid)]) ++st.errors;
      if (margin > 0.0) {
        losses.push_back(tape.shift(tape.sub(tape.pick(sc, wrong), tape.pick(sc, oid)), 1.0));
        st.loss += margin;
      }
    }
    apply(c, o);
    if (++steps > limit) throw OracleError("oracle did not terminate during training");
  }
  if (!losses.empty()) {
    tape.backward(tape.sum_all(losses));
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
    total.decisions += st.decisions;
    total.errors += st.errors;
    total.sentences += st.sentences;
  }
  return total;
}

// A greedy parse together with the decisions that produced it.
struct Decision {
  Configuration before;
  int action = -1;
  std::optional<int> excluded;
};

// Greedy decoding; every step takes the highest-scoring legal action.
template <class Real>
DepTree parse(Model<Real>& model, const Sentence& s, const DropPolicy& drop = {}, Rng* ablation = nullptr,
              std::vector<Decision>* trace = nullptr) {
  const int n = s.size();
  ad::Tape<Real> tape;
  ExclusionCache<Real> cache(model.encoder(), tape, s, false, nullptr);
  Configuration c = Configuration::initial(n);
  const ActionSet& actions = model.actions();
  Rng fallback(0);
  Rng& arng = ablation != nullptr ? *ablation : fallback;
  const long limit = 4L * n * n;
  long steps = 0;
  while (!c.terminal()) {
    if (++steps > std::max(limit, 4L)) throw DecodeError("transition decoding exceeded 4n^2 steps");
    const std::optional<int> excl = drop ? drop(c, arng) : std::nullopt;
    const auto sc = model.score(tape, c, cache.get(excl));
    const int best = best_legal<Real>(actions, legal(c), sc.value());
    if (trace != nullptr) trace->push_back({c, best, excl});
    apply(c, actions.at(best));
  }
  DepTree t = c.tree();
  const int root_label = std::max(0, model.labels().lookup("root"));
  for (int i = 1; i <= n; ++i) {
    if (t.heads[static_cast<std::size_t>(i)] < 0) {
      t.heads[static_cast<std::size_t>(i)] = 0;
      t.labels[static_cast<std::size_t>(i)] = root_label;
    }
  }
  return t;
}

}  // namespace dparse::transition
