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
#include <string>
#include <vector>

#include "dparse/rng.hpp"
#include "dparse/treebank.hpp"

// Synthetic treebank from a small English-like grammar: clauses with
// subjects, objects, auxiliaries, adverbs, clausal complements and
// coordination; noun phrases with determiners, adjectives, prepositional
// modifiers and relative clauses. Prepositional attachment depends on the
// lexical class of the object noun, and some relative clauses are
// extraposed behind the verb, which makes those trees non-projective.
namespace dparse::synth {

struct Options {
  int sentences = 500;
  std::uint64_t seed = 1;
  int max_depth = 2;
  double extraposition = 0.3;
};

namespace detail {

struct Lexicon {
  std::vector<std::string> nouns, verbs, tverbs, cverbs, adjs, advs, auxs;
  std::vector<std::string> dets{"the", "a", "this", "every", "some", "no", "that", "my"};
  std::vector<std::string> preps{"with", "of", "in", "on", "for", "from", "near", "under"};

  // Nouns with even index are "instrument-like": a prepositional phrase
  // headed by them prefers to attach to the verb.
  static bool verbal_noun(int id) { return id % 2 == 0; }

  Lexicon() {
    Rng rng(0x5eed);
    const char* on[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
    const char* nu[] = {"a", "e", "i", "o", "u"};
    auto word = [&](int syllables, const std::string& tail) {
      std::string w;
      for (int i = 0; i < syllables; ++i) w += std::string(on[rng.below(14)]) + nu[rng.below(5)];
      return w + tail;
    };
    auto fill = [&](std::vector<std::string>& v, int n, const std::string& tail) {
      while (static_cast<int>(v.size()) < n) {
        std::string w = word(2 + static_cast<int>(rng.below(2)), tail);
        bool dup = false;
        for (const auto& x : v) dup = dup || x == w;
        if (!dup) v.push_back(w);
      }
    };
    fill(nouns, 120, "n");
    fill(verbs, 30, "s");
    fill(tverbs, 50, "ts");
    fill(cverbs, 10, "ks");
    fill(adjs, 50, "y");
    fill(advs, 15, "ly");
    auxs = {"can", "will", "must", "may"};
  }
};

inline const Lexicon& lexicon() {
  static const Lexicon lex;
  return lex;
}

// Zipf-like choice: index i with weight 1/(i+1).
inline int zipf(std::size_t n, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += 1.0 / static_cast<double>(i + 1);
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < n; ++i) {
    r -= 1.0 / static_cast<double>(i + 1);
    if (r < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

struct Node {
  std::string form, upos, label;
  int head = -1;   // syntactic head, node index; -1 for the root word
  int place = -1;  // node whose span this node is linearized in
  bool left = false;
  int noun_id = -1;
};

class Builder {
 public:
  Builder(const Options& o, Rng& rng) : opt_(o), rng_(rng), lex_(lexicon()) {}

  Sentence sentence() {
    nodes_.clear();
    const int v = clause(-1, "root", 0, false);
    add(".", "PUNCT", "punct", v, false);
    return linearize();
  }

 private:
  int add(const std::string& form, const std::string& upos, const std::string& label, int head, bool left) {
    Node n;
    n.form = form;
    n.upos = upos;
    n.label = label;
    n.head = head;
    n.place = head;
    n.left = left;
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  const std::string& pick(const std::vector<std::string>& v) { return v[static_cast<std::size_t>(zipf(v.size(), rng_))]; }

  int clause(int head, const std::string& label, int depth, bool relative) {
    const double kind = rng_.uniform();
    const bool transitive = kind < 0.55;
    const bool complement = !transitive && kind < 0.7 && depth < opt_.max_depth;
    const auto& pool = transitive ? lex_.tverbs : complement ? lex_.cverbs : lex_.verbs;
    const int v = add(pick(pool), "VERB", label, head, false);
    int subj = -1;
    if (rng_.bernoulli(0.25)) add(lex_.auxs[rng_.below(lex_.auxs.size())], "AUX", "aux", v, true);
    if (relative) {
      add(rng_.bernoulli(0.5) ? "that" : "which", "PRON", "nsubj", v, true);
    } else {
      subj = noun_phrase(v, "nsubj", true, depth);
      if (rng_.bernoulli(0.2)) add(pick(lex_.advs), "ADV", "advmod", v, true);
    }
    if (transitive) noun_phrase(v, "obj", false, depth);
    if (complement) {
      const int c = clause(v, "ccomp", depth + 1, false);
      add("that", "SCONJ", "mark", c, true);
      move_first(c);
    }
    int pps = rng_.bernoulli(0.5) ? 1 + static_cast<int>(rng_.below(2)) : 0;
    if (depth > 0) pps = std::min(pps, 1);
    for (int i = 0; i < pps; ++i) prep_phrase(v, depth);
    if (rng_.bernoulli(0.15)) add(pick(lex_.advs), "ADV", "advmod", v, false);
    if (subj >= 0 && depth < opt_.max_depth && rng_.bernoulli(0.12)) {
      const int rc = clause(subj, "acl:relcl", depth + 1, true);
      if (rng_.bernoulli(opt_.extraposition)) {
        nodes_[static_cast<std::size_t>(rc)].place = v;
      }
    }
    if (!relative && depth == 0 && rng_.bernoulli(0.15)) {
      const int c = clause(v, "conj", depth + 1, false);
      add("and", "CCONJ", "cc", c, true);
      move_first(c);
    }
    return v;
  }

  // Moves the most recently added dependent of `c` to the front of its left
  // dependents (mark and cc precede the subject).
  void move_first(int c) {
    Node n = nodes_.back();
    nodes_.pop_back();
    first_.emplace_back(c, n);
  }

  int noun_phrase(int head, const std::string& label, bool left, int depth) {
    const int id = zipf(lex_.nouns.size(), rng_);
    const int n = add(lex_.nouns[static_cast<std::size_t>(id)], "NOUN", label, head, left);
    nodes_[static_cast<std::size_t>(n)].noun_id = id;
    const int adjs = rng_.bernoulli(0.35) ? 1 + static_cast<int>(rng_.below(2)) : 0;
    for (int i = 0; i < adjs; ++i) add(pick(lex_.adjs), "ADJ", "amod", n, true);
    if (rng_.bernoulli(0.75)) add(pick(lex_.dets), "DET", "det", n, true);
    if (depth < opt_.max_depth && label != "nsubj" && rng_.bernoulli(0.1)) clause(n, "acl:relcl", depth + 1, true);
    return n;
  }

  // A prepositional phrase whose object noun decides the attachment: verbal
  // nouns attach to the verb, the others to the closest preceding noun.
  void prep_phrase(int verb, int depth) {
    int target_noun = -1;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const Node& c = nodes_[static_cast<std::size_t>(i)];
      if (c.upos == "NOUN" && !c.left && c.head == verb) {
        target_noun = i;
        break;
      }
    }
    const int id = zipf(lex_.nouns.size(), rng_);
    const bool to_verb = target_noun < 0 || (Lexicon::verbal_noun(id) ? rng_.bernoulli(0.9) : rng_.bernoulli(0.1));
    const int head = to_verb ? verb : target_noun;
    const int n = add(lex_.nouns[static_cast<std::size_t>(id)], "NOUN", to_verb ? "obl" : "nmod", head, false);
    nodes_[static_cast<std::size_t>(n)].noun_id = id;
    if (rng_.bernoulli(0.2)) add(pick(lex_.adjs), "ADJ", "amod", n, true);
    if (rng_.bernoulli(0.6)) add(pick(lex_.dets), "DET", "det", n, true);
    add(pick(lex_.preps), "ADP", "case", n, true);
    (void)depth;
  }

  // Left dependents are emitted in reverse creation order (the latest added
  // is farthest from the head), right dependents in creation order.
  Sentence linearize() {
    for (auto& [c, n] : first_) {
      n.head = c;
      n.place = c;
      n.left = true;
      nodes_.push_back(n);
    }
    first_.clear();
    const std::size_t m = nodes_.size();
    std::vector<std::vector<int>> left(m), right(m);
    int root = -1;
    for (std::size_t i = 0; i < m; ++i) {
      const Node& n = nodes_[i];
      if (n.place < 0) {
        root = static_cast<int>(i);
        continue;
      }
      (n.left ? left : right)[static_cast<std::size_t>(n.place)].push_back(static_cast<int>(i));
    }
    std::vector<int> order;
    auto emit = [&](auto&& self, int x) -> void {
      const auto& l = left[static_cast<std::size_t>(x)];
      for (auto it = l.rbegin(); it != l.rend(); ++it) self(self, *it);
      order.push_back(x);
      for (int r : right[static_cast<std::size_t>(x)]) self(self, r);
    };
    emit(emit, root);
    std::vector<int> position(m, 0);
    for (std::size_t i = 0; i < order.size(); ++i) position[static_cast<std::size_t>(order[i])] = static_cast<int>(i) + 1;
    Sentence s;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Node& n = nodes_[static_cast<std::size_t>(order[i])];
      Token t;
      t.index = static_cast<int>(i) + 1;
      t.form = n.form;
      t.upos = n.upos;
      t.gold_head = n.head < 0 ? 0 : position[static_cast<std::size_t>(n.head)];
      t.gold_label = n.label;
      t.columns[2] = n.form;
      t.columns[4] = "_";
      t.columns[5] = "_";
      s.tokens.push_back(t);
    }
    return s;
  }

  const Options& opt_;
  Rng& rng_;
  const Lexicon& lex_;
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Node>> first_;
};

}  // namespace detail

// `opt.sentences` trees, a pure function of `opt`.
inline std::vector<Sentence> generate(const Options& opt) {
  Rng rng = Rng::derive(opt.seed, Stream::kSynth);
  detail::Builder b(opt, rng);
  std::vector<Sentence> out;
  out.reserve(static_cast<std::size_t>(opt.sentences));
  for (int i = 0; i < opt.sentences; ++i) {
    Sentence s = b.sentence();
    s.id = "synth-" + std::to_string(opt.seed) + "-" + std::to_string(i + 1);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dparse::synth
