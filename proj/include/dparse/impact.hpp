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
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dparse/autodiff.hpp"
#include "dparse/encoder.hpp"
#include "dparse/errors.hpp"
#include "dparse/graph.hpp"
#include "dparse/transition.hpp"
#include "dparse/tsv.hpp"

// Derivative-based attribution: how strongly each input x_i moves a BiLSTM
// vector or a parser score, as a percentage of the sentence total.
namespace dparse::impact {

inline std::vector<double> normalize(const std::vector<double>& norms) {
  double total = 0.0;
  for (double x : norms) total += x;
  if (!(total > 0.0)) throw UndefinedImpactError("all input gradients are zero");
  std::vector<double> out(norms.size());
  for (std::size_t i = 0; i < norms.size(); ++i) out[i] = 100.0 * norms[i] / total;
  return out;
}

// Frobenius norms of d(out)/d(x_i) for tokens 1..n, one backward pass per
// output entry. Parameters are not touched.
template <class Real>
std::vector<double> jacobian_norms(ad::Tape<Real>& tape, ad::Value<Real> out, const std::vector<ad::Value<Real>>& x) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<double> sq(static_cast<std::size_t>(n), 0.0);
  std::vector<Real> seed(static_cast<std::size_t>(out.size()), Real(0));
  for (int k = 0; k < out.size(); ++k) {
    seed[static_cast<std::size_t>(k)] = Real(1);
    tape.backward_from(out, seed, false);
    seed[static_cast<std::size_t>(k)] = Real(0);
    for (int i = 1; i <= n; ++i) {
      for (Real g : tape.gradient(x[static_cast<std::size_t>(i)])) sq[static_cast<std::size_t>(i - 1)] += double(g) * double(g);
    }
  }
  for (double& v : sq) v = std::sqrt(v);
  return sq;
}

// Impact of every x_i on v(x_t); entry i-1 belongs to token i.
template <class Real>
std::vector<double> lstm_impacts(ad::Tape<Real>& tape, const EncodedSentence<Real>& enc, int t) {
  return normalize(jacobian_norms(tape, enc.at(t), enc.x));
}

// Impact of every x_i on a scalar score.
template <class Real>
std::vector<double> score_impacts(ad::Tape<Real>& tape, ad::Value<Real> score, const std::vector<ad::Value<Real>>& x) {
  return normalize(jacobian_norms(tape, score, x));
}

// Taxonomies ----------------------------------------------------------------

inline constexpr int kMaxOffset = 15;
inline constexpr int kMaxTreeOffset = 5;

// Relation of source i to target t in the gold tree.
inline std::string relation(const DepTree& gold, int t, int i) {
  if (i == t) return "self";
  const int h = gold.head(t);
  if (i == h) return "head";
  if (gold.head(i) == t) return "child";
  if (h > 0 && i == gold.head(h)) return "grandparent";
  if (gold.head(i) == h) return "sibling";
  return "other";
}

inline std::string offset_name(int offset) {
  if (offset <= -kMaxOffset) return "<=-" + std::to_string(kMaxOffset);
  if (offset >= kMaxOffset) return ">=+" + std::to_string(kMaxOffset);
  return (offset > 0 ? "+" : "") + std::to_string(offset);
}

// Configuration position of token i, with fixed precedence: core stack and
// buffer items, then child roles by stack depth, then b0L, else other.
inline std::string config_position(const transition::Configuration& c, int i) {
  for (int k = 0; k < 3; ++k) if (c.s(k) == i) return "s" + std::to_string(k);
  for (int k = 0; k < 3; ++k) if (c.b(k) == i) return "b" + std::to_string(k);
  for (int k = 0; k < 3; ++k) {
    const int node = c.s(k);
    if (node < 0) break;
    const auto left = c.left_children(node);
    const auto right = c.right_children(node);
    const std::string s = "s" + std::to_string(k);
    if (!left.empty() && left.front() == i) return s + "L";
    if (!right.empty() && right.back() == i) return s + "R";
    if (std::find(left.begin(), left.end(), i) != left.end()) return s + "Lbar";
    if (std::find(right.begin(), right.end(), i) != right.end()) return s + "Rbar";
  }
  if (c.b(0) >= 0 && c.leftmost_child(c.b(0)) == i) return "b0L";
  return "other";
}

// Position of token i relative to arc h -> d in tree t: structural roles
// first, then the nearer of h and d by surface distance (ties go to h).
inline std::string tree_position(const DepTree& t, int h, int d, int i) {
  if (i == h) return "h";
  if (i == d) return "d";
  if (t.head(i) == d) return "c";
  if (t.head(i) == h) return "s";
  if (h > 0 && i == t.head(h)) return "g";
  const int dh = std::abs(i - h), dd = std::abs(i - d);
  const int dist = std::min(dh, dd);
  if (dist > kMaxTreeOffset) return "other";
  return std::string(dh <= dd ? "h" : "d") + "+-" + std::to_string(dist);
}

// Aggregation ----------------------------------------------------------------

struct Row {
  std::string taxonomy;
  std::string bucket;
  double mean = 0.0;
  long count = 0;
};

class Aggregator {
 public:
  void add(const std::string& taxonomy, const std::string& bucket, double value) {
    auto& a = acc_[{taxonomy, bucket}];
    a.first += value;
    ++a.second;
  }

  void merge(const Aggregator& other) {
    for (const auto& [k, v] : other.acc_) {
      auto& a = acc_[k];
      a.first += v.first;
      a.second += v.second;
    }
  }

  // Per taxonomy, buckets by mean impact descending (name breaks ties).
  std::vector<Row> rows() const {
    std::vector<Row> out;
    for (const auto& [k, v] : acc_) out.push_back({k.first, k.second, v.first / static_cast<double>(v.second), v.second});
    std::stable_sort(out.begin(), out.end(), [](const Row& a, const Row& b) {
      if (a.taxonomy != b.taxonomy) return a.taxonomy < b.taxonomy;
      if (a.mean != b.mean) return a.mean > b.mean;
      return a.bucket < b.bucket;
    });
    return out;
  }

  std::vector<Row> rows(const std::string& taxonomy) const {
    std::vector<Row> out;
    for (auto& r : rows()) if (r.taxonomy == taxonomy) out.push_back(r);
    return out;
  }

  bool empty() const { return acc_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, std::pair<double, long>> acc_;
};

inline void write_rows(const std::string& path, const std::vector<Row>& rows) {
  std::vector<TsvRow> out;
  for (const auto& r : rows) out.push_back({r.taxonomy, r.bucket, fixed(r.mean, 4), std::to_string(r.count)});
  write_tsv_file(path, {"taxonomy", "bucket", "mean_impact", "count"}, out);
}

// Corpus drivers --------------------------------------------------------------

// Impact of every token on every BiLSTM vector, bucketed by signed offset
// and gold relation ("distance_relation") and by offset alone ("distance").
template <class Real>
Aggregator lstm_corpus(const Encoder<Real>& encoder, const std::vector<Sentence>& corpus) {
  if (encoder.config().mode != EncoderMode::kBiLstm) throw ConfigError("BiLSTM impact needs a bilstm encoder");
  Aggregator agg;
  for (const auto& s : corpus) {
    const DepTree gold = gold_tree(s);
    ad::Tape<Real> tape;
    const auto enc = encoder.encode(tape, s);
    for (int t = 1; t <= s.size(); ++t) {
      const auto imp = lstm_impacts(tape, enc, t);
      for (int i = 1; i <= s.size(); ++i) {
        const int off = std::clamp(i - t, -kMaxOffset, kMaxOffset);
        const double v = imp[static_cast<std::size_t>(i - 1)];
        agg.add("distance_relation", offset_name(off) + ":" + relation(gold, t, i), v);
        agg.add("distance", offset_name(off), v);
      }
    }
  }
  return agg;
}

// Impact on the score of every predicted transition during greedy parsing,
// bucketed by configuration position.
template <class Real>
Aggregator transition_corpus(transition::Model<Real>& model, const std::vector<Sentence>& corpus) {
  using namespace transition;
  Aggregator agg;
  for (const auto& s : corpus) {
    ad::Tape<Real> tape;
    const auto enc = model.encoder().encode(tape, s);
    Configuration c = Configuration::initial(s.size());
    const long limit = 4L * s.size() * s.size() + 4;
    long steps = 0;
    while (!c.terminal()) {
      if (++steps > limit) throw DecodeError("transition decoding exceeded 4n^2 steps");
      const auto sc = model.score(tape, c, enc);
      const int best = best_legal<Real>(model.actions(), legal(c), sc.value());
      const auto imp = score_impacts(tape, tape.pick(sc, best), enc.x);
      for (int i = 1; i <= s.size(); ++i) agg.add("config_position", config_position(c, i), imp[static_cast<std::size_t>(i - 1)]);
      apply(c, model.actions().at(best));
    }
  }
  return agg;
}

// Impact on the score of every predicted arc, bucketed by position in the
// predicted tree.
template <class Real>
Aggregator graph_corpus(graph::Model<Real>& model, const std::vector<Sentence>& corpus) {
  Aggregator agg;
  for (const auto& s : corpus) {
    const DepTree pred = graph::parse(model, s);
    ad::Tape<Real> tape;
    graph::Scorer<Real> scorer(model, tape, s, false, nullptr);
    const bool second = model.config().order == graph::Order::kSecond;
    for (int d = 1; d <= s.size(); ++d) {
      const int h = pred.head(d);
      const auto score = scorer.arc(h, d, second ? decode::inner_sibling(pred, d) : 0);
      const auto imp = score_impacts(tape, score, scorer.encoding().x);
      for (int i = 1; i <= s.size(); ++i) agg.add("tree_position", tree_position(pred, h, d, i), imp[static_cast<std::size_t>(i - 1)]);
    }
  }
  return agg;
}

}  // namespace dparse::impact
