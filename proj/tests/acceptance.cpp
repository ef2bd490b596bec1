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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// nonzero if any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "dparse/commands.hpp"
#include "dparse/decoders.hpp"
#include "dparse/eval.hpp"
#include "dparse/graph.hpp"
#include "dparse/impact.hpp"
#include "dparse/model_io.hpp"
#include "dparse/synth.hpp"
#include "dparse/transition.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

namespace {

using namespace dparse;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
  bool gating = true;
};

std::string num(double x, int d = 2) { return fixed(x, d); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

// 1 ------------------------------------------------------------------------

Outcome decoder_oracles() {
  using namespace decode;
  const auto t0 = Clock::now();
  Rng rng(101);
  long checked = 0, bad = 0;
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      const ArcScores a = testing::random_arcs(n, rng);
      double best = kNegInf;
      testing::for_each_tree(n, [&](const DepTree& t) {
        if (testing::crossing_free(t)) best = std::max(best, tree_score(a, t));
      });
      const DepTree got = eisner(a);
      bad += !(is_tree(got, true) && testing::crossing_free(got) && tree_score(a, got) == best);
      ++checked;
    }
  }
  for (int n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      const ArcScores a = testing::random_arcs(n, rng);
      const SiblingScores s = testing::random_siblings(n, rng);
      double best = kNegInf, best_free = kNegInf;
      testing::for_each_tree(n, [&](const DepTree& t) {
        if (testing::crossing_free(t)) best = std::max(best, testing::brute_sibling_score(a, s, t));
        best_free = std::max(best_free, tree_score(a, t));
      });
      const DepTree e2 = eisner2(a, s);
      bad += !(is_tree(e2, true) && testing::crossing_free(e2) && testing::brute_sibling_score(a, s, e2) == best);
      const DepTree cle = chu_liu_edmonds(a);
      bad += !(is_tree(cle, true) && tree_score(a, cle) == best_free);
      checked += 2;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60.0,
          std::to_string(checked) + " instances (eisner n<=6, eisner2 and cle n<=5, 200 each), " + std::to_string(bad) +
              " mismatches, " + num(secs, 1) + "s"};
}

// 2 ------------------------------------------------------------------------

Outcome transition_soundness() {
  using namespace transition;
  Rng rng(202);
  int nonproj = 0, failures = 0, swap_violations = 0, proj_swaps = 0;
  long lazy_total = 0, eager_total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(10));
    DepTree gold = testing::random_mixed_tree(n, rng);
    for (int i = 1; i <= n; ++i) gold.labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(4));
    const bool proj = is_projective(gold);
    nonproj += !proj;
    auto swaps = [](const std::vector<Transition>& seq) {
      return static_cast<int>(std::count_if(seq.begin(), seq.end(), [](const Transition& t) { return t.kind == Kind::kSwap; }));
    };
    try {
      const auto lazy = oracle_sequence(gold, true);
      const auto eager = oracle_sequence(gold, false);
      Configuration c = Configuration::initial(n);
      for (const auto& t : lazy) {
        if (!legal(c).allows(t.kind)) throw OracleError("illegal");
        apply(c, t);
      }
      const DepTree built = c.tree();
      if (!c.terminal() || built.heads != gold.heads || built.labels != gold.labels) ++failures;
      if (swaps(lazy) > swaps(eager)) ++swap_violations;
      if (proj && swaps(lazy) != 0) ++proj_swaps;
      lazy_total += swaps(lazy);
      eager_total += swaps(eager);
    } catch (const Error&) {
      ++failures;
    }
  }
  return {failures == 0 && swap_violations == 0 && proj_swaps == 0,
          "1000 trees, " + num(nonproj / 10.0, 1) + "% non-projective, " + std::to_string(failures) +
              " reconstruction failures, lazy>eager on " + std::to_string(swap_violations) + ", swaps on projective " +
              std::to_string(proj_swaps) + " (total swaps lazy " + std::to_string(lazy_total) + " / eager " +
              std::to_string(eager_total) + ")"};
}

// 3 ------------------------------------------------------------------------

// Central differences over sampled coordinates of every parameter.
double parameter_fd(ad::ParameterStore<double>& store, const std::function<double()>& f, Rng& rng, int per_param) {
  double worst = 0.0;
  for (auto& p : store.params()) {
    for (int k = 0; k < per_param; ++k) {
      const std::size_t i = rng.below(p.value.size());
      const double saved = p.value[i];
      p.value[i] = saved + 1e-5;
      const double up = f();
      p.value[i] = saved - 1e-5;
      const double down = f();
      p.value[i] = saved;
      worst = std::max(worst, testing::relative_error(p.grad[i], (up - down) / 2e-5));
    }
  }
  return worst;
}

void randomize_biases(ad::ParameterStore<double>& store, Rng& rng) {
  for (auto& p : store.params()) {
    if (p.name.find(".b") != std::string::npos || p.name.ends_with("b1") || p.name.ends_with("b2")) {
      for (double& x : p.value) x = rng.uniform(-0.3, 0.3);
    }
  }
}

EncoderConfig tiny_encoder(EncoderMode mode) {
  EncoderConfig e;
  e.mode = mode;
  e.word_dim = 4;
  e.pos_dim = 3;
  e.lstm_layers = 2;
  e.lstm_dim = 3;
  return e;
}

Outcome gradient_integrity() {
  Rng rng(303);
  double worst_op = 0.0;
  int op_instances = 0;
  for (const auto& op : testing::op_cases()) {
    std::size_t dim = 0;
    for (auto [r, c] : op.shapes) dim += static_cast<std::size_t>(r * c);
    for (int instance = 0; instance < 50;) {
      const auto x = testing::random_vec(rng, dim, -2.0, 2.0);
      if (op.name == "max") {
        bool kink = false;
        for (std::size_t i = 0; i < 6; ++i) kink |= std::abs(x[i] - x[i + 6]) < 1e-3;
        if (kink) continue;
      }
      ad::Tape<double> tape;
      std::vector<ad::Value<double>> in;
      std::size_t off = 0;
      for (auto [r, c] : op.shapes) {
        const auto n = static_cast<std::size_t>(r * c);
        in.push_back(tape.constant(r, c, std::span<const double>(x.data() + off, n)));
        off += n;
      }
      const auto y = op.build(tape, in);
      const auto w = testing::random_vec(rng, static_cast<std::size_t>(y.size()));
      tape.backward(tape.sum(tape.product(y, tape.constant(y.rows(), y.cols(), w))));
      std::vector<double> analytic;
      for (const auto& v : in) {
        for (double g : tape.gradient(v)) analytic.push_back(g);
      }
      auto f = [&](const std::vector<double>& p) { return testing::evaluate(op, p, w); };
      for (std::size_t i = 0; i < dim; ++i) {
        worst_op = std::max(worst_op, testing::relative_error(analytic[i], testing::central_difference(f, x, i)));
      }
      ++instance;
      ++op_instances;
    }
  }
  // Embedding lookup and parameter nodes.
  for (int instance = 0; instance < 50; ++instance) {
    ad::ParameterStore<double> store;
    auto& table = store.add_uniform("E", 5, 3, 1.0, rng);
    auto& w = store.add_uniform("W", 2, 3, 1.0, rng);
    const int row = static_cast<int>(rng.below(5));
    auto loss = [&] {
      ad::Tape<double> t;
      return t.sum(t.tanh(t.matmul(t.parameter(w), t.lookup(table, row)))).scalar();
    };
    store.zero_grad();
    ad::Tape<double> t;
    t.backward(t.sum(t.tanh(t.matmul(t.parameter(w), t.lookup(table, row)))));
    worst_op = std::max(worst_op, parameter_fd(store, loss, rng, 6));
    ++op_instances;
  }

  double worst_transition = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const DepTree gold_t = testing::random_mixed_tree(n, rng);
    const Sentence s = testing::sentence_from_tree(gold_t, rng, 3);
    transition::ModelConfig cfg;
    cfg.encoder = tiny_encoder(EncoderMode::kBiLstm);
    cfg.features = instance % 2 ? transition::extended_features() : transition::simple_features();
    cfg.hidden = 5;
    transition::Model<double> m(cfg, build_vocab({s}), build_labels({s}), 1000 + static_cast<std::uint64_t>(instance));
    randomize_biases(m.store(), rng);
    const DepTree gold = gold_tree(s, &m.labels());
    const auto seq = transition::oracle_sequence(gold);
    transition::Configuration c = transition::Configuration::initial(n);
    const std::size_t steps = rng.below(seq.size());
    for (std::size_t k = 0; k < steps; ++k) transition::apply(c, seq[k]);
    const auto l = transition::legal(c);
    std::vector<int> ids;
    for (int id = 0; id < m.actions().size(); ++id) {
      if (l.allows(m.actions().at(id).kind)) ids.push_back(id);
    }
    const int action = ids[rng.below(ids.size())];
    auto score = [&] {
      ad::Tape<double> tape;
      const auto enc = m.encoder().encode(tape, s);
      return tape.pick(m.score(tape, c, enc), action).scalar();
    };
    m.store().zero_grad();
    ad::Tape<double> tape;
    const auto enc = m.encoder().encode(tape, s);
    tape.backward(tape.pick(m.score(tape, c, enc), action));
    worst_transition = std::max(worst_transition, parameter_fd(m.store(), score, rng, 3));
  }

  double worst_graph = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const int n = 3 + static_cast<int>(rng.below(4));
    const Sentence s = testing::sentence_from_tree(testing::random_mixed_tree(n, rng), rng, 3);
    graph::ModelConfig cfg;
    cfg.encoder = tiny_encoder(EncoderMode::kBiLstm);
    cfg.order = instance % 2 ? graph::Order::kSecond : graph::Order::kFirst;
    cfg.decoder = instance % 2 ? graph::Decoder::kEisner2 : graph::Decoder::kEisner;
    cfg.surface = graph::parse_surface(instance % 3 == 0 ? "dist,hd1,hd2" : instance % 3 == 1 ? "dist" : "none");
    cfg.hidden = 5;
    cfg.label_hidden = 4;
    cfg.dist_dim = 3;
    graph::Model<double> m(cfg, build_vocab({s}), build_labels({s}), 2000 + static_cast<std::uint64_t>(instance));
    randomize_biases(m.store(), rng);
    const int d = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int h = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (h >= d) ++h;
    int sib = 0;
    if (cfg.order == graph::Order::kSecond && std::abs(h - d) > 1 && h > 0 && rng.bernoulli(0.7)) {
      const int lo = std::min(h, d) + 1, hi = std::max(h, d) - 1;
      sib = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    auto score = [&] {
      ad::Tape<double> tape;
      graph::Scorer<double> sc(m, tape, s, false, nullptr);
      return sc.arc(h, d, sib).scalar();
    };
    m.store().zero_grad();
    ad::Tape<double> tape;
    graph::Scorer<double> sc(m, tape, s, false, nullptr);
    tape.backward(sc.arc(h, d, sib));
    worst_graph = std::max(worst_graph, parameter_fd(m.store(), score, rng, 3));
  }
  return {worst_op <= 1e-4 && worst_transition <= 1e-3 && worst_graph <= 1e-3,
          std::to_string(op_instances) + " op instances max rel err " + num(worst_op * 1e6, 3) +
              "e-6 (<= 1e-4); 50 transition-score models " + num(worst_transition * 1e6, 3) +
              "e-6, 50 arc-score models " + num(worst_graph * 1e6, 3) + "e-6 (<= 1e-3)"};
}

// 5 ------------------------------------------------------------------------

struct DeskData {
  std::vector<Sentence> train, dev;
};

DeskData desk_data() {
  synth::Options tr;
  tr.sentences = 500;
  tr.seed = 101;
  synth::Options dv;
  dv.sentences = 100;
  dv.seed = 202;
  return {synth::generate(tr), synth::generate(dv)};
}

Config desk_config(const std::string& parser) {
  Config c;
  c.parser = parser;
  c.word_dim = 50;
  c.lstm_dim = 50;
  c.hidden = 50;
  c.label_hidden = 50;
  c.epochs = 8;
  c.seeds = {1, 2, 3};
  return c;
}

struct Cell {
  std::string name;
  std::vector<TrainResult> runs;
  eval::SeedStats stats;
};

Cell train_cell(const Config& c, const DeskData& data) {
  const auto t0 = Clock::now();
  Cell cell{run::model_name(c), run::train_seeds(c, data.train, data.dev), {}};
  cell.stats = eval::seed_stats(run::best_las(cell.runs));
  progress(cell.name + ": mean dev LAS " + num(cell.stats.mean) + " sd " + num(cell.stats.stddev) + " (" +
           num(seconds_since(t0), 0) + "s)");
  return cell;
}

std::string stats(const Cell& c) { return c.name + " " + num(c.stats.mean) + "+-" + num(c.stats.stddev); }

// Count-weighted mean impact over "distance" buckets selected by offset.
double pooled_distance(const impact::Aggregator& agg, const std::function<bool(int)>& keep) {
  double sum = 0.0;
  long count = 0;
  for (const auto& r : agg.rows("distance")) {
    std::string b = r.bucket;
    if (b.rfind("<=", 0) == 0 || b.rfind(">=", 0) == 0) b = b.substr(2);
    const int off = std::stoi(b);
    if (!keep(off)) continue;
    sum += r.mean * static_cast<double>(r.count);
    count += r.count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

std::vector<std::string> top(const impact::Aggregator& agg, const std::string& taxonomy, std::size_t k) {
  std::vector<std::string> out;
  for (const auto& r : agg.rows(taxonomy)) {
    if (out.size() < k) out.push_back(r.bucket);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

struct TrendResults {
  std::map<std::string, Outcome> parts;
  Outcome impact_norm;
};

TrendResults trends() {
  TrendResults res;
  const DeskData data = desk_data();

  // (a)
  Config simple = desk_config("transition");
  Config extended_direct = desk_config("transition");
  extended_direct.mode = "direct";
  extended_direct.features = transition::feature_set_name(transition::extended_features());
  Cell a_bilstm = train_cell(simple, data);
  const Cell a_direct = train_cell(extended_direct, data);
  res.parts["a"] = {a_bilstm.stats.mean >= a_direct.stats.mean, stats(a_bilstm) + " >= " + stats(a_direct)};

  // (b)
  Config g = desk_config("graph");
  Config g_dist = g;
  g_dist.surface = "dist";
  Config gd = g;
  gd.mode = "direct";
  Config gd_dist = gd;
  gd_dist.surface = "dist";
  const Cell direct_none = train_cell(gd, data);
  const Cell direct_dist = train_cell(gd_dist, data);
  Cell bilstm_none = train_cell(g, data);
  const Cell bilstm_dist = train_cell(g_dist, data);
  const double direct_gain = direct_dist.stats.mean - direct_none.stats.mean;
  const double bilstm_change = bilstm_dist.stats.mean - bilstm_none.stats.mean;
  const double sd = std::max(bilstm_none.stats.stddev, bilstm_dist.stats.stddev);
  res.parts["b"] = {direct_gain > 0.0 && std::abs(bilstm_change) < sd,
                    "direct +dist " + num(direct_gain) + " (" + stats(direct_none) + " -> " + num(direct_dist.stats.mean) +
                        "); bilstm +dist " + num(bilstm_change) + ", |change| < sd " + num(sd)};

  // (c), (d) and criterion 4 on the trained bilstm models.
  progress("impact analysis");
  impact::Aggregator transition_agg, graph_agg, lstm_agg;
  for (auto& r : a_bilstm.runs) {
    transition_agg.merge(impact::transition_corpus(*r.parser->transition_model(), data.dev));
    lstm_agg.merge(impact::lstm_corpus(r.parser->encoder(), data.dev));
  }
  for (auto& r : bilstm_none.runs) {
    graph_agg.merge(impact::graph_corpus(*r.parser->graph_model(), data.dev));
    lstm_agg.merge(impact::lstm_corpus(r.parser->encoder(), data.dev));
  }
  const auto t3 = top(transition_agg, "config_position", 3);
  const auto g2 = top(graph_agg, "tree_position", 2);
  const bool c_ok = std::set<std::string>(t3.begin(), t3.end()) == std::set<std::string>{"s0", "s1", "b0"} &&
                    std::set<std::string>(g2.begin(), g2.end()) == std::set<std::string>{"h", "d"};
  res.parts["c"] = {c_ok, "transition top-3 {" + join(t3) + "}, graph top-2 {" + join(g2) + "}"};
  const double near = pooled_distance(lstm_agg, [](int o) { return std::abs(o) == 1; });
  const double far = pooled_distance(lstm_agg, [](int o) { return std::abs(o) >= 10; });
  res.parts["d"] = {near > far, "mean impact at +-1 " + num(near, 3) + " > at |distance|>=10 " + num(far, 3)};

  // Criterion 4: every per-target impact vector sums to 100.
  double worst = 0.0;
  long targets = 0;
  auto check = [&](const std::vector<double>& imp) {
    double s = 0.0;
    for (double x : imp) s += x;
    worst = std::max(worst, std::abs(s - 100.0));
    ++targets;
  };
  Parser& tp = *a_bilstm.runs.front().parser;
  Parser& gp = *bilstm_none.runs.front().parser;
  for (const auto& s : data.dev) {
    ad::Tape<float> tape;
    const auto enc = tp.encoder().encode(tape, s);
    for (int t = 1; t <= s.size(); ++t) check(impact::lstm_impacts(tape, enc, t));
    transition::Configuration c = transition::Configuration::initial(s.size());
    auto& tm = *tp.transition_model();
    while (!c.terminal()) {
      const auto sc = tm.score(tape, c, enc);
      const int best = transition::best_legal<float>(tm.actions(), transition::legal(c), sc.value());
      check(impact::score_impacts(tape, tape.pick(sc, best), enc.x));
      transition::apply(c, tm.actions().at(best));
    }
    ad::Tape<float> gtape;
    graph::Scorer<float> scorer(*gp.graph_model(), gtape, s, false, nullptr);
    const DepTree pred = graph::parse(*gp.graph_model(), s);
    for (int d = 1; d <= s.size(); ++d) check(impact::score_impacts(gtape, scorer.arc(pred.head(d), d), scorer.encoding().x));
  }
  Sentence one;
  one.tokens.push_back(data.dev.front().tokens.front());
  one.tokens.front().gold_head = 0;
  ad::Tape<float> tape;
  const auto enc = tp.encoder().encode(tape, one);
  const auto single = impact::lstm_impacts(tape, enc, 1);
  const bool single_ok = single.size() == 1 && single[0] == 100.0;
  res.impact_norm = {worst <= 1e-6 && single_ok,
                     std::to_string(targets) + " targets on " + std::to_string(data.dev.size()) +
                         " dev sentences, max |sum-100| " + num(worst * 1e9, 3) + "e-9; single token -> " +
                         num(single.empty() ? 0.0 : single[0], 6)};

  // (e)
  Config sib = g;
  sib.ablation = "sibling";
  const Cell ablated = train_cell(sib, data);
  const double drop = bilstm_none.stats.mean - ablated.stats.mean;
  res.parts["e"] = {drop > 0.0, "sibling ablation drop " + num(drop) + " (" + stats(bilstm_none) + " -> " +
                                    num(ablated.stats.mean) + "+-" + num(ablated.stats.stddev) + ")"};
  return res;
}

// 6 ------------------------------------------------------------------------

Outcome full_scale_recipe() {
  const Config c;
  const bool defaults = c.word_dim == 100 && c.pos_dim == 20 && c.hidden == 100 && c.lstm_layers == 2 &&
                        c.lstm_dim == 125 && c.word_dropout == 0.25 && c.epochs == 30 && c.seeds.size() == 6;
  return {defaults,
          "non-gating; full-scale numbers are not reproduced at desk scale. Default config carries the full-scale "
          "recipe (100/20 dims, 2x125 BiLSTM, hidden 100, alpha 0.25, 30 epochs, 6 seeds): " +
              std::string(defaults ? "matches" : "MISMATCH"),
          false};
}

// 7 ------------------------------------------------------------------------

// Two-sided rank-sum p-value by enumerating every assignment of pooled
// observations to the first sample.
double rank_sum_by_assignment(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (double y : pooled) {
      less += y < pooled[i];
      equal += y == pooled[i];
    }
    ranks[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) observed += ranks[i];
  const double expected = static_cast<double>(a.size()) * static_cast<double>(n + 1) / 2.0;
  long extreme = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) w += ranks[i];
    }
    ++total;
    extreme += std::abs(w - expected) >= std::abs(observed - expected) - 1e-9;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

Outcome statistics() {
  Rng rng(707);
  double worst = 0.0;
  int cases = 0;
  for (std::size_t na = 2; na <= 6; ++na) {
    for (std::size_t nb = 2; nb <= 6; ++nb) {
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(na), b(nb);
        const bool ties = trial % 2 == 0;
        for (double& x : a) x = ties ? static_cast<double>(rng.below(5)) : rng.uniform(0, 1);
        for (double& x : b) x = ties ? static_cast<double>(rng.below(5)) : rng.uniform(0, 1);
        worst = std::max(worst, std::abs(eval::rank_sum_p(a, b) - rank_sum_by_assignment(a, b)));
        worst = std::max(worst, std::abs(eval::rank_sum_p(a, b) - eval::rank_sum_p(b, a)));
        ++cases;
      }
    }
  }
  const double p123 = eval::rank_sum_p({1, 2, 3}, {4, 5, 6});
  const double same = eval::rank_sum_p({1, 2, 3}, {3, 2, 1});
  const auto s24 = eval::seed_stats({2, 4});
  const auto s1 = eval::seed_stats({7.5});
  std::vector<double> xs(10000);
  for (double& x : xs) x = rng.uniform(-50, 150);
  double mean = 0, m2 = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double delta = xs[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (xs[i] - mean);
  }
  const auto big = eval::seed_stats(xs);
  const double stream_diff = std::max(std::abs(big.mean - mean), std::abs(big.stddev - std::sqrt(m2 / 9999.0)));
  const bool ok = worst <= 1e-12 && std::abs(p123 - 0.1) <= 1e-12 && same == 1.0 && s24.mean == 3.0 &&
                  std::abs(s24.stddev - std::sqrt(2.0)) <= 1e-12 && s1.mean == 7.5 && s1.stddev == 0.0 && s1.single &&
                  stream_diff <= 1e-9;
  return {ok, std::to_string(cases) + " samples up to 6+6 vs full assignment enumeration, max diff " + num(worst, 12) +
                  "; {1,2,3} vs {4,5,6} p=" + num(p123, 4) + "; {2,4} -> (" + num(s24.mean, 4) + ", " +
                  num(s24.stddev, 6) + "); streaming diff " + num(stream_diff * 1e12, 3) + "e-12"};
}

// 8 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// All files written by one run of train, eval, impact and ablate.
std::map<std::string, std::string> reproducible_run(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  synth::Options o;
  o.sentences = 60;
  o.seed = 808;
  const auto train_set = synth::generate(o);
  o.sentences = 15;
  o.seed = 809;
  const auto dev_set = synth::generate(o);
  std::vector<std::unique_ptr<Parser>> keep;
  std::vector<Parser*> parsers;
  impact::Aggregator agg;
  for (const std::string parser : {"transition", "graph"}) {
    Config c;
    c.parser = parser;
    c.word_dim = 12;
    c.pos_dim = 4;
    c.lstm_dim = 10;
    c.lstm_layers = 1;
    c.hidden = 12;
    c.label_hidden = 8;
    c.dist_dim = 4;
    c.surface = parser == "graph" ? "dist" : "none";
    c.epochs = 2;
    c.seeds = {5};
    auto runs = run::train_seeds(c, train_set, dev_set);
    run::write_train_log((dir / (parser + "_log.tsv")).string(), runs);
    model_io::save(*runs.front().parser, (dir / (parser + ".dprs")).string());
    agg.merge(run::impact_report(*runs.front().parser, dev_set));
    keep.push_back(std::move(runs.front().parser));
    parsers.push_back(keep.back().get());
    const auto abl = run::ablate(c, train_set, dev_set, {parser == "graph" ? "sibling" : "s0L"});
    ablation::write_drops((dir / (parser + "_drops.tsv")).string(), abl.rows);
  }
  run::write_evaluation(dir.string(), "synthetic", run::evaluate_models(parsers, dev_set), 10);
  impact::write_rows((dir / "impact.tsv").string(), agg.rows());
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
  return files;
}

Outcome reproducibility() {
  const fs::path base = fs::temp_directory_path() / "dparse_acceptance";
  const auto a = reproducible_run(base / "a");
  const auto b = reproducible_run(base / "b");
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) differing.push_back(name);
  }
  fs::remove_all(base);
  return {differing.empty() && a.size() == b.size() && a.size() >= 10,
          std::to_string(a.size()) + " files (2 model files, logs, table1/fig2/fig8, impact, ablation drops) compared, " +
              (differing.empty() ? "all byte-identical" : "differing: " + join(differing))};
}

}  // namespace

int main() {
  std::map<std::string, std::pair<std::string, Outcome>> results;
  auto record = [&](const std::string& id, const std::string& title, Outcome o) {
    progress(id + " " + (o.pass ? "done" : "failed"));
    results[id] = {title, o};
  };
  record("1", "decoder oracles", decoder_oracles());
  record("2", "transition-system soundness", transition_soundness());
  record("3", "gradient integrity", gradient_integrity());
  record("7", "statistics", statistics());
  record("8", "reproducibility", reproducibility());
  record("6", "full-scale results table", full_scale_recipe());
  const TrendResults t = trends();
  record("4", "impact normalization", t.impact_norm);
  const std::map<std::string, std::string> titles{{"a", "bilstm simple >= direct extended (transition)"},
                                                  {"b", "dist helps direct graph, not bilstm graph"},
                                                  {"c", "impact ranks s0,s1,b0 and h,d highest"},
                                                  {"d", "impact at distance 1 exceeds distance >= 10"},
                                                  {"e", "sibling ablation lowers graph LAS"}};
  for (const auto& [part, o] : t.parts) record("5" + part, "desk-scale trend: " + titles.at(part), o);

  bool ok = true;
  for (const auto& [id, entry] : results) {
    const auto& [title, o] = entry;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << title << (o.gating ? "" : " (non-gating)") << ": "
              << o.detail << "\n";
    ok = ok && (o.pass || !o.gating);
  }
  return ok ? 0 : 1;
}
