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
#include <numeric>
#include <string>
#include <vector>

#include "dparse/errors.hpp"
#include "dparse/treebank.hpp"
#include "dparse/tsv.hpp"

namespace dparse::eval {

struct Report {
  double las = 0.0;
  double uas = 0.0;
  long tokens = 0;
  long head_correct = 0;
  long labeled_correct = 0;
};

inline void check_aligned(const DepTree& gold, const DepTree& pred) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("sentence has " + std::to_string(gold.size()) + " gold tokens but " +
                         std::to_string(pred.size()) + " predicted");
  }
}

// Micro-averaged attachment scores over every token, punctuation included.
inline Report attachment(const std::vector<DepTree>& gold, const std::vector<DepTree>& pred) {
  if (gold.size() != pred.size()) throw AlignmentError("corpus sizes differ");
  Report r;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    check_aligned(gold[k], pred[k]);
    for (int i = 1; i <= gold[k].size(); ++i) {
      const bool head = gold[k].head(i) == pred[k].head(i);
      ++r.tokens;
      r.head_correct += head;
      r.labeled_correct += head && gold[k].label(i) == pred[k].label(i);
    }
  }
  if (r.tokens > 0) {
    r.uas = 100.0 * static_cast<double>(r.head_correct) / static_cast<double>(r.tokens);
    r.las = 100.0 * static_cast<double>(r.labeled_correct) / static_cast<double>(r.tokens);
  }
  return r;
}

inline std::vector<DepTree> gold_trees(const std::vector<Sentence>& corpus, const LabelVocab& labels) {
  std::vector<DepTree> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(gold_tree(s, &labels));
  return out;
}

// Labeled recall and precision for one arc-length bucket. Length 0 is the
// root bucket; `cap` pools every length >= cap.
struct LengthPoint {
  int length = 0;
  long gold = 0;
  long predicted = 0;
  long correct_gold = 0;
  long correct_predicted = 0;

  double recall() const { return gold ? 100.0 * static_cast<double>(correct_gold) / static_cast<double>(gold) : 0.0; }
  double precision() const {
    return predicted ? 100.0 * static_cast<double>(correct_predicted) / static_cast<double>(predicted) : 0.0;
  }
};

inline int length_bucket(int head, int dep, int cap) {
  if (head == 0) return 0;
  return std::min(std::abs(head - dep), cap);
}

inline std::vector<LengthPoint> by_length(const std::vector<DepTree>& gold, const std::vector<DepTree>& pred,
                                          int cap = 10) {
  if (gold.size() != pred.size()) throw AlignmentError("corpus sizes differ");
  std::map<int, LengthPoint> pts;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    check_aligned(gold[k], pred[k]);
    for (int i = 1; i <= gold[k].size(); ++i) {
      const bool ok = gold[k].head(i) == pred[k].head(i) && gold[k].label(i) == pred[k].label(i);
      auto& g = pts[length_bucket(gold[k].head(i), i, cap)];
      ++g.gold;
      g.correct_gold += ok;
      auto& p = pts[length_bucket(pred[k].head(i), i, cap)];
      ++p.predicted;
      p.correct_predicted += ok;
    }
  }
  std::vector<LengthPoint> out;
  for (auto& [len, p] : pts) {
    p.length = len;
    out.push_back(p);
  }
  return out;
}

inline std::string length_name(int length, int cap) {
  if (length == 0) return "root";
  return std::to_string(length) + (length == cap ? "+" : "");
}

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
  bool single = false;  // stddev undefined for one seed; reported as 0
};

inline SeedStats seed_stats(const std::vector<double>& xs) {
  SeedStats s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) {
    s.single = true;
    return s;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return s;
}

// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
    const double r = (static_cast<double>(i + j) + 2.0) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

inline constexpr std::size_t kExactLimit = 12;

// Two-sided Wilcoxon rank-sum p-value. Exact enumeration of every
// assignment of the pooled midranks up to 12 observations, otherwise the
// normal approximation with tie and continuity corrections.
inline double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b, bool force_normal = false) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("rank-sum test needs at least two values per sample");
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  if (std::all_of(pooled.begin(), pooled.end(), [&](double x) { return x == pooled[0]; })) return 1.0;
  const auto rank = midranks(pooled);
  const std::size_t na = a.size(), n = pooled.size();
  const double w = std::accumulate(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
  const double expected = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;
  const double observed = std::abs(w - expected);

  if (n <= kExactLimit && !force_normal) {
    long total = 0, extreme = 0;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) if (pick[i]) s += rank[i];
      ++total;
      extreme += std::abs(s - expected) >= observed - 1e-9;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
  }

  std::map<double, int> ties;
  for (double x : pooled) ++ties[x];
  double t = 0.0;
  for (const auto& [v, c] : ties) t += static_cast<double>(c) * c * c - c;
  const double nn = static_cast<double>(n), nb = static_cast<double>(b.size());
  const double var = static_cast<double>(na) * nb / 12.0 * ((nn + 1.0) - t / (nn * (nn - 1.0)));
  const double z = std::max(0.0, observed - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

// TSV rows -----------------------------------------------------------------

struct LasRow {
  std::string model;
  std::string treebank;
  SeedStats stats;
};

inline void write_las_table(const std::string& path, const std::vector<LasRow>& rows) {
  std::vector<TsvRow> out;
  for (const auto& r : rows) out.push_back({r.model, r.treebank, fixed(r.stats.mean, 2), fixed(r.stats.stddev, 2)});
  write_tsv_file(path, {"model", "treebank", "mean_las", "stddev"}, out);
}

// fig2 (recall) / fig8 (precision) curves for several models.
inline void write_length_curves(const std::string& path, bool precision,
                                const std::vector<std::pair<std::string, std::vector<LengthPoint>>>& curves,
                                int cap = 10) {
  std::vector<TsvRow> out;
  for (const auto& [model, pts] : curves) {
    for (const auto& p : pts) {
      const long count = precision ? p.predicted : p.gold;
      if (count == 0) continue;
      out.push_back({model, length_name(p.length, cap), fixed(precision ? p.precision() : p.recall(), 2),
                     std::to_string(p.gold)});
    }
  }
  write_tsv_file(path, {"model", "arc_length", precision ? "precision" : "recall", "gold_count"}, out);
}

}  // namespace dparse::eval
