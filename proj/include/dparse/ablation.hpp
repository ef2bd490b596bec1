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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dparse/errors.hpp"
#include "dparse/eval.hpp"
#include "dparse/graph.hpp"
#include "dparse/rng.hpp"
#include "dparse/transition.hpp"
#include "dparse/tsv.hpp"

// Token-exclusion ablation: at every decision one token at a structural
// position is removed from the BiLSTM input.
namespace dparse::ablation {

template <class T>
std::optional<int> pick_one(const std::vector<T>& candidates, Rng& rng) {
  if (candidates.empty()) return std::nullopt;
  if (candidates.size() == 1) return candidates.front();
  return candidates[rng.below(candidates.size())];
}

// Transition positions: s0..s2, b0..b2, s{k}L, s{k}R, s{k}Lbar, s{k}Rbar,
// b0L. The root is never dropped.
inline transition::DropPolicy transition_policy(const std::string& position) {
  using transition::Configuration;
  auto bad = [&] { return ConfigError("unknown transition ablation position '" + position + "'"); };
  if (position.size() < 2 || (position[0] != 's' && position[0] != 'b') || position[1] < '0' || position[1] > '2') {
    throw bad();
  }
  const bool stack = position[0] == 's';
  const int depth = position[1] - '0';
  const std::string rest = position.substr(2);
  if (!stack && !rest.empty() && !(depth == 0 && rest == "L")) throw bad();
  if (rest != "" && rest != "L" && rest != "R" && rest != "Lbar" && rest != "Rbar") throw bad();
  return [stack, depth, rest](const Configuration& c, Rng& rng) -> std::optional<int> {
    const int node = stack ? c.s(depth) : c.b(depth);
    if (node < 0) return std::nullopt;
    if (rest.empty()) return node > 0 ? std::optional<int>(node) : std::nullopt;
    const auto left = c.left_children(node);
    const auto right = c.right_children(node);
    if (rest == "L") return left.empty() ? std::nullopt : std::optional<int>(left.front());
    if (rest == "R") return right.empty() ? std::nullopt : std::optional<int>(right.back());
    if (rest == "Lbar") return left.size() < 2 ? std::nullopt : pick_one(std::vector<int>(left.begin() + 1, left.end()), rng);
    return right.size() < 2 ? std::nullopt : pick_one(std::vector<int>(right.begin(), right.end() - 1), rng);
  };
}

// Graph positions relative to a scored arc h -> d in the gold tree:
// sibling, child, grandparent, or a surface offset such as h-1 or d+2.
// The arc's own tokens are never dropped.
inline graph::DropPolicy graph_policy(const std::string& position) {
  if (position == "sibling" || position == "child" || position == "grandparent") {
    return [position](int h, int d, const DepTree& gold, Rng& rng) -> std::optional<int> {
      std::vector<int> cand;
      if (position == "grandparent") {
        if (h > 0) {
          const int g = gold.head(h);
          if (g > 0 && g != d) cand.push_back(g);
        }
      } else {
        const int parent = position == "sibling" ? h : d;
        for (int c = 1; c <= gold.size(); ++c) {
          if (gold.head(c) == parent && c != d && c != h) cand.push_back(c);
        }
      }
      return pick_one(cand, rng);
    };
  }
  if (position.size() >= 3 && (position[0] == 'h' || position[0] == 'd') && (position[1] == '+' || position[1] == '-')) {
    int k = 0;
    try {
      k = std::stoi(position.substr(2));
    } catch (const std::exception&) {
      k = 0;
    }
    if (k >= 1 && k <= 5 && position.substr(2) == std::to_string(k)) {
      const bool head = position[0] == 'h';
      const int off = position[1] == '+' ? k : -k;
      return [head, off](int h, int d, const DepTree& gold, Rng&) -> std::optional<int> {
        const int p = (head ? h : d) + off;
        if (p < 1 || p > gold.size() || p == h || p == d) return std::nullopt;
        return p;
      };
    }
  }
  throw ConfigError("unknown graph ablation position '" + position + "'");
}

// Dev LAS of one trained model under one ablation spec ("none" for the
// baseline) on the corpus with the given fingerprint.
struct RunResult {
  std::string spec;
  std::uint64_t seed = 0;
  double las = 0.0;
  std::uint64_t corpus = 0;
};

struct DropRow {
  std::string spec;
  double mean_las = 0.0;
  double baseline_las = 0.0;
  double drop = 0.0;
  double stddev = 0.0;
  int n_seeds = 0;
};

// Mean LAS per spec against the baseline mean, largest drop first.
inline std::vector<DropRow> compare(const std::vector<RunResult>& baseline, const std::vector<RunResult>& ablated) {
  if (baseline.empty()) throw ConfigError("no baseline runs to compare against");
  const std::uint64_t corpus = baseline.front().corpus;
  std::vector<double> base;
  for (const auto& r : baseline) {
    if (r.corpus != corpus) throw ConfigError("baseline runs were evaluated on different corpora");
    base.push_back(r.las);
  }
  const double base_mean = eval::seed_stats(base).mean;
  std::map<std::string, std::vector<double>> by_spec;
  for (const auto& r : ablated) {
    if (r.corpus != corpus) throw ConfigError("ablated run '" + r.spec + "' was evaluated on a different corpus");
    by_spec[r.spec].push_back(r.las);
  }
  std::vector<DropRow> rows;
  for (const auto& [spec, las] : by_spec) {
    const auto st = eval::seed_stats(las);
    rows.push_back({spec, st.mean, base_mean, base_mean - st.mean, st.stddev, st.n});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const DropRow& a, const DropRow& b) {
    if (a.drop != b.drop) return a.drop > b.drop;
    return a.spec < b.spec;
  });
  return rows;
}

inline void write_drops(const std::string& path, const std::vector<DropRow>& rows) {
  std::vector<TsvRow> out;
  for (const auto& r : rows) {
    out.push_back({r.spec, fixed(r.mean_las, 2), fixed(r.baseline_las, 2), fixed(r.drop, 2), fixed(r.stddev, 2),
                   std::to_string(r.n_seeds)});
  }
  write_tsv_file(path, {"spec", "mean_las", "baseline_las", "drop", "stddev", "n_seeds"}, out);
}

}  // namespace dparse::ablation
