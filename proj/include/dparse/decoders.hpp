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
#include <array>
#include <limits>
#include <vector>

#include "dparse/errors.hpp"
#include "dparse/treebank.hpp"

// Exact decoders over arc-factored and sibling-factored scores. Node 0 is
// the root and takes exactly one dependent in every decoder.
namespace dparse::decode {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// (n+1)x(n+1) arc scores, entry (h, d) for h -> d.
class ArcScores {
 public:
  explicit ArcScores(int n, double fill = 0.0)
      : n_(n), data_(static_cast<std::size_t>((n + 1) * (n + 1)), fill) {}

  int size() const { return n_; }
  double& operator()(int h, int d) { return data_[static_cast<std::size_t>(h * (n_ + 1) + d)]; }
  double operator()(int h, int d) const { return data_[static_cast<std::size_t>(h * (n_ + 1) + d)]; }

 private:
  int n_;
  std::vector<double> data_;
};

// s2(h, d, s) with s the adjacent inner sibling of d on the same side of h.
// Sibling 0 stands for NONE; the root is never strictly between h and d.
class SiblingScores {
 public:
  static constexpr int kNone = 0;

  explicit SiblingScores(int n, double fill = 0.0)
      : n_(n), data_(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)), fill) {}

  int size() const { return n_; }
  double& operator()(int h, int d, int s) { return data_[index(h, d, s)]; }
  double operator()(int h, int d, int s) const { return data_[index(h, d, s)]; }

 private:
  std::size_t index(int h, int d, int s) const {
    return static_cast<std::size_t>((h * (n_ + 1) + d) * (n_ + 1) + s);
  }

  int n_;
  std::vector<double> data_;
};

// Adjacent inner sibling of d under its head in `t`, or NONE.
inline int inner_sibling(const DepTree& t, int d) {
  const int h = t.head(d);
  int best = SiblingScores::kNone;
  for (int c = 1; c <= t.size(); ++c) {
    if (c == d || t.head(c) != h) continue;
    if (d > h && c > h && c < d && (best == 0 || c > best)) best = c;
    if (d < h && c < h && c > d && (best == 0 || c < best)) best = c;
  }
  return best;
}

inline double tree_score(const ArcScores& arcs, const DepTree& t) {
  double total = 0.0;
  for (int d = 1; d <= t.size(); ++d) total += arcs(t.head(d), d);
  return total;
}

inline double tree_score(const ArcScores& arcs, const SiblingScores& sib, const DepTree& t) {
  double total = 0.0;
  for (int d = 1; d <= t.size(); ++d) total += arcs(t.head(d), d) + sib(t.head(d), d, inner_sibling(t, d));
  return total;
}

namespace detail {

// Square table over token spans 1..n.
template <class T>
class Chart {
 public:
  Chart(int n, T fill) : n_(n), data_(static_cast<std::size_t>((n + 2) * (n + 2)), fill) {}
  T& operator()(int s, int t) { return data_[static_cast<std::size_t>(s * (n_ + 2) + t)]; }
  T operator()(int s, int t) const { return data_[static_cast<std::size_t>(s * (n_ + 2) + t)]; }

 private:
  int n_;
  std::vector<T> data_;
};

inline void check_size(int n) {
  if (n < 1) throw ContractError("decoder needs at least one token");
}

}  // namespace detail

// First-order projective decoding. Spans cover tokens 1..n; the root then
// picks its single child r with the complete spans [1, r] and [r, n].
inline DepTree eisner(const ArcScores& sc) {
  const int n = sc.size();
  detail::check_size(n);
  using detail::Chart;
  Chart<double> cr(n, 0.0), cl(n, 0.0), ir(n, kNegInf), il(n, kNegInf);
  Chart<int> bcr(n, -1), bcl(n, -1), bir(n, -1), bil(n, -1);
  for (int w = 1; w < n; ++w) {
    for (int s = 1; s + w <= n; ++s) {
      const int t = s + w;
      double best = kNegInf;
      int arg = -1;
      for (int r = s; r < t; ++r) {
        const double v = cr(s, r) + cl(r + 1, t);
        if (v > best) best = v, arg = r;
      }
      ir(s, t) = best + sc(s, t), bir(s, t) = arg;
      il(s, t) = best + sc(t, s), bil(s, t) = arg;

      best = kNegInf, arg = -1;
      for (int r = s + 1; r <= t; ++r) {
        const double v = ir(s, r) + cr(r, t);
        if (v > best) best = v, arg = r;
      }
      cr(s, t) = best, bcr(s, t) = arg;

      best = kNegInf, arg = -1;
      for (int r = s; r < t; ++r) {
        const double v = cl(s, r) + il(r, t);
        if (v > best) best = v, arg = r;
      }
      cl(s, t) = best, bcl(s, t) = arg;
    }
  }
  double best = kNegInf;
  int root = -1;
  for (int r = 1; r <= n; ++r) {
    const double v = sc(0, r) + cl(1, r) + cr(r, n);
    if (v > best) best = v, root = r;
  }
  if (root < 0) throw DecodeError("no finite-scoring tree");

  std::vector<int> heads(static_cast<std::size_t>(n), 0);
  auto set = [&](int h, int d) { heads[static_cast<std::size_t>(d - 1)] = h; };
  // Explicit stack of (kind, s, t): 0 cr, 1 cl, 2 ir, 3 il.
  std::vector<std::array<int, 3>> todo{{1, 1, root}, {0, root, n}};
  while (!todo.empty()) {
    const auto [kind, s, t] = todo.back();
    todo.pop_back();
    if (s == t) continue;
    switch (kind) {
      case 0: {
        const int r = bcr(s, t);
        todo.push_back({2, s, r});
        todo.push_back({0, r, t});
        break;
      }
      case 1: {
        const int r = bcl(s, t);
        todo.push_back({1, s, r});
        todo.push_back({3, r, t});
        break;
      }
      case 2:
      case 3: {
        const int r = kind == 2 ? bir(s, t) : bil(s, t);
        if (kind == 2) set(s, t); else set(t, s);
        todo.push_back({0, s, r});
        todo.push_back({1, r + 1, t});
        break;
      }
    }
  }
  set(0, root);
  return DepTree::from_heads(heads);
}

// Second-order projective decoding with adjacent-sibling parts. The score
// of d under h with inner sibling s is arcs(h, d) + sib(h, d, s).
inline DepTree eisner2(const ArcScores& arcs, const SiblingScores& sib) {
  const int n = arcs.size();
  detail::check_size(n);
  if (sib.size() != n) throw DimensionError("arc and sibling scores disagree on sentence length");
  using detail::Chart;
  auto part = [&](int h, int d, int s) { return arcs(h, d) + sib(h, d, s); };
  Chart<double> cr(n, 0.0), cl(n, 0.0), ir(n, kNegInf), il(n, kNegInf), sb(n, kNegInf);
  // For incomplete items the back-pointer is the inner sibling, 0 for NONE.
  Chart<int> bcr(n, -1), bcl(n, -1), bir(n, -1), bil(n, -1), bsb(n, -1);
  for (int w = 1; w < n; ++w) {
    for (int s = 1; s + w <= n; ++s) {
      const int t = s + w;
      double best = kNegInf;
      int arg = -1;
      for (int r = s; r < t; ++r) {
        const double v = cr(s, r) + cl(r + 1, t);
        if (v > best) best = v, arg = r;
      }
      sb(s, t) = best, bsb(s, t) = arg;

      best = cl(s + 1, t) + part(s, t, SiblingScores::kNone), arg = 0;
      for (int r = s + 1; r < t; ++r) {
        const double v = ir(s, r) + sb(r, t) + part(s, t, r);
        if (v > best) best = v, arg = r;
      }
      ir(s, t) = best, bir(s, t) = arg;

      best = cr(s, t - 1) + part(t, s, SiblingScores::kNone), arg = 0;
      for (int r = t - 1; r > s; --r) {
        const double v = sb(s, r) + il(r, t) + part(t, s, r);
        if (v > best) best = v, arg = r;
      }
      il(s, t) = best, bil(s, t) = arg;

      best = kNegInf, arg = -1;
      for (int r = s + 1; r <= t; ++r) {
        const double v = ir(s, r) + cr(r, t);
        if (v > best) best = v, arg = r;
      }
      cr(s, t) = best, bcr(s, t) = arg;

      best = kNegInf, arg = -1;
      for (int r = s; r < t; ++r) {
        const double v = cl(s, r) + il(r, t);
        if (v > best) best = v, arg = r;
      }
      cl(s, t) = best, bcl(s, t) = arg;
    }
  }
  double best = kNegInf;
  int root = -1;
  for (int r = 1; r <= n; ++r) {
    const double v = part(0, r, SiblingScores::kNone) + cl(1, r) + cr(r, n);
    if (v > best) best = v, root = r;
  }
  if (root < 0) throw DecodeError("no finite-scoring tree");

  std::vector<int> heads(static_cast<std::size_t>(n), 0);
  auto set = [&](int h, int d) { heads[static_cast<std::size_t>(d - 1)] = h; };
  // Kinds: 0 cr, 1 cl, 2 ir, 3 il, 4 sibling.
  std::vector<std::array<int, 3>> todo{{1, 1, root}, {0, root, n}};
  while (!todo.empty()) {
    const auto [kind, s, t] = todo.back();
    todo.pop_back();
    if (s == t) continue;
    switch (kind) {
      case 0: {
        const int r = bcr(s, t);
        todo.push_back({2, s, r});
        todo.push_back({0, r, t});
        break;
      }
      case 1: {
        const int r = bcl(s, t);
        todo.push_back({1, s, r});
        todo.push_back({3, r, t});
        break;
      }
      case 2: {
        set(s, t);
        const int r = bir(s, t);
        if (r == 0) {
          todo.push_back({1, s + 1, t});
        } else {
          todo.push_back({2, s, r});
          todo.push_back({4, r, t});
        }
        break;
      }
      case 3: {
        set(t, s);
        const int r = bil(s, t);
        if (r == 0) {
          todo.push_back({0, s, t - 1});
        } else {
          todo.push_back({4, s, r});
          todo.push_back({3, r, t});
        }
        break;
      }
      case 4: {
        const int r = bsb(s, t);
        todo.push_back({0, s, r});
        todo.push_back({1, r + 1, t});
        break;
      }
    }
  }
  set(0, root);
  return DepTree::from_heads(heads);
}

namespace detail {

// Maximum spanning arborescence of a dense graph rooted at node 0
// (recursive contraction). Returns head per node, head[0] = -1.
inline std::vector<int> arborescence(const std::vector<std::vector<double>>& w) {
  const int m = static_cast<int>(w.size());
  std::vector<int> best(static_cast<std::size_t>(m), -1);
  for (int v = 1; v < m; ++v) {
    for (int u = 0; u < m; ++u) {
      if (u == v) continue;
      if (best[v] < 0 || w[u][v] > w[best[v]][v]) best[v] = u;
    }
  }
  // Find a cycle among the best incoming arcs.
  std::vector<int> color(static_cast<std::size_t>(m), 0);
  std::vector<int> cycle;
  for (int start = 1; start < m && cycle.empty(); ++start) {
    int v = start;
    while (v > 0 && color[v] == 0) {
      color[v] = start;
      v = best[v];
    }
    if (v > 0 && color[v] == start) {
      int u = v;
      do {
        cycle.push_back(u);
        u = best[u];
      } while (u != v);
    }
  }
  if (cycle.empty()) return best;

  std::vector<bool> in_cycle(static_cast<std::size_t>(m), false);
  for (int v : cycle) in_cycle[v] = true;
  std::vector<int> id(static_cast<std::size_t>(m), -1), back;
  for (int v = 0; v < m; ++v) {
    if (!in_cycle[v]) {
      id[v] = static_cast<int>(back.size());
      back.push_back(v);
    }
  }
  const int c = static_cast<int>(back.size());
  const int mm = c + 1;
  std::vector<std::vector<double>> w2(static_cast<std::size_t>(mm), std::vector<double>(static_cast<std::size_t>(mm), kNegInf));
  std::vector<int> enter(static_cast<std::size_t>(mm), -1);  // cycle node entered from outside node
  std::vector<int> leave(static_cast<std::size_t>(mm), -1);  // cycle node leaving to outside node
  for (int u = 0; u < m; ++u) {
    for (int v = 1; v < m; ++v) {
      if (u == v) continue;
      if (!in_cycle[u] && !in_cycle[v]) {
        w2[id[u]][id[v]] = w[u][v];
      } else if (!in_cycle[u] && in_cycle[v]) {
        const double s = w[u][v] - w[best[v]][v];
        if (enter[id[u]] < 0 || s > w2[id[u]][c]) w2[id[u]][c] = s, enter[id[u]] = v;
      } else if (in_cycle[u] && !in_cycle[v]) {
        if (leave[id[v]] < 0 || w[u][v] > w2[c][id[v]]) w2[c][id[v]] = w[u][v], leave[id[v]] = u;
      }
    }
  }
  const auto sub = arborescence(w2);
  std::vector<int> heads = best;
  for (int v = 0; v < m; ++v) {
    if (in_cycle[v] || v == 0) continue;
    const int h = sub[id[v]];
    heads[v] = h == c ? leave[id[v]] : back[h];
  }
  const int from = back[sub[c]];
  heads[enter[id[from]]] = from;
  return heads;
}

}  // namespace detail

// Non-projective decoding: the best arborescence for each choice of root
// child, keeping the first best.
inline DepTree chu_liu_edmonds(const ArcScores& sc) {
  const int n = sc.size();
  detail::check_size(n);
  std::vector<std::vector<double>> w(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(n + 1), kNegInf));
  for (int h = 1; h <= n; ++h) {
    for (int d = 1; d <= n; ++d) {
      if (h != d) w[h][d] = sc(h, d);
    }
  }
  double best = kNegInf;
  DepTree out(n);
  bool found = false;
  for (int r = 1; r <= n; ++r) {
    for (int d = 1; d <= n; ++d) w[0][d] = d == r ? sc(0, r) : kNegInf;
    const auto heads = detail::arborescence(w);
    DepTree t(n);
    for (int d = 1; d <= n; ++d) t.heads[static_cast<std::size_t>(d)] = heads[static_cast<std::size_t>(d)];
    const double v = tree_score(sc, t);
    if (!found || v > best) best = v, out = t, found = true;
  }
  return out;
}

}  // namespace dparse::decode
