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
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dparse/errors.hpp"

namespace dparse {

// One syntactic word of a CoNLL-U sentence. Heads use 0 for the artificial
// root; `columns` keeps the raw ten fields so writers can pass through the
// columns this library does not interpret.
struct Token {
  int index = 0;
  std::string form;
  std::string upos;
  int gold_head = 0;
  std::string gold_label;
  std::optional<int> predicted_head;
  std::optional<std::string> predicted_label;
  std::array<std::string, 10> columns;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  // 1-based access.
  const Token& at(int i) const { return tokens.at(static_cast<std::size_t>(i - 1)); }
  Token& at(int i) { return tokens.at(static_cast<std::size_t>(i - 1)); }

  bool operator==(const Sentence&) const = default;
};

// Head function over nodes 0..n. Slot 0 is the artificial root and holds -1
// in both vectors; token i's head is heads[i].
struct DepTree {
  std::vector<int> heads{-1};
  std::vector<int> labels{-1};

  DepTree() = default;
  explicit DepTree(int n) : heads(static_cast<std::size_t>(n + 1), 0), labels(static_cast<std::size_t>(n + 1), 0) {
    heads[0] = -1;
    labels[0] = -1;
  }

  // From the per-token head list, e.g. {2, 0} for "He runs".
  static DepTree from_heads(const std::vector<int>& token_heads) {
    DepTree t(static_cast<int>(token_heads.size()));
    for (std::size_t i = 0; i < token_heads.size(); ++i) t.heads[i + 1] = token_heads[i];
    return t;
  }

  int size() const { return static_cast<int>(heads.size()) - 1; }
  int head(int i) const { return heads[static_cast<std::size_t>(i)]; }
  int label(int i) const { return labels[static_cast<std::size_t>(i)]; }

  // Dependents of every node, in increasing index order.
  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> out(heads.size());
    for (int d = 1; d <= size(); ++d) {
      const int h = head(d);
      if (h >= 0 && h <= size()) out[static_cast<std::size_t>(h)].push_back(d);
    }
    return out;
  }

  bool operator==(const DepTree&) const = default;
};

// Interned label inventory; ids are contiguous in first-seen order.
class LabelVocab {
 public:
  int intern(const std::string& label) {
    auto [it, inserted] = ids_.try_emplace(label, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(label);
    return it->second;
  }

  // -1 for labels never interned.
  int lookup(const std::string& label) const {
    auto it = ids_.find(label);
    return it == ids_.end() ? -1 : it->second;
  }

  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelVocab& o) const { return names_ == o.names_; }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> names_;
};

// Checks that `tree` is a head function over 1..n with every token reaching
// the root. Returns a description of the first violation, if any.
inline std::optional<std::string> tree_violation(const DepTree& tree, bool require_single_root) {
  const int n = tree.size();
  int root_children = 0;
  for (int d = 1; d <= n; ++d) {
    const int h = tree.head(d);
    if (h < 0 || h > n) return "token " + std::to_string(d) + " has head " + std::to_string(h) + " out of range";
    if (h == d) return "token " + std::to_string(d) + " is its own head";
    if (h == 0) ++root_children;
  }
  // Colour walk: 0 unvisited, 1 on the current path, 2 known to reach root.
  std::vector<char> state(static_cast<std::size_t>(n + 1), 0);
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int v = start;
    while (state[static_cast<std::size_t>(v)] == 0) {
      state[static_cast<std::size_t>(v)] = 1;
      path.push_back(v);
      v = tree.head(v);
    }
    if (state[static_cast<std::size_t>(v)] == 1) return "cycle through token " + std::to_string(v);
    for (int p : path) state[static_cast<std::size_t>(p)] = 2;
  }
  if (n > 0 && root_children == 0) return "no token attached to the root";
  if (require_single_root && root_children > 1) {
    return std::to_string(root_children) + " tokens attached to the root";
  }
  return std::nullopt;
}

inline bool is_tree(const DepTree& tree, bool require_single_root = false) {
  return !tree_violation(tree, require_single_root).has_value();
}

// True iff no two arcs cross. Arcs sharing an endpoint never cross.
inline bool is_projective(const DepTree& tree) {
  const int n = tree.size();
  // An arc (l, r) is crossed by another arc iff exactly one endpoint of the
  // other lies strictly inside. Checked with a sweep over nodes per arc.
  for (int d = 1; d <= n; ++d) {
    const int l = std::min(d, tree.head(d));
    const int r = std::max(d, tree.head(d));
    for (int k = l + 1; k < r; ++k) {
      const int hk = tree.head(k);
      if (hk < l || hk > r) return false;
    }
  }
  return true;
}

// Inorder traversal of the tree with children visited in index order; the
// result maps each token to its 1-based rank (slot 0 stays 0). Reordering
// tokens by this rank always yields a projective tree.
inline std::vector<int> projective_order(const DepTree& tree) {
  const int n = tree.size();
  const auto kids = tree.children();
  std::vector<int> order(static_cast<std::size_t>(n + 1), 0);
  int next = 1;
  auto visit = [&](auto&& self, int node) -> void {
    const auto& ch = kids[static_cast<std::size_t>(node)];
    auto split = std::lower_bound(ch.begin(), ch.end(), node);
    for (auto it = ch.begin(); it != split; ++it) self(self, *it);
    if (node != 0) order[static_cast<std::size_t>(node)] = next++;
    for (auto it = split; it != ch.end(); ++it) self(self, *it);
  };
  visit(visit, 0);
  return order;
}

// The tree obtained by moving token i to position order[i].
inline DepTree reorder(const DepTree& tree, const std::vector<int>& order) {
  const int n = tree.size();
  DepTree out(n);
  for (int i = 1; i <= n; ++i) {
    const int h = tree.head(i);
    const auto pos = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
    out.heads[pos] = h == 0 ? 0 : order[static_cast<std::size_t>(h)];
    out.labels[pos] = tree.label(i);
  }
  return out;
}

// Gold tree of a sentence; labels are looked up in `labels` (-1 when absent
// or when no inventory is given).
inline DepTree gold_tree(const Sentence& s, const LabelVocab* labels = nullptr) {
  DepTree t(s.size());
  for (const Token& tok : s.tokens) {
    t.heads[static_cast<std::size_t>(tok.index)] = tok.gold_head;
    t.labels[static_cast<std::size_t>(tok.index)] = labels != nullptr ? labels->lookup(tok.gold_label) : -1;
  }
  return t;
}

// Label inventory of a corpus in first-occurrence order.
inline LabelVocab build_labels(const std::vector<Sentence>& corpus) {
  LabelVocab labels;
  for (const Sentence& s : corpus) {
    for (const Token& t : s.tokens) labels.intern(t.gold_label);
  }
  return labels;
}

struct ReadOptions {
  // Accept sentences whose root has several dependents.
  bool allow_multiple_roots = false;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

// Reads CoNLL-U. Comment lines, multiword-token ranges ("3-4") and empty
// nodes ("5.1") are skipped; ID, FORM, UPOS, HEAD and DEPREL are
// interpreted and every column is kept verbatim for pass-through.
inline std::vector<Sentence> parse_conllu(std::istream& in, const ReadOptions& options = {}) {
  std::vector<Sentence> out;
  Sentence current;
  long block_line = 0;
  long lineno = 0;
  std::string line;

  auto finish = [&]() {
    if (current.tokens.empty()) {
      current = Sentence{};
      return;
    }
    const std::string name = current.id.empty()
                                 ? "sentence " + std::to_string(out.size() + 1) + " (line " +
                                       std::to_string(block_line) + ")"
                                 : "sentence '" + current.id + "'";
    const int n = current.size();
    for (int i = 1; i <= n; ++i) {
      if (current.at(i).index != i) throw ValidationError(name + ": token ids are not contiguous from 1");
    }
    if (auto why = tree_violation(gold_tree(current), !options.allow_multiple_roots)) {
      throw ValidationError(name + ": " + *why);
    }
    out.push_back(std::move(current));
    current = Sentence{};
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish();
      continue;
    }
    if (current.tokens.empty() && block_line == 0) block_line = lineno;
    if (line.front() == '#') {
      constexpr std::string_view kSentId = "# sent_id = ";
      if (line.rfind(kSentId, 0) == 0) current.id = line.substr(kSentId.size());
      continue;
    }
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 10) {
      throw FormatError("expected 10 tab-separated columns, found " + std::to_string(cols.size()), lineno);
    }
    if (cols[0].find('-') != std::string_view::npos || cols[0].find('.') != std::string_view::npos) continue;
    const auto id = detail::parse_int(cols[0]);
    if (!id || *id < 1) throw FormatError("malformed token id '" + std::string(cols[0]) + "'", lineno);
    const auto head = detail::parse_int(cols[6]);
    if (!head || *head < 0) throw FormatError("malformed head '" + std::string(cols[6]) + "'", lineno);
    if (current.tokens.empty()) block_line = lineno;
    Token tok;
    tok.index = *id;
    tok.form = cols[1];
    tok.upos = cols[3];
    tok.gold_head = *head;
    tok.gold_label = cols[7];
    for (std::size_t c = 0; c < 10; ++c) tok.columns[c] = cols[c];
    current.tokens.push_back(std::move(tok));
    if (current.tokens.size() == 1) block_line = lineno;
  }
  finish();
  return out;
}

inline std::vector<Sentence> parse_conllu(std::string_view text, const ReadOptions& options = {}) {
  std::string copy(text);
  std::istringstream in(copy);
  return parse_conllu(in, options);
}

// Writes CoNLL-U. With `predicted`, HEAD and DEPREL come from the predicted
// fields (falling back to gold when unset). Columns never read emit '_'.
inline void write_conllu(std::ostream& os, const std::vector<Sentence>& sentences, bool predicted = false) {
  for (const Sentence& s : sentences) {
    if (!s.id.empty()) os << "# sent_id = " << s.id << '\n';
    for (const Token& t : s.tokens) {
      std::array<std::string, 10> cols;
      for (std::size_t c = 0; c < 10; ++c) cols[c] = t.columns[c].empty() ? "_" : t.columns[c];
      cols[0] = std::to_string(t.index);
      cols[1] = t.form.empty() ? "_" : t.form;
      cols[3] = t.upos.empty() ? "_" : t.upos;
      const int head = predicted && t.predicted_head ? *t.predicted_head : t.gold_head;
      const std::string& label = predicted && t.predicted_label ? *t.predicted_label : t.gold_label;
      cols[6] = std::to_string(head);
      cols[7] = label.empty() ? "_" : label;
      for (std::size_t c = 0; c < 10; ++c) os << (c ? "\t" : "") << cols[c];
      os << '\n';
    }
    os << '\n';
  }
}

// FNV-1a over forms, tags, heads and labels; identifies a corpus in result
// tables.
inline std::uint64_t corpus_fingerprint(const std::vector<Sentence>& corpus) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) {
      mix(t.form);
      mix(t.upos);
      mix(std::to_string(t.gold_head));
      mix(t.gold_label);
    }
    mix("\n");
  }
  return h;
}

}  // namespace dparse
