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
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dparse/encoder.hpp"
#include "dparse/errors.hpp"
#include "dparse/graph.hpp"
#include "dparse/transition.hpp"

namespace dparse {

// One experiment: parser, features, hyperparameters, seeds and data paths.
// Stored as flat `key = value` lines; '#' starts a comment.
struct Config {
  std::string parser = "transition";  // transition | graph
  std::string mode = "bilstm";        // bilstm | direct
  std::string features = "s0,s1,b0";
  std::string order = "first";  // first | second
  std::string decoder = "eisner";
  std::string surface = "none";
  int word_dim = 100;
  int pos_dim = 20;
  int lstm_layers = 2;
  int lstm_dim = 125;
  int hidden = 100;
  int label_hidden = 100;
  int dist_dim = 20;
  double word_dropout = 0.25;
  bool root_token = false;
  int epochs = 30;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
  std::string ablation = "none";
  bool ablate_at_test = true;
  std::string treebank;  // training CoNLL-U path
  std::string dev;       // development CoNLL-U path
  int length_cap = 10;

  // Key order for text output.
  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "parser", "mode", "features", "order", "decoder", "surface", "word_dim", "pos_dim", "lstm_layers",
        "lstm_dim", "hidden", "label_hidden", "dist_dim", "word_dropout", "root_token", "epochs", "learning_rate",
        "beta1", "beta2", "epsilon", "seeds", "ablation", "ablate_at_test", "treebank", "dev", "length_cap"};
    return k;
  }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  std::string to_text() const {
    std::string out;
    for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
    return out;
  }

  // Cross-field checks; throws ConfigError naming the offending value.
  void validate() const;

  bool is_graph() const { return parser == "graph"; }

  EncoderConfig encoder() const {
    EncoderConfig e;
    e.mode = mode == "direct" ? EncoderMode::kDirect : EncoderMode::kBiLstm;
    e.word_dim = word_dim;
    e.pos_dim = pos_dim;
    e.lstm_layers = lstm_layers;
    e.lstm_dim = lstm_dim;
    e.word_dropout = word_dropout;
    e.root_token = root_token;
    return e;
  }

  transition::ModelConfig transition_model() const {
    transition::ModelConfig m;
    m.encoder = encoder();
    m.features = transition::parse_feature_set(features);
    m.hidden = hidden;
    return m;
  }

  graph::ModelConfig graph_model() const {
    graph::ModelConfig m;
    m.encoder = encoder();
    m.order = order == "second" ? graph::Order::kSecond : graph::Order::kFirst;
    m.decoder = graph::parse_decoder(decoder);
    m.surface = graph::parse_surface(surface);
    m.hidden = hidden;
    m.label_hidden = label_hidden;
    m.dist_dim = dist_dim;
    return m;
  }

  ad::AdamConfig adam() const {
    ad::AdamConfig a;
    a.learning_rate = learning_rate;
    a.beta1 = beta1;
    a.beta2 = beta2;
    a.epsilon = epsilon;
    return a;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

inline std::string from_double(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

inline void Config::set(const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  auto one_of = [&](std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) if (v == a) return v;
    throw ConfigError("invalid value '" + v + "' for '" + key + "'");
  };
  if (key == "parser") parser = one_of({"transition", "graph"});
  else if (key == "mode") mode = one_of({"bilstm", "direct"});
  else if (key == "features") features = v;
  else if (key == "order") order = one_of({"first", "second"});
  else if (key == "decoder") decoder = one_of({"eisner", "eisner2", "cle"});
  else if (key == "surface") surface = v;
  else if (key == "word_dim") word_dim = to_int(key, v);
  else if (key == "pos_dim") pos_dim = to_int(key, v);
  else if (key == "lstm_layers") lstm_layers = to_int(key, v);
  else if (key == "lstm_dim") lstm_dim = to_int(key, v);
  else if (key == "hidden") hidden = to_int(key, v);
  else if (key == "label_hidden") label_hidden = to_int(key, v);
  else if (key == "dist_dim") dist_dim = to_int(key, v);
  else if (key == "word_dropout") word_dropout = to_double(key, v);
  else if (key == "root_token") root_token = to_bool(key, v);
  else if (key == "epochs") epochs = to_int(key, v);
  else if (key == "learning_rate") learning_rate = to_double(key, v);
  else if (key == "beta1") beta1 = to_double(key, v);
  else if (key == "beta2") beta2 = to_double(key, v);
  else if (key == "epsilon") epsilon = to_double(key, v);
  else if (key == "seeds") {
    seeds.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const int s = to_int(key, item);
      if (s < 0) throw ConfigError("seeds must be non-negative");
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (seeds.empty()) throw ConfigError("'seeds' is empty");
  }
  else if (key == "ablation") ablation = v;
  else if (key == "ablate_at_test") ablate_at_test = to_bool(key, v);
  else if (key == "treebank") treebank = v;
  else if (key == "dev") dev = v;
  else if (key == "length_cap") length_cap = to_int(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

inline std::string Config::get(const std::string& key) const {
  using detail::from_double;
  if (key == "parser") return parser;
  if (key == "mode") return mode;
  if (key == "features") return features;
  if (key == "order") return order;
  if (key == "decoder") return decoder;
  if (key == "surface") return surface;
  if (key == "word_dim") return std::to_string(word_dim);
  if (key == "pos_dim") return std::to_string(pos_dim);
  if (key == "lstm_layers") return std::to_string(lstm_layers);
  if (key == "lstm_dim") return std::to_string(lstm_dim);
  if (key == "hidden") return std::to_string(hidden);
  if (key == "label_hidden") return std::to_string(label_hidden);
  if (key == "dist_dim") return std::to_string(dist_dim);
  if (key == "word_dropout") return from_double(word_dropout);
  if (key == "root_token") return root_token ? "true" : "false";
  if (key == "epochs") return std::to_string(epochs);
  if (key == "learning_rate") return from_double(learning_rate);
  if (key == "beta1") return from_double(beta1);
  if (key == "beta2") return from_double(beta2);
  if (key == "epsilon") return from_double(epsilon);
  if (key == "seeds") {
    std::string out;
    for (auto s : seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
    return out;
  }
  if (key == "ablation") return ablation;
  if (key == "ablate_at_test") return ablate_at_test ? "true" : "false";
  if (key == "treebank") return treebank;
  if (key == "dev") return dev;
  if (key == "length_cap") return std::to_string(length_cap);
  throw ConfigError("unknown configuration key '" + key + "'");
}

inline void Config::validate() const {
  for (int v : {word_dim, pos_dim, lstm_dim, hidden, label_hidden, dist_dim}) {
    if (v < 1) throw ConfigError("dimensions must be positive");
  }
  if (lstm_layers < 1) throw ConfigError("lstm_layers must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (word_dropout < 0.0) throw ConfigError("word_dropout must be non-negative");
  if (length_cap < 1) throw ConfigError("length_cap must be at least 1");
  if (is_graph()) {
    const auto m = graph_model();
    if (graph::decoder_order(m.decoder) != m.order) {
      throw ConfigError("decoder '" + decoder + "' does not match order '" + order + "'");
    }
    if (ablation != "none" && m.order == graph::Order::kSecond) {
      throw ConfigError("ablation is only defined for first-order graph models");
    }
  } else {
    transition::parse_feature_set(features);
  }
}

// Applies `key = value` lines on top of `c`.
inline void apply_config(Config& c, std::istream& in) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    c.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline Config parse_config(std::istream& in) {
  Config c;
  apply_config(c, in);
  return c;
}

inline Config parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline void load_config(Config& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  apply_config(c, in);
}

inline Config load_config(const std::string& path) {
  Config c;
  load_config(c, path);
  return c;
}

}  // namespace dparse
