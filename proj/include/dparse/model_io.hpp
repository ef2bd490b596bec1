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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dparse/config.hpp"
#include "dparse/errors.hpp"
#include "dparse/experiment.hpp"

// Model files: "DPRS", u32 LE version, u32 LE header length, a text header
// (config, seed, vocabularies, parameter manifest) and the parameters as
// float32 LE in manifest order.
namespace dparse::model_io {

inline constexpr char kMagic[4] = {'D', 'P', 'R', 'S'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace detail

inline std::string header(const Parser& p) {
  std::string h = "[config]\n" + p.config().to_text();
  h += "[run]\nseed = " + std::to_string(p.seed()) + "\n";
  h += "[words]\n";
  const Vocab& v = p.vocab();
  for (int i = 0; i < v.num_words(); ++i) {
    h += v.words()[static_cast<std::size_t>(i)] + "\t" + std::to_string(v.frequency(i)) + "\n";
  }
  h += "[tags]\n";
  for (const auto& t : v.tags()) h += t + "\n";
  h += "[labels]\n";
  for (const auto& l : p.labels().names()) h += l + "\n";
  h += "[params]\n";
  for (const auto& prm : p.store().params()) {
    h += prm.name + "\t" + std::to_string(prm.rows) + "\t" + std::to_string(prm.cols) + "\n";
  }
  return h;
}

inline std::string serialize(const Parser& p) {
  const std::string h = header(p);
  std::string out(kMagic, 4);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (const auto& prm : p.store().params()) {
    for (float x : prm.value) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline std::unique_ptr<Parser> deserialize(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, kMagic, 4) != 0) throw LoadError("not a model file (bad magic)");
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kVersion) throw LoadError("unsupported model file version " + std::to_string(version));
  const std::uint32_t hlen = detail::get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw LoadError("truncated model header");
  const auto text = detail::lines(bytes.substr(12, hlen));

  std::string section, config_text;
  std::uint64_t seed = 0;
  bool have_seed = false;
  Vocab vocab;
  LabelVocab labels;
  struct Entry {
    std::string name;
    int rows, cols;
  };
  std::vector<Entry> manifest;
  int words = 0, tags = 0;
  for (const auto& line : text) {
    if (!line.empty() && line.front() == '[') {
      section = line;
      continue;
    }
    if (section == "[config]") {
      config_text += line + "\n";
    } else if (section == "[run]") {
      if (line.rfind("seed = ", 0) != 0) throw LoadError("malformed run section");
      seed = std::stoull(line.substr(7));
      have_seed = true;
    } else if (section == "[words]") {
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw LoadError("malformed vocabulary entry");
      // Entry 0 is the built-in unknown word.
      if (words++ > 0) vocab.add_word(line.substr(0, tab), std::stol(line.substr(tab + 1)));
    } else if (section == "[tags]") {
      if (tags++ > 0) vocab.add_tag(line);
    } else if (section == "[labels]") {
      labels.intern(line);
    } else if (section == "[params]") {
      std::istringstream in(line);
      Entry e;
      if (!std::getline(in, e.name, '\t') || !(in >> e.rows >> e.cols)) throw LoadError("malformed manifest entry");
      manifest.push_back(e);
    } else {
      throw LoadError("unexpected header content outside a section");
    }
  }
  if (!have_seed) throw LoadError("model header has no seed");

  Config config;
  try {
    config = parse_config(config_text);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("model config: ") + e.what());
  }
  auto parser = std::make_unique<Parser>(config, std::move(vocab), std::move(labels), seed);
  auto& params = parser->store().params();
  if (params.size() != manifest.size()) throw LoadError("parameter manifest does not match the model");
  std::size_t floats = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.name != manifest[i].name || p.rows != manifest[i].rows || p.cols != manifest[i].cols) {
      throw LoadError("parameter manifest mismatch at '" + manifest[i].name + "' (" + std::to_string(manifest[i].rows) + "x" + std::to_string(manifest[i].cols) + " in file, " + std::to_string(p.rows) + "x" + std::to_string(p.cols) + " in model)");
    }
    floats += p.size();
  }
  const std::size_t payload = bytes.size() - 12 - hlen;
  if (payload != 4 * floats) {
    throw LoadError("payload has " + std::to_string(payload) + " bytes, expected " + std::to_string(4 * floats));
  }
  std::size_t at = 12 + hlen;
  for (auto& p : params) {
    for (float& x : p.value) {
      x = std::bit_cast<float>(detail::get_u32(bytes, at));
      at += 4;
    }
  }
  return parser;
}

inline void save(const Parser& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write model file " + path);
  const std::string bytes = serialize(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("failed writing model file " + path);
}

inline std::unique_ptr<Parser> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read model file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace dparse::model_io
