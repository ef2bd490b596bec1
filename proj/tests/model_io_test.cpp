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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "dparse/config.hpp"
#include "dparse/experiment.hpp"
#include "dparse/model_io.hpp"
#include "dparse/synth.hpp"

namespace {

using namespace dparse;

Config tiny(const std::string& parser) {
  Config c;
  c.parser = parser;
  c.word_dim = 6;
  c.pos_dim = 3;
  c.lstm_dim = 5;
  c.lstm_layers = 1;
  c.hidden = 7;
  c.label_hidden = 4;
  c.dist_dim = 3;
  c.epochs = 2;
  return c;
}

std::vector<Sentence> corpus(int n, std::uint64_t seed = 3) {
  synth::Options o;
  o.sentences = n;
  o.seed = seed;
  return synth::generate(o);
}

TEST(Config, DefaultsRoundTripThroughText) {
  Config c;
  c.seeds = {4, 9};
  c.learning_rate = 0.0025;
  c.root_token = true;
  const Config d = parse_config(c.to_text());
  EXPECT_EQ(d.to_text(), c.to_text());
  EXPECT_EQ(d.seeds, (std::vector<std::uint64_t>{4, 9}));
  EXPECT_TRUE(d.root_token);
}

TEST(Config, CommentsAndWhitespace) {
  const Config c = parse_config("# experiment\n  parser =  graph  # inline\n\ndecoder=cle\n");
  EXPECT_EQ(c.parser, "graph");
  EXPECT_EQ(c.decoder, "cle");
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    parse_config("hiden = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hiden"), std::string::npos);
  }
}

TEST(Config, InvalidFeatureTokenNamesTheToken) {
  Config c;
  c.set("features", "s0,s9,b0");
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("s9"), std::string::npos);
  }
}

TEST(Config, RejectsBadValues) {
  Config c;
  EXPECT_THROW(c.set("epochs", "ten"), ConfigError);
  EXPECT_THROW(c.set("parser", "chart"), ConfigError);
  EXPECT_THROW(c.set("root_token", "maybe"), ConfigError);
  EXPECT_THROW(c.set("seeds", ""), ConfigError);
  c.parser = "graph";
  c.decoder = "eisner2";
  EXPECT_THROW(c.validate(), ConfigError);
  c.order = "second";
  EXPECT_NO_THROW(c.validate());
  c.surface = "dist,hd3";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Synth, DeterministicValidTrees) {
  const auto a = corpus(200, 11);
  const auto b = corpus(200, 11);
  EXPECT_EQ(a, b);
  EXPECT_NE(corpus_fingerprint(a), corpus_fingerprint(corpus(200, 12)));
  int nonprojective = 0;
  for (const auto& s : a) {
    const DepTree t = gold_tree(s);
    ASSERT_TRUE(is_tree(t, true));
    if (!is_projective(t)) ++nonprojective;
  }
  EXPECT_GT(nonprojective, 0);
  EXPECT_LT(nonprojective, 40);
}

TEST(Synth, ConlluRoundTrip) {
  const auto a = corpus(20);
  std::ostringstream os;
  write_conllu(os, a);
  const auto b = parse_conllu(os.str());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(gold_tree(a[i]).heads, gold_tree(b[i]).heads);
}

class ModelFile : public ::testing::TestWithParam<std::string> {};

TEST_P(ModelFile, SaveLoadSaveIsByteIdentical) {
  const auto data = corpus(30);
  Config c = tiny(GetParam());
  if (GetParam() == "graph") c.surface = "dist,hd1";
  auto r = train(c, data, corpus(5, 4), 7);
  const std::string a = model_io::serialize(*r.parser);
  auto loaded = model_io::deserialize(a);
  EXPECT_EQ(model_io::serialize(*loaded), a);
  EXPECT_EQ(loaded->vocab(), r.parser->vocab());
  EXPECT_EQ(loaded->labels(), r.parser->labels());
  EXPECT_EQ(loaded->seed(), 7u);
  EXPECT_EQ(loaded->config().to_text(), c.to_text());
  const auto probe = corpus(10, 99);
  EXPECT_EQ(loaded->parse_all(probe).size(), probe.size());
  const auto p1 = r.parser->parse_all(probe);
  const auto p2 = loaded->parse_all(probe);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    EXPECT_EQ(p1[i].heads, p2[i].heads);
    EXPECT_EQ(p1[i].labels, p2[i].labels);
  }
}

TEST_P(ModelFile, PayloadLengthMatchesManifest) {
  auto r = train(tiny(GetParam()), corpus(10), corpus(3, 4), 1);
  const std::string bytes = model_io::serialize(*r.parser);
  const std::string h = model_io::header(*r.parser);
  EXPECT_EQ(bytes.size(), 12 + h.size() + 4 * r.parser->store().total_size());
  EXPECT_EQ(bytes.substr(0, 4), "DPRS");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
}

INSTANTIATE_TEST_SUITE_P(Both, ModelFile, ::testing::Values("transition", "graph"));

TEST(ModelFileErrors, RejectsBadInput) {
  auto r = train(tiny("transition"), corpus(10), corpus(3, 4), 1);
  const std::string good = model_io::serialize(*r.parser);

  std::string v2 = good;
  v2[4] = 2;
  EXPECT_THROW(model_io::deserialize(v2), LoadError);

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(model_io::deserialize(magic), LoadError);

  EXPECT_THROW(model_io::deserialize(good.substr(0, good.size() - 4)), LoadError);
  EXPECT_THROW(model_io::deserialize(good + "abcd"), LoadError);

  std::string renamed = good;
  const auto at = renamed.find("mlp.W1\t");
  ASSERT_NE(at, std::string::npos);
  renamed[at + 4] = 'X';
  EXPECT_THROW(model_io::deserialize(renamed), LoadError);

  // A changed hidden size in the config echo no longer fits the manifest.
  std::string resized = good;
  const auto hid = resized.find("hidden = 7");
  ASSERT_NE(hid, std::string::npos);
  resized[hid + 9] = '8';
  EXPECT_THROW(model_io::deserialize(resized), LoadError);
}

TEST(ModelFileErrors, MissingFile) {
  EXPECT_THROW(model_io::load("/nonexistent/model.dprs"), LoadError);
}

TEST(ModelFileIo, FileRoundTrip) {
  auto r = train(tiny("graph"), corpus(10), corpus(3, 4), 2);
  const auto path = (std::filesystem::temp_directory_path() / "dparse_model_io_test.dprs").string();
  model_io::save(*r.parser, path);
  auto loaded = model_io::load(path);
  EXPECT_EQ(model_io::serialize(*loaded), model_io::serialize(*r.parser));
  std::remove(path.c_str());
}

TEST(Training, SameSeedSameModelDifferentSeedDifferentModel) {
  const auto data = corpus(15);
  const auto dev = corpus(4, 4);
  const Config c = tiny("transition");
  EXPECT_EQ(model_io::serialize(*train(c, data, dev, 5).parser), model_io::serialize(*train(c, data, dev, 5).parser));
  EXPECT_NE(model_io::serialize(*train(c, data, dev, 5).parser), model_io::serialize(*train(c, data, dev, 6).parser));
}

TEST(Training, KeepsBestDevEpoch) {
  Config c = tiny("graph");
  c.epochs = 4;
  const auto dev = corpus(6, 4);
  auto r = train(c, corpus(20), dev, 3);
  ASSERT_EQ(r.log.size(), 4u);
  double best = -1;
  int epoch = 0;
  for (const auto& e : r.log) {
    if (e.dev_las > best) {
      best = e.dev_las;
      epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, epoch);
  EXPECT_DOUBLE_EQ(r.parser->evaluate(dev).las, best);
}

TEST(Training, EmptyCorpusIsAConfigError) {
  EXPECT_THROW(train(tiny("graph"), {}, corpus(2), 1), ConfigError);
}

TEST(Ladder, CumulativeCells) {
  const auto cells = ladder_cells({"s0", "s1", "b0"});
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0].name, "s0");
  EXPECT_EQ(cells[2].name, "+b0");
  EXPECT_EQ(cells[2].features, "s0,s1,b0");
  const auto g = ladder_cells(graph_ladder());
  EXPECT_EQ(g[0].features, "none");
  EXPECT_EQ(g[3].features, "dist,hd1,hd2");
}

}  // namespace
