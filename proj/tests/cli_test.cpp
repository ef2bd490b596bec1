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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dparse/treebank.hpp"

namespace {

namespace fs = std::filesystem;

const std::string kTiny =
    " --set word_dim=8 --set pos_dim=4 --set lstm_dim=8 --set lstm_layers=1 --set hidden=10"
    " --set label_hidden=8 --set dist_dim=4 --quiet";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "dparse_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run("synth --sentences 40 --seed 1 --output " + (dir_ / "train.conllu").string()), 0);
    ASSERT_EQ(run("synth --sentences 10 --seed 2 --output " + (dir_ / "dev.conllu").string()), 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // Exit status of `dparse args`; stderr goes to err.txt in the test dir.
  static int run(const std::string& args) {
    const std::string cmd = std::string(DPARSE_CLI) + " " + args + " > " + (dir_ / "out.txt").string() + " 2> " +
                            (dir_ / "err.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string data() {
    return " --treebank " + (dir_ / "train.conllu").string() + " --dev " + (dir_ / "dev.conllu").string();
  }

  static std::string out(const std::string& name) { return " --out-dir " + (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --no-such-flag"), 2);
}

TEST_F(Cli, InvalidFeatureTokenIsAUsageError) {
  EXPECT_EQ(run("train --set features=s0,q7" + data() + out("bad")), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("q7"), std::string::npos);
}

TEST_F(Cli, UnknownConfigKeyIsAUsageError) {
  std::ofstream(dir_ / "bad.cfg") << "parser = graph\nlayers = 3\n";
  EXPECT_EQ(run("train --config " + (dir_ / "bad.cfg").string() + data()), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("layers"), std::string::npos);
}

TEST_F(Cli, MissingInputIsARuntimeError) {
  EXPECT_EQ(run("train --treebank /nonexistent.conllu --dev /nonexistent.conllu" + kTiny), 1);
  EXPECT_EQ(run("parse --model /nonexistent.dprs --input " + (dir_ / "dev.conllu").string()), 1);
}

TEST_F(Cli, TrainTwiceIsByteIdentical) {
  const std::string args = "train --seed 3 --set epochs=2" + kTiny + data();
  ASSERT_EQ(run(args + out("a")), 0);
  ASSERT_EQ(run(args + out("b")), 0);
  for (const char* f : {"model.seed3.dprs", "table1.tsv", "fig2.tsv", "fig8.tsv", "train_log.tsv", "config.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(first_line(dir_ / "a" / "table1.tsv"), "model\ttreebank\tmean_las\tstddev");
  EXPECT_EQ(first_line(dir_ / "a" / "fig2.tsv"), "model\tarc_length\trecall\tgold_count");
  EXPECT_EQ(first_line(dir_ / "a" / "fig8.tsv"), "model\tarc_length\tprecision\tgold_count");
  EXPECT_EQ(first_line(dir_ / "a" / "train_log.tsv"), "seed\tepoch\tloss\tdev_las\tbest");
}

TEST_F(Cli, MemorizesToyCorpusAndParsesIt) {
  ASSERT_EQ(run("synth --sentences 10 --seed 9 --output " + (dir_ / "toy.conllu").string()), 0);
  const std::string toy = (dir_ / "toy.conllu").string();
  ASSERT_EQ(run("train --seed 1 --set epochs=50 --set word_dropout=0 --quiet --treebank " + toy + " --dev " + toy +
                out("toy")),
            0);
  const std::string model = (dir_ / "toy" / "model.seed1.dprs").string();
  const std::string parsed = (dir_ / "toy_parsed.conllu").string();
  ASSERT_EQ(run("parse --model " + model + " --input " + toy + " --output " + parsed), 0);
  const auto gold = dparse::parse_conllu(slurp(toy));
  const auto pred = dparse::parse_conllu(slurp(parsed));
  ASSERT_EQ(gold.size(), pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ASSERT_EQ(gold[i].size(), pred[i].size());
    for (int t = 1; t <= gold[i].size(); ++t) {
      const auto& g = gold[i].at(t);
      const auto& p = pred[i].at(t);
      EXPECT_EQ(g.gold_head, p.gold_head);
      EXPECT_EQ(g.gold_label, p.gold_label);
      for (std::size_t c : {0u, 1u, 2u, 3u, 4u, 5u, 8u, 9u}) EXPECT_EQ(g.columns[c], p.columns[c]);
    }
  }
  ASSERT_EQ(run("parse --model " + model + " --input " + toy + " --output " + parsed + "2"), 0);
  EXPECT_EQ(slurp(parsed), slurp(parsed + "2"));
}

TEST_F(Cli, EvalImpactAndAblateWriteDeclaredTsv) {
  ASSERT_EQ(run("train --set seeds=1,2 --set epochs=1" + kTiny + data() + out("t")), 0);
  const std::string models =
      " --model " + (dir_ / "t" / "model.seed1.dprs").string() + " --model " + (dir_ / "t" / "model.seed2.dprs").string();
  ASSERT_EQ(run("eval" + models + " --dev " + (dir_ / "dev.conllu").string() + out("e")), 0);
  EXPECT_EQ(first_line(dir_ / "e" / "table1.tsv"), "model\ttreebank\tmean_las\tstddev");
  EXPECT_EQ(first_line(dir_ / "e" / "significance.tsv"), "model_a\tmodel_b\tp_value");
  EXPECT_EQ(slurp(dir_ / "e" / "table1.tsv"), slurp(dir_ / "t" / "table1.tsv"));

  ASSERT_EQ(run("impact" + models + " --dev " + (dir_ / "dev.conllu").string() + out("i")), 0);
  ASSERT_EQ(run("impact" + models + " --dev " + (dir_ / "dev.conllu").string() + out("i2")), 0);
  for (const char* f : {"fig4.tsv", "fig5a.tsv"}) {
    EXPECT_EQ(first_line(dir_ / "i" / f), "taxonomy\tbucket\tmean_impact\tcount") << f;
    EXPECT_EQ(slurp(dir_ / "i" / f), slurp(dir_ / "i2" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "i" / "fig5b.tsv"));
  EXPECT_EQ(run("impact --taxonomy everything" + models + " --dev " + (dir_ / "dev.conllu").string()), 2);

  ASSERT_EQ(run("ablate --specs s0L,b0 --seed 1 --set epochs=1" + kTiny + data() + out("x")), 0);
  EXPECT_EQ(first_line(dir_ / "x" / "fig6a.tsv"), "spec\tmean_las\tbaseline_las\tdrop\tstddev\tn_seeds");
  EXPECT_EQ(run("ablate --specs sibling --seed 1" + kTiny + data()), 2);
}

TEST_F(Cli, GraphImpactWritesTreePositions) {
  ASSERT_EQ(run("train --seed 1 --set parser=graph --set epochs=1" + kTiny + data() + out("g")), 0);
  ASSERT_EQ(run("impact --taxonomy scores --model " + (dir_ / "g" / "model.seed1.dprs").string() + " --dev " +
                (dir_ / "dev.conllu").string() + out("gi")),
            0);
  EXPECT_EQ(first_line(dir_ / "gi" / "fig5b.tsv"), "taxonomy\tbucket\tmean_impact\tcount");
  EXPECT_FALSE(fs::exists(dir_ / "gi" / "fig4.tsv"));
}

TEST_F(Cli, SweepCellsAndSingleStepLadderMatchesTrain) {
  ASSERT_EQ(run("sweep --ladder s0 --seed 4 --set epochs=1" + kTiny + data() + out("s")), 0);
  ASSERT_EQ(run("train --set features=s0 --seed 4 --set epochs=1" + kTiny + data() + out("s_train")), 0);
  std::ifstream sweep(dir_ / "s" / "fig3a.tsv");
  std::string header, bilstm, direct, extra;
  std::getline(sweep, header);
  std::getline(sweep, bilstm);
  std::getline(sweep, direct);
  EXPECT_FALSE(std::getline(sweep, extra));
  EXPECT_EQ(header, "cell\tmode\tmean_las\tstddev");
  std::ifstream table(dir_ / "s_train" / "table1.tsv");
  std::string row;
  std::getline(table, row);
  std::getline(table, row);
  auto field = [](const std::string& line, int k) {
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i <= k; ++i) std::getline(ss, f, '\t');
    return f;
  };
  EXPECT_EQ(field(bilstm, 1), "bilstm");
  EXPECT_EQ(field(direct, 1), "direct");
  EXPECT_EQ(field(bilstm, 2), field(row, 2));

  ASSERT_EQ(run("sweep --set parser=graph --ladder none,dist --orders first,second --seed 4 --set epochs=1" + kTiny +
                data() + out("sg")),
            0);
  std::ifstream g(dir_ / "sg" / "fig3b.tsv");
  int lines = 0;
  for (std::string l; std::getline(g, l);) ++lines;
  EXPECT_EQ(lines, 1 + 2 * 2 * 2);
}

}  // namespace
