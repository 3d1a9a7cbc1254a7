#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fakegan/cli.hpp"

using namespace fakegan;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fakegan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void write(const std::string& rel, const std::string& text) const {
    fs::create_directories((dir_ / rel).parent_path());
    std::ofstream(dir_ / rel) << text;
  }

  // A tiny config that keeps training runs well under a second.
  std::string tiny_config() const {
    const auto p = path("tiny.json");
    std::ofstream(p) << R"({"sequence_length": 16, "rollouts": 2, "episodes_per_gstep": 2,
      "d_steps": 1, "gen_pretrain_steps": 2, "disc_pretrain_steps": 2, "hidden": 4,
      "embedding_dim": 3, "kernel_windows": [2], "kernel_filters": [3], "max_iterations": 2,
      "k_folds": 2})";
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UnknownSubcommandIsAUsageError) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, BinaryExitCodes) {
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string bin = FAKEGAN_CLI;
  EXPECT_EQ(status(bin + " frobnicate"), 1);
  EXPECT_EQ(status(bin + " ingest " + path("nowhere")), 2);
  EXPECT_EQ(status(bin + " synth bayes --n-eval 2000"), 0);
}

TEST_F(CliTest, IngestCountsRetainedReviews) {
  write("data/truthful/a.txt", "The room was clean and quiet.");
  write("data/truthful/sub/b.txt", "Great staff, great view!");
  write("data/truthful/c.txt", "   ");
  write("data/deceptive/x.txt", "Best hotel ever, truly amazing luxury experience.");
  write("data/deceptive/y.txt", std::string(400, 'a') + " " + std::string(50, 'b'));
  write("data/deceptive/long.txt", [] {
    std::string s;
    for (int i = 0; i < 30; ++i) s += "word ";
    return s;
  }());
  auto r = run({"ingest", path("data"), "--length", "20", "--out", path("corpus.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "truthful=2 deceptive=2\n");
  auto c = load_corpus(path("corpus.json"));
  EXPECT_EQ(c.truthful.size(), 2u);
  EXPECT_EQ(c.sequence_length, 20u);
}

TEST_F(CliTest, IngestErrors) {
  write("data/truthful/a.txt", "fine");
  EXPECT_EQ(run({"ingest", path("data")}).code, 2);  // no deceptive/
  EXPECT_EQ(run({"ingest", path("data"), "--config", path("missing.json")}).code, 2);
  write("bad.json", R"({"no_such_field": 1})");
  EXPECT_EQ(run({"ingest", path("data"), "--config", path("bad.json")}).code, 1);
}

TEST_F(CliTest, ContractErrorLeavesNoOutput) {
  const auto cfg = tiny_config();
  // Sequence length 8 is shorter than the synthetic source length.
  auto r = run({"train", "--synthetic", "default", "--per-class", "10", "--config", cfg,
                "--length", "8", "--out", path("run")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("run")));
  EXPECT_FALSE(fs::exists(path("run.partial")));
  r = run({"ablate", "--synthetic", "default", "--per-class", "10", "--config", cfg, "--mode",
           "full", "--out", path("abl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("abl")));
}

TEST_F(CliTest, DataSourceIsExclusive) {
  const auto cfg = tiny_config();
  EXPECT_EQ(run({"train", "--config", cfg, "--out", path("r")}).code, 1);
  EXPECT_EQ(run({"train", "--synthetic", "default", "--corpus", "x", "--out", path("r")}).code, 1);
}

TEST_F(CliTest, TrainThenClassify) {
  const auto cfg = tiny_config();
  auto r = run({"train", "--synthetic", "default", "--per-class", "12", "--config", cfg, "--out",
                path("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("best_d_acc="), std::string::npos);
  for (const char* f : {"d.ckpt", "history.csv", "config.json", "checkpoints/best",
                        "checkpoints/iter_0001/d_prime.ckpt"}) {
    EXPECT_TRUE(fs::exists(path("run/") + f)) << f;
  }
  EXPECT_EQ(read_history(path("run/history.csv")).size(), 4u);  // 2 pretrain + 2 adversarial

  write("reviews/one.txt", "s1 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 s12 s13 s14 s15 s16 s17 s18");
  r = run({"classify", path("reviews/one.txt"), "--model", path("run/d.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  std::istringstream line(r.out);
  std::string p, label, score_s;
  std::getline(line, p, '\t');
  std::getline(line, label, '\t');
  std::getline(line, score_s);
  EXPECT_EQ(p, path("reviews/one.txt"));
  EXPECT_TRUE(label == "truthful" || label == "deceptive") << label;
  const double s = std::stod(score_s);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);

  write("reviews/two.txt", "s3 s3 s3");
  write("reviews/notes.md", "ignored");
  r = run({"classify", path("reviews"), "--model", path("run/d.ckpt")});
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);

  EXPECT_EQ(run({"classify", path("reviews"), "--model", path("run/checkpoints/iter_0001/d_prime.ckpt")}).code, 1);
  EXPECT_EQ(run({"classify", path("reviews"), "--model", path("run/history.csv")}).code, 2);
  EXPECT_EQ(run({"classify", path("absent"), "--model", path("run/d.ckpt")}).code, 2);
}

TEST_F(CliTest, TrainRunsAreReproducible) {
  const auto cfg = tiny_config();
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run({"train", "--synthetic", "default", "--per-class", "10", "--config", cfg, "--out",
                   path(out)}).code, 0);
  }
  std::ifstream a(path("a/history.csv")), b(path("b/history.csv"));
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST_F(CliTest, PretrainAblateKfoldSweep) {
  const auto cfg = tiny_config();
  auto r = run({"pretrain", "--synthetic", "default", "--per-class", "10", "--config", cfg, "--out",
                path("pre")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("pre/generator.ckpt")));
  EXPECT_TRUE(fs::exists(path("pre/d_prime.ckpt")));

  r = run({"ablate", "--synthetic", "default", "--per-class", "10", "--config", cfg, "--mode",
           "d-only-truthful-pretrain", "--out", path("abl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::exists(path("abl/checkpoints/iter_0001/d_prime.ckpt")));
  for (const auto& rec : read_history(path("abl/history.csv"))) EXPECT_TRUE(std::isnan(rec.dprime_acc));

  r = run({"kfold", "--synthetic", "default", "--per-class", "10", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fold=0 "), std::string::npos);
  EXPECT_NE(r.out.find("fold=1 "), std::string::npos);
  EXPECT_NE(r.out.find("accuracy="), std::string::npos);
  EXPECT_NE(r.out.find("recall[truthful]="), std::string::npos);

  r = run({"sweep-gd", "--synthetic", "default", "--per-class", "10", "--config", cfg, "--g-max", "1",
           "--d-max", "2", "--max-iterations", "1", "--out", path("sweep")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream table(path("sweep/sweep.csv"));
  std::string header, row;
  std::getline(table, header);
  std::size_t rows = 0;
  while (std::getline(table, row)) ++rows;
  EXPECT_EQ(rows, 2u);
  EXPECT_TRUE(fs::exists(path("sweep/history_g1_d2.csv")));
}

TEST_F(CliTest, SynthFlow) {
  ASSERT_EQ(run({"synth", "pair", "--out", path("pair.json")}).code, 0);
  auto r = run({"synth", "gen", "--pair", path("pair.json"), "--per-class", "5", "--out",
                path("c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "truthful=5 deceptive=5\n");
  EXPECT_EQ(load_corpus(path("c.json")).deceptive.size(), 5u);
  r = run({"synth", "bayes", "--pair", path("pair.json"), "--n-eval", "4000"});
  ASSERT_EQ(r.code, 0);
  const double acc = std::stod(r.out.substr(r.out.find('=') + 1));
  EXPECT_GT(acc, 0.8);
  EXPECT_LT(acc, 1.0);
  EXPECT_EQ(run({"synth", "bayes", "--n-eval", "10"}).code, 1);
  EXPECT_EQ(run({"synth", "gen", "--pair", path("absent.json"), "--out", path("x.json")}).code, 2);
  EXPECT_EQ(run({"synth"}).code, 1);
}

TEST_F(CliTest, GradcheckSingleSeed) {
  auto r = run({"gradcheck", "--seeds", "1"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all gradient checks passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  // An impossible tolerance must fail.
  EXPECT_EQ(run({"gradcheck", "--seeds", "1", "--tol", "0"}).code, 1);
}
