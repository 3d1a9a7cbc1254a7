#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fakegan/metrics.hpp"
#include "fakegan/synth.hpp"

using namespace fakegan;

namespace {

constexpr Label T = Label::kTruthful, D = Label::kDeceptive;

std::filesystem::path temp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fakegan_metrics";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Metrics, PerfectPredictions) {
  const std::vector<Label> y{T, D, D, T, D};
  auto r = compute_metrics(y, y);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.positive_class.precision, 1.0);
  EXPECT_EQ(r.positive_class.recall, 1.0);
  EXPECT_EQ(r.negative_class.precision, 1.0);
  EXPECT_EQ(r.negative_class.recall, 1.0);
  EXPECT_EQ(r.tp, 3u);
  EXPECT_EQ(r.tn, 2u);
}

TEST(Metrics, AllPredictedPositiveOnBalancedLabels) {
  const std::vector<Label> y{T, D, T, D, T, D};
  const std::vector<Label> pred(6, D);
  auto r = compute_metrics(pred, y);
  EXPECT_EQ(r.accuracy, 0.5);
  EXPECT_EQ(r.positive_class.recall, 1.0);
  EXPECT_EQ(r.positive_class.precision, 0.5);
  EXPECT_FALSE(r.negative_class.precision.has_value());  // nothing predicted truthful
  EXPECT_EQ(r.negative_class.recall, 0.0);
}

TEST(Metrics, PositiveClassIsSelectable) {
  const std::vector<Label> y{T, T, D, D};
  const std::vector<Label> pred{T, D, D, D};
  auto dec = compute_metrics(pred, y, D);
  auto tru = compute_metrics(pred, y, T);
  EXPECT_EQ(dec.positive_class.label, D);
  EXPECT_EQ(tru.positive_class.label, T);
  EXPECT_EQ(dec.positive_class.precision, tru.negative_class.precision);
  EXPECT_EQ(dec.positive_class.recall, tru.negative_class.recall);
  EXPECT_NEAR(*dec.positive_class.precision, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(*tru.positive_class.recall, 0.5);
  EXPECT_EQ(dec.accuracy, tru.accuracy);
}

TEST(Metrics, AbsentRecallWhenClassMissing) {
  const std::vector<Label> y{T, T};
  auto r = compute_metrics(std::vector<Label>{T, D}, y);
  EXPECT_FALSE(r.positive_class.recall.has_value());
  EXPECT_EQ(r.positive_class.precision, 0.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics({T}, {T, D}), DimensionError);
  EXPECT_THROW(compute_metrics({}, {}), EmptyInputError);
  EXPECT_THROW(aggregate({}), EmptyInputError);
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(5);
  std::vector<Label> y, p;
  for (int i = 0; i < 200; ++i) {
    y.push_back(rng.uniform() < 0.4 ? T : D);
    p.push_back(rng.uniform() < 0.5 ? T : D);
  }
  const auto ref = compute_metrics(p, y);
  std::vector<std::size_t> idx(y.size());
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    std::vector<Label> ys, ps;
    for (std::size_t i : idx) {
      ys.push_back(y[i]);
      ps.push_back(p[i]);
    }
    const auto r = compute_metrics(ps, ys);
    EXPECT_EQ(r.tp, ref.tp);
    EXPECT_EQ(r.fp, ref.fp);
    EXPECT_EQ(r.accuracy, ref.accuracy);
    EXPECT_EQ(r.positive_class.precision, ref.positive_class.precision);
    EXPECT_EQ(r.negative_class.recall, ref.negative_class.recall);
  }
}

TEST(Metrics, AggregateUsesPopulationStd) {
  std::vector<MetricsReport> folds;
  for (double a : {0.8, 0.9, 1.0}) {
    MetricsReport r;
    r.accuracy = a;
    r.positive_class.precision = 1.0;
    r.positive_class.recall = a;
    folds.push_back(r);
  }
  folds[1].negative_class.precision = 0.5;  // defined in one fold only
  auto agg = aggregate(folds);
  EXPECT_NEAR(agg.accuracy.mean, 0.9, 1e-15);
  EXPECT_NEAR(agg.accuracy.std, std::sqrt(0.02 / 3), 1e-15);
  EXPECT_EQ(agg.accuracy.count, 3u);
  ASSERT_TRUE(agg.positive_precision);
  EXPECT_EQ(agg.positive_precision->std, 0.0);
  EXPECT_FALSE(agg.negative_precision.has_value());
}

TEST(Metrics, IdenticalFoldsHaveZeroStd) {
  std::vector<MetricsReport> folds(4);
  for (auto& f : folds) f.accuracy = 0.7;
  auto agg = aggregate(folds);
  EXPECT_NEAR(agg.accuracy.mean, 0.7, 1e-15);
  EXPECT_EQ(agg.accuracy.std, 0.0);
}

TEST(Metrics, KFoldProducesOneReportPerFold) {
  MarkovSource t, d;
  t.vocab_size = d.vocab_size = 3;
  t.length = d.length = 5;
  t.initial = {0.6, 0.2, 0.2};
  d.initial = {0.2, 0.2, 0.6};
  t.transition = Array({3, 3}, std::vector<double>{0.6, 0.2, 0.2, 0.6, 0.2, 0.2, 0.6, 0.2, 0.2});
  d.transition = Array({3, 3}, std::vector<double>{0.2, 0.2, 0.6, 0.2, 0.2, 0.6, 0.2, 0.2, 0.6});
  auto corpus = sample_corpus({t, d, 0.5}, 20, 4);
  TrainConfig c;
  c.sequence_length = 5;
  c.rollouts = 2;
  c.episodes_per_gstep = 2;
  c.d_steps = 1;
  c.gen_pretrain_steps = 2;
  c.disc_pretrain_steps = 2;
  c.hidden = 4;
  c.embedding_dim = 3;
  c.kernel_windows = {2};
  c.kernel_filters = {3};
  c.max_iterations = 1;
  c.k_folds = 5;
  auto a = run_kfold(c, corpus);
  ASSERT_EQ(a.aggregate.folds.size(), 5u);
  for (std::size_t f = 0; f < 5; ++f) {
    EXPECT_EQ(a.aggregate.folds[f].fold, f);
    EXPECT_EQ(a.aggregate.folds[f].total(), 8u);
  }
  auto b = run_kfold(c, corpus);
  for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(a.runs[f].history, b.runs[f].history);
}

TEST(History, RoundTripIncludingNaN) {
  TrainingHistory h;
  for (std::size_t i = 1; i <= 4; ++i) {
    HistoryRecord r;
    r.step = i;
    r.phase = i <= 2 ? Phase::kPretrain : Phase::kAdversarial;
    r.d_acc = 0.1 * static_cast<double>(i) + 1e-17;
    r.d_loss = std::exp(-static_cast<double>(i)) / 3.0;
    r.gen_reward = 1.0 / 7.0;
    if (i % 2) {
      r.dprime_acc = 2.0 / 3.0;
      r.dprime_loss = 0.3;
    }
    h.push_back(r);
  }
  const auto path = temp("h.csv");
  export_history(h, path);
  EXPECT_EQ(read_history(path), h);
}

TEST(History, EmptyHistoryIsHeaderOnly) {
  const auto path = temp("empty.csv");
  export_history({}, path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(all, std::string(kHistoryHeader) + "\n");
  EXPECT_TRUE(read_history(path).empty());
}

TEST(History, FiveHundredStepColumn) {
  TrainingHistory h(500);
  for (std::size_t i = 0; i < 500; ++i) h[i].step = i + 1;
  const auto path = temp("500.csv");
  export_history(h, path);
  const auto back = read_history(path);
  ASSERT_EQ(back.size(), 500u);
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(back[i].step, i + 1);
}

TEST(History, MalformedFilesAreRejected) {
  const auto path = temp("bad.csv");
  std::ofstream(path) << "step,phase\n1,pretrain\n";
  EXPECT_THROW(read_history(path), FormatError);
  std::ofstream(path) << kHistoryHeader << "\n1,sideways,0,0,0,0,0,0\n";
  EXPECT_THROW(read_history(path), FormatError);
  std::ofstream(path) << kHistoryHeader << "\n1,pretrain,abc,0,0,0,0,0\n";
  EXPECT_THROW(read_history(path), FormatError);
  std::ofstream(path) << kHistoryHeader << "\n1,pretrain,0,0\n";
  EXPECT_THROW(read_history(path), FormatError);
  EXPECT_THROW(read_history(temp("nope.csv")), IoError);
  EXPECT_THROW(export_history({}, "/nonexistent_dir/x.csv"), IoError);
}
