#pragma once

// Confusion-matrix metrics, k-fold aggregation and history CSV export.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fakegan/errors.hpp"
#include "fakegan/text.hpp"
#include "fakegan/trainer.hpp"

namespace fakegan {

struct ClassMetrics {
  Label label = Label::kDeceptive;
  std::optional<double> precision;  // absent when nothing was predicted as this class
  std::optional<double> recall;     // absent when the class does not occur
};

struct MetricsReport {
  std::size_t fold = 0;
  Label positive = Label::kDeceptive;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // with respect to `positive`
  double accuracy = 0.0;
  ClassMetrics positive_class, negative_class;

  std::size_t total() const { return tp + fp + tn + fn; }
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline MetricsReport compute_metrics(const std::vector<Label>& predictions,
                                     const std::vector<Label>& labels,
                                     Label positive = Label::kDeceptive, std::size_t fold = 0) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw EmptyInputError("compute_metrics: no examples");
  MetricsReport r;
  r.fold = fold;
  r.positive = positive;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == positive, truth = labels[i] == positive;
    if (pred && truth) ++r.tp;
    else if (pred) ++r.fp;
    else if (truth) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
  r.positive_class = {positive, ratio(r.tp, r.tp + r.fp), ratio(r.tp, r.tp + r.fn)};
  // Any label other than `positive` counts as negative.
  Label neg = positive == Label::kDeceptive ? Label::kTruthful : Label::kDeceptive;
  r.negative_class = {neg, ratio(r.tn, r.tn + r.fn), ratio(r.tn, r.tn + r.fp)};
  return r;
}

// Metrics of D on a test split (truthful = D's positive side).
inline MetricsReport evaluate_discriminator(const DiscriminatorParams& d, const LabeledCorpus& test,
                                            Label positive = Label::kDeceptive,
                                            std::size_t fold = 0) {
  std::vector<Label> pred, truth;
  for (const auto& s : test.truthful) {
    pred.push_back(classify(d, s));
    truth.push_back(Label::kTruthful);
  }
  for (const auto& s : test.deceptive) {
    pred.push_back(classify(d, s));
    truth.push_back(Label::kDeceptive);
  }
  return compute_metrics(pred, truth, positive, fold);
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;   // population std (denominator = count)
  std::size_t count = 0;  // folds where the metric was defined
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
  return s;
}

struct FoldAggregate {
  std::vector<MetricsReport> folds;
  Summary accuracy;
  std::optional<Summary> positive_precision, positive_recall, negative_precision, negative_recall;
};

inline FoldAggregate aggregate(std::vector<MetricsReport> folds) {
  if (folds.empty()) throw EmptyInputError("aggregate: no fold reports");
  FoldAggregate a;
  a.folds = std::move(folds);
  std::vector<double> acc;
  for (const auto& f : a.folds) acc.push_back(f.accuracy);
  a.accuracy = summarize(acc);
  // A precision/recall summary exists only when defined in every fold.
  auto collect = [&](auto getter) -> std::optional<Summary> {
    std::vector<double> xs;
    for (const auto& f : a.folds) {
      const std::optional<double> v = getter(f);
      if (!v) return std::nullopt;
      xs.push_back(*v);
    }
    return summarize(xs);
  };
  a.positive_precision = collect([](const MetricsReport& r) { return r.positive_class.precision; });
  a.positive_recall = collect([](const MetricsReport& r) { return r.positive_class.recall; });
  a.negative_precision = collect([](const MetricsReport& r) { return r.negative_class.precision; });
  a.negative_recall = collect([](const MetricsReport& r) { return r.negative_class.recall; });
  return a;
}

struct KFoldResult {
  FoldAggregate aggregate;
  std::vector<TrainResult> runs;
};

// Trains on each fold's training split and evaluates the returned D on its
// test split. Each fold gets its own derived seed.
inline KFoldResult run_kfold(const TrainConfig& config, const LabeledCorpus& corpus,
                             std::optional<EmbeddingTable> embeddings = std::nullopt,
                             Label positive = Label::kDeceptive) {
  config.validate();
  const auto folds = kfold_split(corpus, config.k_folds, config.seed);
  KFoldResult out;
  std::vector<MetricsReport> reports;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    TrainConfig c = config;
    c.seed = derive_seed(config.seed, {0xf0e5, f});
    TrainResult r = train(c, folds[f].train, folds[f].test, embeddings);
    reports.push_back(evaluate_discriminator(r.best_d, folds[f].test, positive, f));
    out.runs.push_back(std::move(r));
  }
  out.aggregate = aggregate(std::move(reports));
  return out;
}

inline constexpr const char* kHistoryHeader =
    "step,phase,d_acc,dprime_acc,d_loss,dprime_loss,gen_reward,seconds";

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("history: bad number '" + s + "'");
  }
  if (pos != s.size()) throw FormatError("history: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_history(std::ostream& out, const TrainingHistory& h) {
  out << kHistoryHeader << "\n";
  for (const auto& r : h) {
    out << r.step << ',' << to_string(r.phase) << ',' << detail::format_double(r.d_acc) << ','
        << detail::format_double(r.dprime_acc) << ',' << detail::format_double(r.d_loss) << ','
        << detail::format_double(r.dprime_loss) << ',' << detail::format_double(r.gen_reward)
        << ',' << detail::format_double(r.seconds) << "\n";
  }
}

inline void export_history(const TrainingHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_history(out, h);
  if (!out) throw IoError("write failed: " + path.string());
}

inline TrainingHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) {
    throw FormatError(path.string() + ": missing history header");
  }
  TrainingHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) throw FormatError(path.string() + ": expected 8 columns");
    HistoryRecord r;
    r.step = static_cast<std::size_t>(detail::parse_double(cells[0]));
    if (cells[1] == "pretrain") r.phase = Phase::kPretrain;
    else if (cells[1] == "adversarial") r.phase = Phase::kAdversarial;
    else throw FormatError(path.string() + ": unknown phase '" + cells[1] + "'");
    r.d_acc = detail::parse_double(cells[2]);
    r.dprime_acc = detail::parse_double(cells[3]);
    r.d_loss = detail::parse_double(cells[4]);
    r.dprime_loss = detail::parse_double(cells[5]);
    r.gen_reward = detail::parse_double(cells[6]);
    r.seconds = detail::parse_double(cells[7]);
    h.push_back(r);
  }
  return h;
}

}  // namespace fakegan
