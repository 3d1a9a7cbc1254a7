#pragma once

// The adversarial training loop: pretraining, g-steps (policy gradient on
// rollout action values), d-steps (retraining D and D'), convergence
// detection and best-checkpoint selection.

#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fakegan/checkpoint.hpp"
#include "fakegan/config.hpp"
#include "fakegan/discriminator.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/rollout.hpp"
#include "fakegan/text.hpp"

namespace fakegan {

enum class Phase { kPretrain, kAdversarial };

inline const char* to_string(Phase p) { return p == Phase::kPretrain ? "pretrain" : "adversarial"; }

struct HistoryRecord {
  std::size_t step = 0;
  Phase phase = Phase::kPretrain;
  double d_acc = 0.0;
  double dprime_acc = std::numeric_limits<double>::quiet_NaN();  // NaN without D'
  double d_loss = 0.0;
  double dprime_loss = std::numeric_limits<double>::quiet_NaN();
  double gen_reward = 0.0;  // mean terminal reward of evaluation samples
  double seconds = 0.0;     // 0 unless wall-clock recording is enabled

  friend bool operator==(const HistoryRecord& a, const HistoryRecord& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.step == b.step && a.phase == b.phase && same(a.d_acc, b.d_acc) &&
           same(a.dprime_acc, b.dprime_acc) && same(a.d_loss, b.d_loss) &&
           same(a.dprime_loss, b.dprime_loss) && same(a.gen_reward, b.gen_reward) &&
           same(a.seconds, b.seconds);
  }
};

using TrainingHistory = std::vector<HistoryRecord>;

struct Models {
  GeneratorParams generator;
  DiscriminatorParams d;
  std::optional<DiscriminatorParams> d_prime;  // absent in single-discriminator modes
  RolloutPolicy rollout;
  Adam d_optimizer;
  Adam dprime_optimizer;
  std::size_t iteration = 0;

  Reward reward() const { return Reward{&d, d_prime ? &*d_prime : nullptr}; }
};

struct IterationStats {
  std::size_t policy_updates = 0;
  std::size_t episodes = 0;
  std::size_t discriminator_phases = 0;
  std::vector<std::size_t> generated_pool_sizes;  // per d-step
  std::vector<double> action_values;              // every A_t consumed by the updates
};

namespace detail {

inline std::vector<TokenSequence> concat(const std::vector<TokenSequence>& a,
                                         const std::vector<TokenSequence>& b) {
  std::vector<TokenSequence> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace detail

// Holds one training run over a train/test split.
class AdversarialTrainer {
 public:
  AdversarialTrainer(TrainConfig config, LabeledCorpus train, LabeledCorpus test,
                     std::optional<EmbeddingTable> embeddings = std::nullopt)
      : config_(std::move(config)), train_(std::move(train)), test_(std::move(test)) {
    config_.validate();
    if (train_.truthful.empty() || train_.deceptive.empty()) {
      throw EmptyCorpusError("trainer: both classes of the training split must be nonempty");
    }
    if (test_.truthful.empty() || test_.deceptive.empty()) {
      throw EmptyCorpusError("trainer: both classes of the test split must be nonempty");
    }
    if (train_.sequence_length != config_.sequence_length) {
      throw ContractError("trainer: corpus sequence length " +
                          std::to_string(train_.sequence_length) + " != config " +
                          std::to_string(config_.sequence_length));
    }
    if (embeddings) {
      embeddings_ = std::move(*embeddings);
    } else if (!config_.embeddings_path.empty()) {
      embeddings_ = load_embeddings(config_.embeddings_path, *train_.vocab, config_.seed);
    } else {
      embeddings_ = random_embeddings(*train_.vocab, config_.embedding_dim, config_.seed);
    }
    if (embeddings_.rows() != train_.vocab->size()) {
      throw DimensionError("trainer: embedding rows do not match the vocabulary");
    }
  }

  const TrainConfig& config() const noexcept { return config_; }
  const TrainingHistory& history() const noexcept { return history_; }
  const LabeledCorpus& train_split() const noexcept { return train_; }
  const LabeledCorpus& test_split() const noexcept { return test_; }
  bool pretrained() const noexcept { return models_.has_value(); }
  Models& models() {
    if (!models_) throw ContractError("trainer: models not pretrained yet");
    return *models_;
  }

  // Generator MLE, then D (X_T vs X_D) and D' (X_D vs |X_D| generated
  // samples), then the rollout snapshot. One history record per
  // discriminator pretraining step.
  void pretrain_all() {
    const bool dual = config_.mode == TrainMode::kFull;
    const auto& g_data =
        config_.mode == TrainMode::kTruthfulPretrainOnlyD ? train_.truthful : train_.deceptive;
    history_.clear();
    models_.reset();
    Models m{make_generator(embeddings_, config_.generator_config(), seed({1})),
             make_discriminator(embeddings_, config_.discriminator_config(), Role::kD, seed({2})),
             std::nullopt,
             {},
             Adam(config_.disc_lr),
             Adam(config_.disc_lr),
             0};
    if (dual) {
      m.d_prime = make_discriminator(embeddings_, config_.discriminator_config(), Role::kDPrime,
                                     seed({3}));
    }
    try {
      mle_pretrain(m.generator, g_data, config_.gen_pretrain_steps, config_.gen_pretrain_lr,
                   config_.gen_batch, seed({4}));
    } catch (const TrainingDivergedError& e) {
      throw TrainingDivergedError("pretrain generator", e.step());
    }
    models_ = std::move(m);
    Models& mm = *models_;
    std::vector<TokenSequence> negatives_dp;
    if (dual) negatives_dp = sample_many(mm.generator, train_.deceptive.size(), seed({5}));
    const auto t_ptr = pointers(train_.truthful), d_ptr = pointers(train_.deceptive),
               g_ptr = pointers(negatives_dp);
    for (std::size_t s = 0; s < config_.disc_pretrain_steps; ++s) {
      Rng rd = Rng::stream(config_.seed, {6, s});
      train_epoch(mm.d, Role::kD, t_ptr, d_ptr, mm.d_optimizer, config_.disc_batch, rd);
      if (dual) {
        Rng rp = Rng::stream(config_.seed, {7, s});
        train_epoch(*mm.d_prime, Role::kDPrime, d_ptr, g_ptr, mm.dprime_optimizer,
                    config_.disc_batch, rp);
      }
      record(Phase::kPretrain);
      check_finite("pretrain discriminators", s + 1);
    }
    mm.rollout = snapshot(mm.generator, 0);
    pretrain_accuracy_ = history_.empty() ? evaluate().d_acc : history_.back().d_acc;
  }

  // g policy-gradient updates on B fresh episodes each, then d
  // discriminator phases with |X_G| = |X_T|, then γ ← α.
  IterationStats adversarial_iteration() {
    Models& m = models();
    const std::size_t it = ++m.iteration;
    IterationStats stats;
    for (std::size_t g = 0; g < config_.g_steps; ++g) {
      std::vector<Episode> episodes;
      for (std::size_t b = 0; b < config_.episodes_per_gstep; ++b) {
        Rng rng = Rng::stream(config_.seed, {10, it, g, b});
        Episode ep{sample_sequence(m.generator, rng), {}};
        ep.action_values = episode_profile(ep.sequence, m.reward(), m.rollout, config_.rollouts,
                                           derive_seed(config_.seed, {11, it, g, b}),
                                           config_.threads)
                               .values;
        stats.action_values.insert(stats.action_values.end(), ep.action_values.begin(),
                                   ep.action_values.end());
        episodes.push_back(std::move(ep));
      }
      policy_gradient_update(m.generator, episodes, config_.policy_lr, config_.grad_clip,
                             config_.reward_baseline);
      stats.episodes += episodes.size();
      ++stats.policy_updates;
      if (!m.generator.out_w.all_finite()) throw TrainingDivergedError("policy gradient", it);
      if (config_.refresh_rollout_each_gstep) m.rollout = snapshot(m.generator, m.rollout.version() + 1);
    }
    const auto t_ptr = pointers(train_.truthful), d_ptr = pointers(train_.deceptive);
    for (std::size_t d = 0; d < config_.d_steps; ++d) {
      const auto generated =
          sample_many(m.generator, train_.truthful.size(), derive_seed(config_.seed, {12, it, d}));
      stats.generated_pool_sizes.push_back(generated.size());
      auto negatives = d_ptr;
      for (const auto& s : generated) negatives.push_back(&s);
      Rng rd = Rng::stream(config_.seed, {13, it, d});
      train_epoch(m.d, Role::kD, t_ptr, negatives, m.d_optimizer, config_.disc_batch, rd);
      ++stats.discriminator_phases;
      if (m.d_prime) {
        Rng rp = Rng::stream(config_.seed, {14, it, d});
        train_epoch(*m.d_prime, Role::kDPrime, d_ptr, pointers(generated), m.dprime_optimizer,
                    config_.disc_batch, rp);
        ++stats.discriminator_phases;
      }
    }
    m.rollout = snapshot(m.generator, m.rollout.version() + 1);
    record(Phase::kAdversarial);
    check_finite("adversarial discriminators", it);
    return stats;
  }

  // Held-out evaluation of the current models (no side effects on them).
  HistoryRecord evaluate() const {
    const Models& m = *models_;
    HistoryRecord r;
    r.d_acc = accuracy(m.d, test_.truthful, test_.deceptive);
    r.d_loss = batch_loss(m.d, test_.truthful, test_.deceptive);
    const auto generated = sample_many(m.generator, test_.deceptive.size(),
                                       derive_seed(config_.seed, {20, history_.size()}));
    if (m.d_prime) {
      r.dprime_acc = accuracy(*m.d_prime, test_.deceptive, generated);
      r.dprime_loss = batch_loss(*m.d_prime, test_.deceptive, generated);
    }
    const Reward rw = m.reward();
    double total = 0.0;
    for (const auto& s : generated) total += rw(s);
    r.gen_reward = total / static_cast<double>(generated.size());
    return r;
  }

  double pretrain_accuracy() const noexcept { return pretrain_accuracy_; }

 private:
  std::uint64_t seed(std::initializer_list<std::uint64_t> path) const {
    return derive_seed(config_.seed, path);
  }

  void record(Phase phase) {
    HistoryRecord r = evaluate();
    r.step = history_.size() + 1;
    r.phase = phase;
    if (config_.record_wall_clock) {
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    }
    history_.push_back(r);
  }

  void check_finite(const char* phase, std::size_t step) const {
    const auto& r = history_.back();
    if (!std::isfinite(r.d_loss) || (models_->d_prime && !std::isfinite(r.dprime_loss))) {
      throw TrainingDivergedError(phase, step);
    }
  }

  TrainConfig config_;
  LabeledCorpus train_, test_;
  EmbeddingTable embeddings_;
  std::optional<Models> models_;
  TrainingHistory history_;
  double pretrain_accuracy_ = 0.0;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
};

struct TrainResult {
  DiscriminatorParams best_d;
  TrainingHistory history;
  double best_accuracy = 0.0;
  std::size_t best_step = 0;       // history step of the best checkpoint
  std::size_t best_iteration = 0;  // adversarial iteration of the best checkpoint
  double pretrain_accuracy = 0.0;  // held-out D accuracy at the end of pretraining
  std::size_t iterations = 0;
  bool converged = false;
  std::optional<Models> final_models;
};

inline double trailing_std(const TrainingHistory& h, std::size_t window) {
  std::vector<double> acc;
  for (auto it = h.rbegin(); it != h.rend() && acc.size() < window; ++it) {
    if (it->phase == Phase::kAdversarial) acc.push_back(it->d_acc);
  }
  if (acc.size() < window) return std::numeric_limits<double>::infinity();
  double mean = 0.0;
  for (double a : acc) mean += a;
  mean /= static_cast<double>(acc.size());
  double var = 0.0;
  for (double a : acc) var += (a - mean) * (a - mean);
  return std::sqrt(var / static_cast<double>(acc.size()));
}

namespace detail {

inline std::string iteration_dir_name(std::size_t it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%04zu", it);
  return buf;
}

inline void write_iteration_checkpoint(const std::filesystem::path& dir, Models& m,
                                       const Vocabulary& vocab) {
  const auto sub = dir / iteration_dir_name(m.iteration);
  std::filesystem::create_directories(sub);
  save_generator(sub / "generator.ckpt", m.generator, vocab);
  save_discriminator(sub / "d.ckpt", m.d, vocab);
  if (m.d_prime) save_discriminator(sub / "d_prime.ckpt", *m.d_prime, vocab);
}

}  // namespace detail

// Runs the adversarial loop on an already pretrained trainer until the
// held-out D accuracy is stable (std over the last W adversarial
// evaluations below the tolerance) or max_iterations is reached. The
// returned D is the one with the best held-out accuracy among adversarial
// iterations (earliest on ties).
inline TrainResult run_adversarial(AdversarialTrainer& trainer,
                                   const std::filesystem::path& checkpoint_dir = {}) {
  const TrainConfig& cfg = trainer.config();
  TrainResult res;
  res.pretrain_accuracy = trainer.pretrain_accuracy();
  res.best_accuracy = -1.0;
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    trainer.adversarial_iteration();
    Models& m = trainer.models();
    const HistoryRecord& rec = trainer.history().back();
    if (!checkpoint_dir.empty()) detail::write_iteration_checkpoint(checkpoint_dir, m, *trainer.train_split().vocab);
    if (rec.d_acc > res.best_accuracy) {
      res.best_accuracy = rec.d_acc;
      res.best_d = m.d;
      res.best_step = rec.step;
      res.best_iteration = it;
      if (!checkpoint_dir.empty()) {
        std::ofstream best(checkpoint_dir / "best");
        if (!best) throw IoError("cannot write best pointer in " + checkpoint_dir.string());
        best << detail::iteration_dir_name(it) << "\n";
      }
    }
    res.iterations = it;
    if (trailing_std(trainer.history(), cfg.convergence_window) < cfg.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  if (cfg.max_iterations == 0) {
    res.best_d = trainer.models().d;
    res.best_accuracy = trainer.pretrain_accuracy();
  }
  res.history = trainer.history();
  res.final_models = trainer.models();
  return res;
}

inline TrainResult train(const TrainConfig& config, const LabeledCorpus& train_split,
                         const LabeledCorpus& test_split,
                         std::optional<EmbeddingTable> embeddings = std::nullopt,
                         const std::filesystem::path& checkpoint_dir = {}) {
  AdversarialTrainer trainer(config, train_split, test_split, std::move(embeddings));
  trainer.pretrain_all();
  return run_adversarial(trainer, checkpoint_dir);
}

// Single-discriminator variants: D' removed, reward D(S) alone, generator
// pretrained on truthful or deceptive reviews.
inline TrainResult train_ablation(TrainConfig config, const LabeledCorpus& train_split,
                                  const LabeledCorpus& test_split,
                                  std::optional<EmbeddingTable> embeddings = std::nullopt) {
  if (config.mode == TrainMode::kFull) {
    throw ContractError("train_ablation: mode must be a single-discriminator mode");
  }
  return train(config, train_split, test_split, std::move(embeddings));
}

}  // namespace fakegan
