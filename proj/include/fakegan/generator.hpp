#pragma once

// LSTM policy generator: next-token distributions, autoregressive sampling,
// maximum-likelihood pretraining and policy-gradient updates.

#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "fakegan/array.hpp"
#include "fakegan/autodiff.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/kernels.hpp"
#include "fakegan/optim.hpp"
#include "fakegan/random.hpp"
#include "fakegan/text.hpp"

namespace fakegan {

struct GeneratorConfig {
  std::size_t hidden = 64;
  std::size_t sequence_length = 16;
  double init_scale = 0.1;
  bool train_embeddings = false;
  // Once END is emitted the remaining positions are forced to END.
  bool end_terminates = true;
};

struct GeneratorParams {
  std::size_t vocab_size = 0;  // includes START
  std::size_t hidden = 0;
  std::size_t sequence_length = 0;
  bool train_embeddings = false;
  bool end_terminates = true;

  Array embedding;  // vocab_size x E
  Array wx;         // 4H x E
  Array wh;         // 4H x H
  Array b;          // 4H
  Array out_w;      // (vocab_size - 1) x H
  Array out_b;      // vocab_size - 1

  TokenId start_id() const { return static_cast<TokenId>(vocab_size - 1); }
  std::size_t outputs() const { return vocab_size - 1; }
  std::size_t embedding_dim() const { return embedding.dim(1); }

  std::vector<TensorRef> tensors() {
    return {{"embedding", &embedding, train_embeddings},
            {"lstm.wx", &wx, true},
            {"lstm.wh", &wh, true},
            {"lstm.b", &b, true},
            {"out.w", &out_w, true},
            {"out.b", &out_b, true}};
  }
};

inline GeneratorParams make_generator(const EmbeddingTable& embeddings,
                                      const GeneratorConfig& config, std::uint64_t seed) {
  if (embeddings.rows() < 3) throw ContractError("make_generator: vocabulary too small");
  if (config.hidden == 0 || config.sequence_length == 0) {
    throw ContractError("make_generator: hidden size and sequence length must be positive");
  }
  GeneratorParams p;
  p.vocab_size = embeddings.rows();
  p.hidden = config.hidden;
  p.sequence_length = config.sequence_length;
  p.train_embeddings = config.train_embeddings;
  p.end_terminates = config.end_terminates;
  const std::size_t e = embeddings.dim(), h = config.hidden;
  p.embedding = embeddings.matrix;
  p.wx = Array({4 * h, e});
  p.wh = Array({4 * h, h});
  p.b = Array({4 * h}, 0.0);
  p.out_w = Array({p.outputs(), h});
  p.out_b = Array({p.outputs()}, 0.0);
  Rng rng = Rng::stream(seed, {0x6e4});
  for (Array* a : {&p.wx, &p.wh, &p.out_w}) {
    for (double& v : a->values()) v = config.init_scale * rng.normal();
  }
  return p;
}

struct GeneratorState {
  std::vector<double> h;
  std::vector<double> c;
  std::size_t t = 0;  // tokens consumed so far
  bool ended = false;
};

inline GeneratorState initial_state(const GeneratorParams& p) {
  return GeneratorState{std::vector<double>(p.hidden, 0.0), std::vector<double>(p.hidden, 0.0), 0,
                        false};
}

struct TokenDistribution {
  std::vector<double> probs;  // indexed by token id, START excluded
  GeneratorState state;       // state after consuming prev_token
};

namespace detail {

inline void advance(const GeneratorParams& p, GeneratorState& s, TokenId token,
                    std::vector<double>& scratch) {
  if (token >= p.vocab_size) throw LookupError("generator: token id out of range");
  std::vector<double> h(p.hidden), c(p.hidden);
  kernels::lstm_step(p.wx.values(), p.wh.values(), p.b.values(), p.hidden, p.embedding.row(token),
                     s.h, s.c, h, c, scratch);
  s.h = std::move(h);
  s.c = std::move(c);
}

inline void output_logits(const GeneratorParams& p, const GeneratorState& s,
                          std::vector<double>& logits) {
  logits.assign(p.out_b.storage().begin(), p.out_b.storage().end());
  kernels::matvec_add(p.out_w.values(), p.outputs(), p.hidden, s.h, logits);
}

}  // namespace detail

// softmax(c + V h_t) after feeding prev_token (START at t = 0) into the
// recurrence. The returned state has t advanced by one.
inline TokenDistribution next_token_distribution(const GeneratorParams& p,
                                                 const GeneratorState& state, TokenId prev_token) {
  if (state.t >= p.sequence_length) {
    throw SequenceExhaustedError("next_token_distribution: sequence already has " +
                                 std::to_string(p.sequence_length) + " tokens");
  }
  TokenDistribution out{{}, state};
  std::vector<double> scratch, logits;
  detail::advance(p, out.state, prev_token, scratch);
  detail::output_logits(p, out.state, logits);
  out.probs = kernels::softmax(logits);
  out.state.t = state.t + 1;
  return out;
}

// Incremental sampler/scorer over the fast (tape-free) path. Holds the
// state after consuming the tokens emitted so far.
class GeneratorCursor {
 public:
  explicit GeneratorCursor(const GeneratorParams& p)
      : p_(&p), state_(initial_state(p)), prev_(p.start_id()) {}

  const GeneratorState& state() const noexcept { return state_; }
  std::size_t position() const noexcept { return state_.t; }
  bool ended() const noexcept { return state_.ended; }

  // Distribution for the token at position() given everything consumed.
  const std::vector<double>& distribution() {
    if (!fresh_) {
      detail::advance(*p_, state_, prev_, scratch_);
      detail::output_logits(*p_, state_, logits_);
      probs_ = kernels::softmax(logits_);
      fresh_ = true;
    }
    return probs_;
  }

  const std::vector<double>& logits() {
    distribution();
    return logits_;
  }

  // Consumes `token` as the output at position().
  void push(TokenId token) {
    if (state_.t >= p_->sequence_length) {
      throw SequenceExhaustedError("generator: sequence already complete");
    }
    if (!state_.ended) distribution();
    prev_ = token;
    fresh_ = false;
    ++state_.t;
    if (token == kEndId && p_->end_terminates) state_.ended = true;
  }

  TokenId sample(Rng& rng) {
    if (state_.ended) return kEndId;
    return static_cast<TokenId>(rng.categorical(distribution()));
  }

 private:
  const GeneratorParams* p_;
  GeneratorState state_;
  TokenId prev_ = 0;
  bool fresh_ = false;
  std::vector<double> scratch_, logits_, probs_;
};

inline GeneratorCursor start_cursor(const GeneratorParams& p) { return GeneratorCursor(p); }

inline std::size_t first_end_or(const std::vector<TokenId>& ids, std::size_t fallback) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kEndId) return i;
  }
  return fallback;
}

inline TokenSequence finish_sequence(std::vector<TokenId> ids) {
  TokenSequence seq;
  const std::size_t n = ids.size();
  seq.original_length = std::max<std::size_t>(1, first_end_or(ids, n));
  seq.ids = std::move(ids);
  return seq;
}

// Continues a cursor to full length.
inline TokenSequence complete_sequence(GeneratorCursor cursor, std::vector<TokenId> prefix,
                                       std::size_t length, Rng& rng) {
  while (prefix.size() < length) {
    const TokenId tok = cursor.sample(rng);
    prefix.push_back(tok);
    cursor.push(tok);
  }
  return finish_sequence(std::move(prefix));
}

inline TokenSequence sample_sequence(const GeneratorParams& p, Rng& rng) {
  return complete_sequence(start_cursor(p), {}, p.sequence_length, rng);
}

inline std::vector<TokenSequence> sample_many(const GeneratorParams& p, std::size_t count,
                                              std::uint64_t seed) {
  std::vector<TokenSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::stream(seed, {0x5a3, i});
    out.push_back(sample_sequence(p, rng));
  }
  return out;
}

// True when the sequence can be produced by the sampler (no START output,
// only END after an END when END terminates).
inline bool reachable(const GeneratorParams& p, const TokenSequence& seq) {
  bool ended = false;
  for (TokenId id : seq.ids) {
    if (id >= p.outputs()) return false;
    if (ended && id != kEndId) return false;
    if (id == kEndId && p.end_terminates) ended = true;
  }
  return seq.ids.size() == p.sequence_length;
}

// Positions whose token is an actual policy decision (positions after an
// END are forced when END terminates).
inline std::size_t decision_count(const GeneratorParams& p, const TokenSequence& seq) {
  if (!p.end_terminates) return seq.ids.size();
  const std::size_t e = first_end_or(seq.ids, seq.ids.size());
  return std::min(seq.ids.size(), e + 1);
}

inline void check_sequence(const GeneratorParams& p, const TokenSequence& seq) {
  if (seq.ids.size() != p.sequence_length) {
    throw DimensionError("generator: sequence length " + std::to_string(seq.ids.size()) +
                         " != " + std::to_string(p.sequence_length));
  }
  if (!reachable(p, seq)) {
    throw InfiniteLossError("generator: sequence has zero probability under the policy");
  }
}

// -Σ_t log G(S_t | S_{1:t-1}) over decision positions.
inline double sequence_nll(const GeneratorParams& p, const TokenSequence& seq) {
  check_sequence(p, seq);
  GeneratorCursor cur = start_cursor(p);
  double nll = 0.0;
  const std::size_t n = decision_count(p, seq);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& logits = cur.logits();
    nll -= logits[seq.ids[t]] - kernels::log_sum_exp(logits);
    cur.push(seq.ids[t]);
  }
  if (!std::isfinite(nll)) throw InfiniteLossError("sequence_nll: non-finite loss");
  return nll;
}

// Parameters bound on a tape.
struct GeneratorVars {
  ad::Var embedding;
  ad::LstmVars lstm;
  ad::Var out_w, out_b;
};

inline GeneratorVars bind(ad::Tape& tape, const GeneratorParams& p) {
  return GeneratorVars{tape.param(p.embedding, p.train_embeddings),
                       {tape.param(p.wx), tape.param(p.wh), tape.param(p.b)},
                       tape.param(p.out_w),
                       tape.param(p.out_b)};
}

// Recorded log G(S_t | S_{1:t-1}) for every decision position.
inline std::vector<ad::Var> record_log_probs(ad::Tape& tape, const GeneratorVars& v,
                                             const GeneratorParams& p, const TokenSequence& seq) {
  check_sequence(p, seq);
  ad::Var h = tape.constant(Array({p.hidden}, 0.0));
  ad::Var c = tape.constant(Array({p.hidden}, 0.0));
  TokenId prev = p.start_id();
  std::vector<ad::Var> out;
  const std::size_t n = decision_count(p, seq);
  for (std::size_t t = 0; t < n; ++t) {
    ad::Var x = ad::row(v.embedding, prev);
    std::tie(h, c) = ad::lstm_cell(x, h, c, v.lstm);
    ad::Var logits = ad::add(ad::matvec(v.out_w, h), v.out_b);
    out.push_back(ad::log_softmax_at(logits, seq.ids[t]));
    prev = seq.ids[t];
  }
  return out;
}

inline ad::Var record_nll(ad::Tape& tape, const GeneratorVars& v, const GeneratorParams& p,
                          const TokenSequence& seq) {
  auto terms = record_log_probs(tape, v, p, seq);
  return ad::weighted_sum(terms, std::vector<double>(terms.size(), -1.0));
}

inline std::vector<Array> gradients(const ad::Tape& tape, GeneratorParams& p) {
  std::vector<Array> g;
  for (const TensorRef& r : p.tensors()) {
    if (r.trainable) g.push_back(tape.grad_of(*r.array));
  }
  return g;
}

struct MleReport {
  double initial_nll = 0.0;
  double final_nll = 0.0;
  std::vector<double> epoch_nll;  // mean NLL after each step
};

inline double mean_nll(const GeneratorParams& p, const std::vector<TokenSequence>& data) {
  double s = 0.0;
  for (const auto& seq : data) s += sequence_nll(p, seq);
  return s / static_cast<double>(data.size());
}

// Maximum-likelihood pretraining. One step is one shuffled pass over `data`
// in minibatches of `batch` sequences, each minibatch an Adam update on the
// mean NLL.
inline MleReport mle_pretrain(GeneratorParams& p, const std::vector<TokenSequence>& data,
                              std::size_t steps, double rate, std::size_t batch,
                              std::uint64_t seed) {
  if (data.empty()) throw EmptyCorpusError("mle_pretrain: no training sequences");
  if (batch == 0) throw ContractError("mle_pretrain: batch must be positive");
  MleReport report;
  report.initial_nll = mean_nll(p, data);
  Adam adam(rate);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto params = trainable_arrays(p.tensors());
  for (std::size_t step = 0; step < steps; ++step) {
    Rng rng = Rng::stream(seed, {0x31e, step});
    rng.shuffle(order.begin(), order.end());
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      ad::Tape tape;
      GeneratorVars v = bind(tape, p);
      std::vector<ad::Var> losses;
      for (std::size_t i = start; i < end; ++i) losses.push_back(record_nll(tape, v, p, data[order[i]]));
      const double w = 1.0 / static_cast<double>(end - start);
      ad::Var loss = ad::weighted_sum(losses, std::vector<double>(losses.size(), w));
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingDivergedError("generator-mle", step + 1);
      epoch_sum += lv * static_cast<double>(end - start);
      tape.backward(loss);
      adam.step(params, gradients(tape, p));
    }
    report.epoch_nll.push_back(epoch_sum / static_cast<double>(data.size()));
  }
  report.final_nll = mean_nll(p, data);
  if (!std::isfinite(report.final_nll)) throw TrainingDivergedError("generator-mle", steps);
  return report;
}

struct Episode {
  TokenSequence sequence;
  std::vector<double> action_values;  // one per position
};

// (1/B) Σ_episodes Σ_t (A_t - baseline) ∇ log G(S_t | S_{1:t-1}).
inline std::vector<Array> policy_gradient(GeneratorParams& p, const std::vector<Episode>& episodes,
                                          double baseline = 0.0) {
  if (episodes.empty()) throw ContractError("policy_gradient: no episodes");
  ad::Tape tape;
  GeneratorVars v = bind(tape, p);
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  const double inv_b = 1.0 / static_cast<double>(episodes.size());
  for (const Episode& ep : episodes) {
    if (ep.action_values.size() != p.sequence_length) {
      throw ContractError("policy_gradient: episode has " +
                          std::to_string(ep.action_values.size()) + " action values, expected " +
                          std::to_string(p.sequence_length));
    }
    auto lp = record_log_probs(tape, v, p, ep.sequence);
    for (std::size_t t = 0; t < lp.size(); ++t) {
      terms.push_back(lp[t]);
      weights.push_back((ep.action_values[t] - baseline) * inv_b);
    }
  }
  ad::Var objective = ad::weighted_sum(terms, weights);
  tape.backward(objective);
  return gradients(tape, p);
}

struct PolicyUpdateReport {
  double gradient_norm = 0.0;
  bool clipped = false;
};

// Gradient ascent α ← α + λ ∇J with global-norm clipping at clip_norm.
inline PolicyUpdateReport policy_gradient_update(GeneratorParams& p,
                                                 const std::vector<Episode>& episodes,
                                                 double rate, double clip_norm = 5.0,
                                                 bool mean_baseline = false) {
  double baseline = 0.0;
  if (mean_baseline) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& ep : episodes) {
      for (double a : ep.action_values) {
        s += a;
        ++n;
      }
    }
    baseline = n ? s / static_cast<double>(n) : 0.0;
  }
  auto grads = policy_gradient(p, episodes, baseline);
  PolicyUpdateReport r;
  r.gradient_norm = clip_by_global_norm(grads, clip_norm);
  r.clipped = clip_norm > 0 && r.gradient_norm > clip_norm;
  apply_step(trainable_arrays(p.tensors()), grads, rate);
  return r;
}

}  // namespace fakegan
