#pragma once

// CNN sequence discriminator: embedding matrix -> convolution banks ->
// max-over-time pooling -> highway layer -> dropout -> sigmoid head.
// One architecture serves both roles (D and D').

#include <cmath>
#include <cstdint>
#include <limits>
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

// D: truthful (positive) vs deceptive or generated.
// D': dataset-deceptive (positive) vs generated.
enum class Role { kD, kDPrime };

inline const char* to_string(Role r) { return r == Role::kD ? "D" : "D'"; }

inline Label positive_label(Role r) { return r == Role::kD ? Label::kTruthful : Label::kDeceptive; }
inline Label negative_label(Role r) { return r == Role::kD ? Label::kDeceptive : Label::kGenerated; }

struct KernelSpec {
  std::size_t window = 3;
  std::size_t filters = 32;
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

struct DiscriminatorConfig {
  std::vector<KernelSpec> kernels{{2, 32}, {3, 32}, {4, 32}};
  std::size_t sequence_length = 16;
  double dropout = 0.25;
  double init_scale = 0.1;
  double highway_gate_bias = -2.0;
  Nonlinearity conv_activation = Nonlinearity::kTanh;
  Nonlinearity highway_activation = Nonlinearity::kRelu;
  bool train_embeddings = false;
};

struct DiscriminatorParams {
  Role role = Role::kD;
  std::size_t sequence_length = 0;
  double dropout = 0.25;
  Nonlinearity conv_activation = Nonlinearity::kTanh;
  Nonlinearity highway_activation = Nonlinearity::kRelu;
  bool train_embeddings = false;
  std::vector<KernelSpec> kernels;

  Array embedding;              // V x E
  std::vector<Array> conv_w;    // per kernel spec: filters x window x E
  std::vector<Array> conv_b;    // per kernel spec: filters
  Array hw_wt, hw_bt, hw_wh, hw_bh;  // F x F, F, F x F, F
  Array head_w;                 // F
  Array head_b;                 // 1

  std::size_t features() const {
    std::size_t f = 0;
    for (const auto& k : kernels) f += k.filters;
    return f;
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> refs{{"embedding", &embedding, train_embeddings}};
    for (std::size_t j = 0; j < kernels.size(); ++j) {
      refs.push_back({"conv" + std::to_string(j) + ".w", &conv_w[j], true});
      refs.push_back({"conv" + std::to_string(j) + ".b", &conv_b[j], true});
    }
    refs.push_back({"highway.wt", &hw_wt, true});
    refs.push_back({"highway.bt", &hw_bt, true});
    refs.push_back({"highway.wh", &hw_wh, true});
    refs.push_back({"highway.bh", &hw_bh, true});
    refs.push_back({"head.w", &head_w, true});
    refs.push_back({"head.b", &head_b, true});
    return refs;
  }
};

// Initial weights depend only on (config, seed), not on the role.
inline DiscriminatorParams make_discriminator(const EmbeddingTable& embeddings,
                                              const DiscriminatorConfig& config, Role role,
                                              std::uint64_t seed) {
  if (config.kernels.empty()) throw ContractError("make_discriminator: no kernels");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ContractError("make_discriminator: dropout must lie in [0, 1)");
  }
  DiscriminatorParams p;
  p.role = role;
  p.sequence_length = config.sequence_length;
  p.dropout = config.dropout;
  p.conv_activation = config.conv_activation;
  p.highway_activation = config.highway_activation;
  p.train_embeddings = config.train_embeddings;
  p.kernels = config.kernels;
  p.embedding = embeddings.matrix;
  const std::size_t e = embeddings.dim();
  Rng rng = Rng::stream(seed, {0xd15c});
  auto fill = [&](Array& a) {
    for (double& v : a.values()) v = config.init_scale * rng.normal();
  };
  for (const auto& k : config.kernels) {
    if (k.window == 0 || k.window > config.sequence_length || k.filters == 0) {
      throw DimensionError("make_discriminator: kernel window " + std::to_string(k.window) +
                           " invalid for sequence length " +
                           std::to_string(config.sequence_length));
    }
    p.conv_w.emplace_back(Shape{k.filters, k.window, e});
    fill(p.conv_w.back());
    p.conv_b.emplace_back(Shape{k.filters}, 0.0);
  }
  const std::size_t f = p.features();
  p.hw_wt = Array({f, f});
  p.hw_wh = Array({f, f});
  fill(p.hw_wt);
  fill(p.hw_wh);
  p.hw_bt = Array({f}, config.highway_gate_bias);
  p.hw_bh = Array({f}, 0.0);
  p.head_w = Array({f});
  fill(p.head_w);
  p.head_b = Array({1}, 0.0);
  return p;
}

namespace detail {

inline void check_input(const DiscriminatorParams& p, const TokenSequence& seq) {
  if (seq.ids.size() != p.sequence_length) {
    throw DimensionError("discriminator: sequence length " + std::to_string(seq.ids.size()) +
                         " != " + std::to_string(p.sequence_length));
  }
  for (TokenId id : seq.ids) {
    if (id >= p.embedding.dim(0)) throw LookupError("discriminator: token id out of range");
  }
}

// Maps a logit to a probability strictly inside (0, 1).
inline double open_unit(double logit) {
  double s = kernels::sigmoid(logit);
  if (s >= 1.0) s = std::nextafter(1.0, 0.0);
  if (s <= 0.0) s = std::numeric_limits<double>::denorm_min();
  return s;
}

}  // namespace detail

// Pre-sigmoid output without dropout (fast path).
inline double logit(const DiscriminatorParams& p, const TokenSequence& seq) {
  detail::check_input(p, seq);
  const std::size_t e = p.embedding.dim(1);
  const std::size_t len = p.sequence_length;
  std::vector<double> mat(len * e);
  for (std::size_t i = 0; i < len; ++i) {
    const auto r = p.embedding.row(seq.ids[i]);
    std::copy(r.begin(), r.end(), mat.begin() + static_cast<std::ptrdiff_t>(i * e));
  }
  const std::span<const double> mv(mat);
  std::vector<double> pooled;
  pooled.reserve(p.features());
  for (std::size_t j = 0; j < p.kernels.size(); ++j) {
    const std::size_t w = p.kernels[j].window, span_len = w * e, positions = len - w + 1;
    const auto& kw = p.conv_w[j];
    for (std::size_t f = 0; f < p.kernels[j].filters; ++f) {
      const auto k = kw.values().subspan(f * span_len, span_len);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < positions; ++i) {
        const double z = kernels::dot(k, mv.subspan(i * e, span_len)) + p.conv_b[j][f];
        best = std::max(best, kernels::activate(p.conv_activation, z));
      }
      pooled.push_back(best);
    }
  }
  std::vector<double> hw(pooled.size());
  kernels::highway(p.hw_wt.values(), p.hw_bt.values(), p.hw_wh.values(), p.hw_bh.values(),
                   p.highway_activation, pooled, hw);
  return kernels::dot(p.head_w.values(), hw) + p.head_b[0];
}

// Probability of the positive class for this instance's role. Deterministic;
// dropout is never applied here.
inline double score(const DiscriminatorParams& p, const TokenSequence& seq) {
  return detail::open_unit(logit(p, seq));
}

// score >= threshold maps to the role's positive class.
inline Label classify(const DiscriminatorParams& p, const TokenSequence& seq,
                      double threshold = 0.5) {
  return score(p, seq) >= threshold ? positive_label(p.role) : negative_label(p.role);
}

struct DiscriminatorVars {
  ad::Var embedding;
  std::vector<ad::Var> conv_w, conv_b;
  ad::HighwayVars highway;
  ad::Var head_w, head_b;
};

inline DiscriminatorVars bind(ad::Tape& tape, const DiscriminatorParams& p) {
  DiscriminatorVars v;
  v.embedding = tape.param(p.embedding, p.train_embeddings);
  for (std::size_t j = 0; j < p.kernels.size(); ++j) {
    v.conv_w.push_back(tape.param(p.conv_w[j]));
    v.conv_b.push_back(tape.param(p.conv_b[j]));
  }
  v.highway = {tape.param(p.hw_wt), tape.param(p.hw_bt), tape.param(p.hw_wh), tape.param(p.hw_bh)};
  v.head_w = tape.param(p.head_w);
  v.head_b = tape.param(p.head_b);
  return v;
}

// Recorded logit. `dropout_mask`, when given, multiplies the highway output
// (already scaled by 1 / keep probability).
inline ad::Var record_logit(ad::Tape& tape, const DiscriminatorVars& v,
                            const DiscriminatorParams& p, const TokenSequence& seq,
                            const Array* dropout_mask = nullptr) {
  detail::check_input(p, seq);
  ad::Var matrix = ad::gather_rows(v.embedding, {seq.ids.begin(), seq.ids.end()});
  std::vector<ad::Var> pooled;
  for (std::size_t j = 0; j < p.kernels.size(); ++j) {
    ad::Var fmap = ad::conv1d_valid(matrix, v.conv_w[j], v.conv_b[j], p.conv_activation);
    pooled.push_back(ad::max_over_time(fmap));
  }
  ad::Var features = ad::highway_layer(ad::concat(pooled), v.highway, p.highway_activation);
  if (dropout_mask) features = ad::mul(features, tape.constant(*dropout_mask));
  return ad::add(ad::dot(v.head_w, features), v.head_b);
}

inline Array dropout_mask(std::size_t n, double rate, Rng& rng) {
  Array m({n}, 1.0);
  if (rate <= 0.0) return m;
  const double keep = 1.0 - rate;
  for (double& v : m.values()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

// Mean binary cross-entropy over positives (target 1) and negatives
// (target 0). With an rng, dropout masks are drawn for every example.
inline ad::Var record_loss(ad::Tape& tape, const DiscriminatorVars& v,
                           const DiscriminatorParams& p,
                           const std::vector<const TokenSequence*>& positives,
                           const std::vector<const TokenSequence*>& negatives, Rng* dropout_rng) {
  std::vector<ad::Var> terms;
  for (int cls = 0; cls < 2; ++cls) {
    for (const TokenSequence* s : cls == 0 ? positives : negatives) {
      Array mask;
      const Array* mp = nullptr;
      if (dropout_rng && p.dropout > 0) {
        mask = dropout_mask(p.features(), p.dropout, *dropout_rng);
        mp = &mask;
      }
      terms.push_back(ad::bce_with_logits(record_logit(tape, v, p, *s, mp), cls == 0 ? 1.0 : 0.0));
    }
  }
  const double w = 1.0 / static_cast<double>(terms.size());
  return ad::weighted_sum(terms, std::vector<double>(terms.size(), w));
}

// Deterministic (no dropout) mean cross-entropy.
inline double batch_loss(const DiscriminatorParams& p, const std::vector<TokenSequence>& positives,
                         const std::vector<TokenSequence>& negatives) {
  double s = 0.0;
  for (const auto& x : positives) s += kernels::softplus(-logit(p, x));
  for (const auto& x : negatives) s += kernels::softplus(logit(p, x));
  return s / static_cast<double>(positives.size() + negatives.size());
}

inline std::vector<Array> gradients(const ad::Tape& tape, DiscriminatorParams& p) {
  std::vector<Array> g;
  for (const TensorRef& r : p.tensors()) {
    if (r.trainable) g.push_back(tape.grad_of(*r.array));
  }
  return g;
}

// One Adam step on the mean cross-entropy of the given batch, dropout on.
// Returns the (pre-step) loss.
inline double train_step(DiscriminatorParams& p, Role role,
                         const std::vector<const TokenSequence*>& positives,
                         const std::vector<const TokenSequence*>& negatives, Adam& optimizer,
                         Rng& rng) {
  if (role != p.role) throw ContractError("train_step: role does not match discriminator");
  if (positives.empty() || negatives.empty()) {
    throw ContractError("train_step: both batches must be nonempty");
  }
  ad::Tape tape;
  DiscriminatorVars v = bind(tape, p);
  ad::Var loss = record_loss(tape, v, p, positives, negatives, &rng);
  const double lv = loss.value()[0];
  if (!std::isfinite(lv)) throw TrainingDivergedError(std::string("discriminator ") + to_string(role), optimizer.steps() + 1);
  tape.backward(loss);
  optimizer.step(trainable_arrays(p.tensors()), gradients(tape, p));
  return lv;
}

inline double train_step(DiscriminatorParams& p, Role role,
                         const std::vector<TokenSequence>& positives,
                         const std::vector<TokenSequence>& negatives, Adam& optimizer, Rng& rng) {
  std::vector<const TokenSequence*> pp, nn;
  for (const auto& s : positives) pp.push_back(&s);
  for (const auto& s : negatives) nn.push_back(&s);
  return train_step(p, role, pp, nn, optimizer, rng);
}

// One class-balanced pass: the larger pool is down-sampled (fresh random
// subset every call) to the size of the smaller, then both are dealt into
// minibatches holding batch/2 examples of each class. Returns the mean
// minibatch loss.
inline double train_epoch(DiscriminatorParams& p, Role role,
                          const std::vector<const TokenSequence*>& positives,
                          const std::vector<const TokenSequence*>& negatives, Adam& optimizer,
                          std::size_t batch, Rng& rng) {
  if (positives.empty() || negatives.empty()) {
    throw ContractError("train_epoch: both pools must be nonempty");
  }
  const std::size_t n = std::min(positives.size(), negatives.size());
  auto pos = positives, neg = negatives;
  rng.shuffle(pos.begin(), pos.end());
  rng.shuffle(neg.begin(), neg.end());
  pos.resize(n);
  neg.resize(n);
  const std::size_t half = std::max<std::size_t>(1, batch / 2);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += half) {
    const std::size_t end = std::min(n, start + half);
    std::vector<const TokenSequence*> bp(pos.begin() + static_cast<std::ptrdiff_t>(start),
                                         pos.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<const TokenSequence*> bn(neg.begin() + static_cast<std::ptrdiff_t>(start),
                                         neg.begin() + static_cast<std::ptrdiff_t>(end));
    total += train_step(p, role, bp, bn, optimizer, rng);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

inline std::vector<const TokenSequence*> pointers(const std::vector<TokenSequence>& v) {
  std::vector<const TokenSequence*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

// Fraction of positives scored >= 0.5 plus negatives scored < 0.5.
inline double accuracy(const DiscriminatorParams& p, const std::vector<TokenSequence>& positives,
                       const std::vector<TokenSequence>& negatives) {
  std::size_t correct = 0;
  for (const auto& s : positives) correct += score(p, s) >= 0.5;
  for (const auto& s : negatives) correct += score(p, s) < 0.5;
  return static_cast<double>(correct) / static_cast<double>(positives.size() + negatives.size());
}

struct PretrainReport {
  std::vector<double> losses;  // per step
};

// `steps` class-balanced epochs of train_epoch.
inline PretrainReport pretrain(DiscriminatorParams& p, Role role,
                               const std::vector<TokenSequence>& positives,
                               const std::vector<TokenSequence>& negatives, std::size_t steps,
                               Adam& optimizer, std::size_t batch, std::uint64_t seed) {
  PretrainReport r;
  const auto pp = pointers(positives), nn = pointers(negatives);
  for (std::size_t s = 0; s < steps; ++s) {
    Rng rng = Rng::stream(seed, {0x9e7, s});
    r.losses.push_back(train_epoch(p, role, pp, nn, optimizer, batch, rng));
  }
  return r;
}

}  // namespace fakegan
