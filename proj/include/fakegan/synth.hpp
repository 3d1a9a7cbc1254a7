#pragma once

// Synthetic ground truth for desk-scale verification: paired order-1 Markov
// token sources with an exact Bayes classifier, and enumeration oracles for
// the policy gradient and the rollout action value.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakegan/array.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/random.hpp"
#include "fakegan/rollout.hpp"
#include "fakegan/text.hpp"

namespace fakegan {

struct MarkovSource {
  std::size_t vocab_size = 0;
  std::size_t length = 0;
  std::vector<double> initial;  // vocab_size
  Array transition;             // vocab_size x vocab_size, row-stochastic

  void validate() const {
    if (vocab_size == 0 || length == 0) throw ContractError("MarkovSource: empty source");
    if (initial.size() != vocab_size) throw DimensionError("MarkovSource: initial size");
    require_shape(transition, {vocab_size, vocab_size}, "MarkovSource transition");
    auto check_row = [](std::span<const double> row, const char* what) {
      double s = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) throw ContractError(std::string("MarkovSource: negative entry in ") + what);
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) {
        throw ContractError(std::string("MarkovSource: ") + what + " does not sum to 1");
      }
    };
    check_row(initial, "initial distribution");
    for (std::size_t r = 0; r < vocab_size; ++r) check_row(transition.row(r), "transition row");
  }

  double log_likelihood(std::span<const std::size_t> symbols) const {
    if (symbols.empty()) return 0.0;
    double ll = std::log(initial[symbols[0]]);
    for (std::size_t i = 1; i < symbols.size(); ++i) {
      ll += std::log(transition.at(symbols[i - 1], symbols[i]));
    }
    return ll;
  }

  std::vector<std::size_t> sample(Rng& rng) const {
    std::vector<std::size_t> out;
    out.reserve(length);
    out.push_back(rng.categorical(initial));
    while (out.size() < length) out.push_back(rng.categorical(transition.row(out.back())));
    return out;
  }

  // Exact entropy (nats) of a whole length-L sequence:
  // H(X_1) + Σ_t Σ_a P(X_{t-1} = a) H(row a).
  double sequence_entropy() const {
    auto h = [](std::span<const double> p) {
      double s = 0.0;
      for (double v : p) {
        if (v > 0) s -= v * std::log(v);
      }
      return s;
    };
    std::vector<double> row_h(vocab_size);
    for (std::size_t a = 0; a < vocab_size; ++a) row_h[a] = h(transition.row(a));
    double total = h(initial);
    std::vector<double> marg = initial;
    for (std::size_t t = 1; t < length; ++t) {
      std::vector<double> next(vocab_size, 0.0);
      for (std::size_t a = 0; a < vocab_size; ++a) {
        total += marg[a] * row_h[a];
        for (std::size_t b = 0; b < vocab_size; ++b) next[b] += marg[a] * transition.at(a, b);
      }
      marg = std::move(next);
    }
    return total;
  }
};

struct SourcePair {
  MarkovSource truthful;
  MarkovSource deceptive;
  double prior = 0.5;

  std::size_t vocab_size() const { return truthful.vocab_size; }
  std::size_t length() const { return truthful.length; }

  void validate() const {
    truthful.validate();
    deceptive.validate();
    if (truthful.vocab_size != deceptive.vocab_size || truthful.length != deceptive.length) {
      throw ContractError("SourcePair: sources disagree on vocabulary size or length");
    }
  }
};

// Tokens "s0" .. "s{V-1}"; symbol j has id j + 2.
inline std::shared_ptr<const Vocabulary> synthetic_vocabulary(std::size_t symbols) {
  std::vector<std::string> words;
  for (std::size_t j = 0; j < symbols; ++j) words.push_back("s" + std::to_string(j));
  return std::make_shared<const Vocabulary>(words);
}

inline TokenId symbol_to_id(std::size_t symbol) { return static_cast<TokenId>(symbol + 2); }

// Symbols of the non-padded part of a synthetic sequence.
inline std::vector<std::size_t> to_symbols(const SourcePair& pair, const TokenSequence& seq) {
  if (seq.ids.size() < pair.length()) throw ContractError("synthetic sequence too short");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pair.length(); ++i) {
    const TokenId id = seq.ids[i];
    if (id < 2 || id >= pair.vocab_size() + 2) {
      throw ContractError("token id " + std::to_string(id) + " outside the source vocabulary");
    }
    out.push_back(id - 2);
  }
  return out;
}

inline TokenSequence from_symbols(const std::vector<std::size_t>& symbols, std::size_t length) {
  std::vector<TokenId> ids;
  for (std::size_t s : symbols) ids.push_back(symbol_to_id(s));
  return pad_sequence(std::move(ids), length);
}

// n sequences per class, END-padded to `length` (>= the source length).
inline LabeledCorpus sample_corpus(const SourcePair& pair, std::size_t n_per_class,
                                   std::uint64_t seed, std::size_t length = 0) {
  pair.validate();
  if (n_per_class < 1) throw ContractError("sample_corpus: n must be at least 1");
  if (length == 0) length = pair.length();
  if (length < pair.length()) throw ContractError("sample_corpus: length below source length");
  LabeledCorpus c;
  c.vocab = synthetic_vocabulary(pair.vocab_size());
  c.sequence_length = length;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    Rng rt = Rng::stream(seed, {0x7, i});
    c.truthful.push_back(from_symbols(pair.truthful.sample(rt), length));
    Rng rd = Rng::stream(seed, {0xd, i});
    c.deceptive.push_back(from_symbols(pair.deceptive.sample(rd), length));
  }
  return c;
}

// Higher exact log-likelihood wins; ties go to truthful.
inline Label bayes_classify(const SourcePair& pair, const TokenSequence& seq) {
  const auto sym = to_symbols(pair, seq);
  const double lt = pair.truthful.log_likelihood(sym) + std::log(pair.prior);
  const double ld = pair.deceptive.log_likelihood(sym) + std::log(1.0 - pair.prior);
  return ld > lt ? Label::kDeceptive : Label::kTruthful;
}

// Accuracy of bayes_classify on a fresh balanced sample of n_eval sequences.
inline double bayes_accuracy(const SourcePair& pair, std::size_t n_eval, std::uint64_t seed) {
  if (n_eval < 1000) throw ContractError("bayes_accuracy: n_eval must be at least 1000");
  const LabeledCorpus c = sample_corpus(pair, n_eval / 2, seed);
  std::size_t correct = 0;
  for (const auto& s : c.truthful) correct += bayes_classify(pair, s) == Label::kTruthful;
  for (const auto& s : c.deceptive) correct += bayes_classify(pair, s) == Label::kDeceptive;
  return static_cast<double>(correct) / static_cast<double>(c.size());
}

// ---------------------------------------------------------------------------
// Desk-scale pair

// Both classes share a random order-1 chain over `symbols` tokens. The
// deceptive chain moves `marker_mass` of every row onto a few marker
// symbols, which the truthful chain emits only with total mass
// `truthful_marker_mass`.
inline SourcePair make_marker_pair(std::size_t symbols, std::size_t length, std::size_t markers,
                                   double marker_mass, double truthful_marker_mass,
                                   std::uint64_t seed) {
  if (markers == 0 || markers >= symbols) throw ContractError("make_marker_pair: bad marker count");
  Rng rng = Rng::stream(seed, {0x5a1});
  const std::size_t plain = symbols - markers;
  auto base_row = [&]() {
    std::vector<double> w(plain);
    double s = 0.0;
    for (double& v : w) {
      const double g = rng.normal();
      v = std::exp(1.5 * g);
      s += v;
    }
    for (double& v : w) v /= s;
    return w;
  };
  auto make = [&](const std::vector<std::vector<double>>& rows, double mmass) {
    MarkovSource m;
    m.vocab_size = symbols;
    m.length = length;
    m.transition = Array({symbols, symbols});
    auto fill = [&](std::span<double> out, const std::vector<double>& base) {
      for (std::size_t j = 0; j < plain; ++j) out[j] = (1.0 - mmass) * base[j];
      for (std::size_t j = plain; j < symbols; ++j) out[j] = mmass / static_cast<double>(markers);
      double s = 0.0;
      for (double v : out) s += v;
      for (double& v : out) v /= s;
    };
    m.initial.assign(symbols, 0.0);
    fill(m.initial, rows[symbols]);
    for (std::size_t r = 0; r < symbols; ++r) fill(m.transition.row(r), rows[r]);
    return m;
  };
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r <= symbols; ++r) rows.push_back(base_row());
  SourcePair pair{make(rows, truthful_marker_mass), make(rows, marker_mass), 0.5};
  pair.validate();
  return pair;
}

inline SourcePair default_desk_pair() { return make_marker_pair(20, 16, 3, 0.15, 0.01, 20180601); }

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const MarkovSource& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.vocab_size; ++r) {
    rows.push_back(std::vector<double>(m.transition.row(r).begin(), m.transition.row(r).end()));
  }
  return {{"initial", m.initial}, {"transition", rows}};
}

inline nlohmann::json to_json(const SourcePair& p) {
  return {{"vocab_size", p.vocab_size()},
          {"length", p.length()},
          {"prior", p.prior},
          {"truthful", to_json(p.truthful)},
          {"deceptive", to_json(p.deceptive)}};
}

inline SourcePair source_pair_from_json(const nlohmann::json& j) {
  try {
    const std::size_t v = j.at("vocab_size").get<std::size_t>();
    const std::size_t len = j.at("length").get<std::size_t>();
    auto source = [&](const nlohmann::json& s) {
      MarkovSource m;
      m.vocab_size = v;
      m.length = len;
      m.initial = s.at("initial").get<std::vector<double>>();
      std::vector<double> flat;
      for (const auto& r : s.at("transition")) {
        auto row = r.get<std::vector<double>>();
        flat.insert(flat.end(), row.begin(), row.end());
      }
      m.transition = Array({v, v}, std::move(flat));
      return m;
    };
    SourcePair p{source(j.at("truthful")), source(j.at("deceptive")), j.value("prior", 0.5)};
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("source pair JSON: ") + e.what());
  }
}

inline void save_source_pair(const SourcePair& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(p).dump(1) << "\n";
}

inline SourcePair load_source_pair(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return source_pair_from_json(j);
}

// ---------------------------------------------------------------------------
// Enumeration oracles

inline constexpr std::size_t kOracleStateCap = 10000;

namespace detail {

// Calls visit(seq) for every token sequence of `count` emittable tokens
// appended to `prefix`.
inline void enumerate_suffixes(std::size_t outputs, std::size_t count,
                               std::vector<TokenId>& prefix,
                               const std::function<void(const std::vector<TokenId>&)>& visit) {
  if (count == 0) {
    visit(prefix);
    return;
  }
  for (std::size_t tok = 0; tok < outputs; ++tok) {
    prefix.push_back(static_cast<TokenId>(tok));
    enumerate_suffixes(outputs, count - 1, prefix, visit);
    prefix.pop_back();
  }
}

inline void check_state_space(std::size_t outputs, std::size_t count) {
  double states = std::pow(static_cast<double>(outputs), static_cast<double>(count));
  if (states > static_cast<double>(kOracleStateCap)) {
    throw ContractError("oracle: " + std::to_string(static_cast<long long>(states)) +
                        " sequences exceed the enumeration cap");
  }
}

}  // namespace detail

// Exact ∇J = Σ_S P(S) R(S) ∇ log P(S) over every sequence the generator can
// emit, with P and ∇ log P from the generator's own forward/backward.
// Gradients are returned in GeneratorParams::tensors() order (trainable
// tensors only).
inline std::vector<Array> exact_policy_gradient(
    GeneratorParams& params, const std::function<double(const TokenSequence&)>& reward) {
  const std::size_t len = params.sequence_length;
  detail::check_state_space(params.outputs(), len);
  std::vector<Array> total;
  for (const TensorRef& r : params.tensors()) {
    if (r.trainable) total.emplace_back(r.array->shape(), 0.0);
  }
  std::vector<TokenId> buf;
  detail::enumerate_suffixes(params.outputs(), len, buf, [&](const std::vector<TokenId>& ids) {
    const TokenSequence seq = finish_sequence(ids);
    if (!reachable(params, seq)) return;
    const double prob = std::exp(-sequence_nll(params, seq));
    const double weight = prob * reward(seq);
    if (weight == 0.0) return;
    ad::Tape tape;
    GeneratorVars v = bind(tape, params);
    auto terms = record_log_probs(tape, v, params, seq);
    ad::Var log_p = ad::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
    tape.backward(log_p);
    auto g = gradients(tape, params);
    for (std::size_t k = 0; k < g.size(); ++k) {
      for (std::size_t i = 0; i < g[k].size(); ++i) total[k][i] += weight * g[k][i];
    }
  });
  return total;
}

// Σ_suffix P(suffix | prefix) R(prefix ++ suffix) under the rollout policy.
inline double exact_action_value(std::span<const TokenId> prefix, const RolloutPolicy& policy,
                                 const std::function<double(const TokenSequence&)>& reward) {
  const GeneratorParams& p = policy.params();
  const std::size_t t = prefix.size();
  detail::check_prefix(p, t, 1);
  if (t == p.sequence_length) return reward(finish_sequence({prefix.begin(), prefix.end()}));
  detail::check_state_space(p.outputs(), p.sequence_length - t);
  double total = 0.0;
  // Depth-first over suffixes, carrying the cursor and path probability.
  std::function<void(GeneratorCursor, std::vector<TokenId>&, double)> walk =
      [&](GeneratorCursor cur, std::vector<TokenId>& ids, double prob) {
        if (ids.size() == p.sequence_length) {
          total += prob * reward(finish_sequence(ids));
          return;
        }
        if (cur.ended()) {
          ids.push_back(kEndId);
          cur.push(kEndId);
          walk(cur, ids, prob);
          ids.pop_back();
          return;
        }
        const std::vector<double> dist = cur.distribution();
        for (std::size_t tok = 0; tok < dist.size(); ++tok) {
          if (dist[tok] == 0.0) continue;
          GeneratorCursor next = cur;
          next.push(static_cast<TokenId>(tok));
          ids.push_back(static_cast<TokenId>(tok));
          walk(next, ids, prob * dist[tok]);
          ids.pop_back();
        }
      };
  std::vector<TokenId> ids(prefix.begin(), prefix.end());
  walk(detail::cursor_after(p, prefix), ids, 1.0);
  return total;
}

inline double exact_action_value(std::span<const TokenId> prefix, const RolloutPolicy& policy,
                                 const DiscriminatorParams& d, const DiscriminatorParams& d_prime) {
  const Reward r{&d, &d_prime};
  return exact_action_value(prefix, policy, [&](const TokenSequence& s) { return r(s); });
}

}  // namespace fakegan
