#pragma once

// N-time Monte Carlo search with a frozen rollout policy and per-timestep
// action-value estimation.
//
// Seeding contract: rollout i of the estimate at prefix length t draws from
// Rng::stream(seed, {t, i}), so the schedule (threads, order) never changes
// a result.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <thread>
#include <vector>

#include "fakegan/discriminator.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/random.hpp"

namespace fakegan {

class RolloutPolicy {
 public:
  RolloutPolicy() = default;

  const GeneratorParams& params() const { return *params_; }
  std::uint64_t version() const noexcept { return version_; }
  bool valid() const noexcept { return params_ != nullptr; }

 private:
  friend RolloutPolicy snapshot(const GeneratorParams&, std::uint64_t);
  std::shared_ptr<const GeneratorParams> params_;
  std::uint64_t version_ = 0;
};

// Deep, immutable copy of the generator weights.
inline RolloutPolicy snapshot(const GeneratorParams& generator, std::uint64_t version = 0) {
  RolloutPolicy r;
  r.params_ = std::make_shared<const GeneratorParams>(generator);
  r.version_ = version;
  return r;
}

// Terminal reward D(S) + D'(S), or D(S) alone when D' is absent.
struct Reward {
  const DiscriminatorParams* d = nullptr;
  const DiscriminatorParams* d_prime = nullptr;

  double operator()(const TokenSequence& s) const {
    double r = score(*d, s);
    if (d_prime) r += score(*d_prime, s);
    return r;
  }
  double upper_bound() const { return d_prime ? 2.0 : 1.0; }
};

namespace detail {

inline GeneratorCursor cursor_after(const GeneratorParams& p, std::span<const TokenId> prefix) {
  GeneratorCursor cur = start_cursor(p);
  for (TokenId t : prefix) cur.push(t);
  return cur;
}

inline void check_prefix(const GeneratorParams& p, std::size_t t, std::size_t n) {
  if (t < 1 || t > p.sequence_length) {
    throw ContractError("mc_search: prefix length " + std::to_string(t) + " outside [1, " +
                        std::to_string(p.sequence_length) + "]");
  }
  if (n < 1) throw ContractError("mc_search: N must be at least 1");
}

// Runs job(k) for k in [0, count) on up to `threads` workers.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count || failed) return;
        try {
          job(k);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// N completions of the first t tokens of `prefix`, suffixes sampled from
// the rollout policy.
inline std::vector<TokenSequence> mc_search(std::span<const TokenId> prefix,
                                            const RolloutPolicy& policy, std::size_t n,
                                            std::uint64_t seed) {
  const GeneratorParams& p = policy.params();
  const std::size_t t = prefix.size();
  detail::check_prefix(p, t, n);
  const GeneratorCursor base = detail::cursor_after(p, prefix);
  std::vector<TokenSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, {t, i});
    out.push_back(complete_sequence(base, {prefix.begin(), prefix.end()}, p.sequence_length, rng));
  }
  return out;
}

// Action value of the last token of `prefix`: the mean reward over N
// completions for t < L, the direct reward at t = L.
inline double action_value(std::span<const TokenId> prefix, const Reward& reward,
                           const RolloutPolicy& policy, std::size_t n, std::uint64_t seed) {
  const GeneratorParams& p = policy.params();
  detail::check_prefix(p, prefix.size(), n);
  if (prefix.size() == p.sequence_length) {
    return reward(finish_sequence({prefix.begin(), prefix.end()}));
  }
  double total = 0.0;
  for (const auto& s : mc_search(prefix, policy, n, seed)) total += reward(s);
  return total / static_cast<double>(n);
}

struct ActionValueProfile {
  std::vector<double> values;  // A_1 .. A_L
  std::size_t rollouts = 0;    // N
  std::uint64_t policy_version = 0;
  std::size_t discriminator_evaluations = 0;  // (L-1) N + 1
};

// A_t for every position of `sequence`. Each of the (L-1) N rollouts is an
// independent job; they run on `threads` workers and are reduced in a fixed
// order.
inline ActionValueProfile episode_profile(const TokenSequence& sequence, const Reward& reward,
                                          const RolloutPolicy& policy, std::size_t n,
                                          std::uint64_t seed, std::size_t threads = 1) {
  const GeneratorParams& p = policy.params();
  const std::size_t len = p.sequence_length;
  if (sequence.ids.size() != len) throw DimensionError("episode_profile: sequence length mismatch");
  if (n < 1) throw ContractError("episode_profile: N must be at least 1");

  // cursors[t] has consumed the first t + 1 tokens.
  std::vector<GeneratorCursor> cursors;
  cursors.reserve(len);
  GeneratorCursor cur = start_cursor(p);
  for (std::size_t t = 0; t + 1 < len; ++t) {
    cur.push(sequence.ids[t]);
    cursors.push_back(cur);
  }

  std::vector<double> rewards((len - 1) * n);
  detail::parallel_for(rewards.size(), threads, [&](std::size_t job) {
    const std::size_t t = job / n + 1, i = job % n;
    Rng rng = Rng::stream(seed, {t, i});
    std::vector<TokenId> prefix(sequence.ids.begin(),
                                sequence.ids.begin() + static_cast<std::ptrdiff_t>(t));
    rewards[job] = reward(complete_sequence(cursors[t - 1], std::move(prefix), len, rng));
  });

  ActionValueProfile prof;
  prof.rollouts = n;
  prof.policy_version = policy.version();
  prof.values.resize(len);
  for (std::size_t t = 1; t < len; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += rewards[(t - 1) * n + i];
    prof.values[t - 1] = total / static_cast<double>(n);
  }
  prof.values[len - 1] = reward(sequence);
  prof.discriminator_evaluations = rewards.size() + 1;
  return prof;
}

}  // namespace fakegan
