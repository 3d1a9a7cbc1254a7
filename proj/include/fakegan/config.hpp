#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakegan/discriminator.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/generator.hpp"

namespace fakegan {

enum class TrainMode { kFull, kTruthfulPretrainOnlyD, kDeceptivePretrainOnlyD };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kFull: return "full";
    case TrainMode::kTruthfulPretrainOnlyD: return "d-only-truthful-pretrain";
    case TrainMode::kDeceptivePretrainOnlyD: return "d-only-deceptive-pretrain";
  }
  return "?";
}

inline TrainMode parse_mode(const std::string& s) {
  if (s == "full") return TrainMode::kFull;
  if (s == "d-only-truthful-pretrain" || s == "1") return TrainMode::kTruthfulPretrainOnlyD;
  if (s == "d-only-deceptive-pretrain" || s == "2") return TrainMode::kDeceptivePretrainOnlyD;
  throw ContractError("unknown training mode '" + s + "'");
}

// Every knob of the training loop. Serialized as a flat JSON object using
// the field names below; absent fields keep their defaults.
struct TrainConfig {
  std::size_t sequence_length = 16;
  std::size_t rollouts = 16;
  std::size_t g_steps = 1;
  std::size_t d_steps = 6;
  double policy_lr = 0.01;
  double grad_clip = 5.0;
  std::size_t episodes_per_gstep = 16;
  bool reward_baseline = false;
  bool refresh_rollout_each_gstep = false;

  std::size_t gen_pretrain_steps = 120;
  std::size_t disc_pretrain_steps = 50;
  double gen_pretrain_lr = 1e-4;
  std::size_t gen_batch = 32;
  double disc_lr = 1e-4;
  std::size_t disc_batch = 64;
  double dropout = 0.25;

  std::size_t hidden = 64;
  std::size_t embedding_dim = 32;  // used when no embedding file is given
  std::string embeddings_path;
  bool train_embeddings = false;
  bool end_terminates = true;
  std::vector<std::size_t> kernel_windows{2, 3, 4};
  std::vector<std::size_t> kernel_filters{32, 32, 32};
  std::string conv_activation = "tanh";

  std::size_t k_folds = 5;
  std::uint64_t seed = 1;
  std::size_t convergence_window = 20;
  double convergence_tol = 0.005;
  std::size_t max_iterations = 200;
  TrainMode mode = TrainMode::kFull;
  std::size_t threads = 1;
  bool record_wall_clock = false;

  void validate() const {
    if (sequence_length < 1 || rollouts < 1 || g_steps < 1 || d_steps < 1) {
      throw ContractError("config: sequence_length, rollouts, g_steps and d_steps must be >= 1");
    }
    if (!(convergence_tol > 0)) throw ContractError("config: convergence_tol must be positive");
    if (convergence_window < 1) throw ContractError("config: convergence_window must be >= 1");
    if (episodes_per_gstep < 1) throw ContractError("config: episodes_per_gstep must be >= 1");
    if (kernel_windows.empty() || kernel_windows.size() != kernel_filters.size()) {
      throw ContractError("config: kernel_windows and kernel_filters must pair up");
    }
    for (std::size_t w : kernel_windows) {
      if (w < 1 || w > sequence_length) throw ContractError("config: kernel window exceeds L");
    }
    if (dropout < 0 || dropout >= 1) throw ContractError("config: dropout must lie in [0, 1)");
    parse_nonlinearity(conv_activation);
  }

  GeneratorConfig generator_config() const {
    GeneratorConfig g;
    g.hidden = hidden;
    g.sequence_length = sequence_length;
    g.train_embeddings = train_embeddings;
    g.end_terminates = end_terminates;
    return g;
  }

  DiscriminatorConfig discriminator_config() const {
    DiscriminatorConfig d;
    d.kernels.clear();
    for (std::size_t j = 0; j < kernel_windows.size(); ++j) {
      d.kernels.push_back({kernel_windows[j], kernel_filters[j]});
    }
    d.sequence_length = sequence_length;
    d.dropout = dropout;
    d.conv_activation = parse_nonlinearity(conv_activation);
    d.train_embeddings = train_embeddings;
    return d;
  }
};

#define FAKEGAN_CONFIG_FIELDS(X)                                                              \
  X(sequence_length) X(rollouts) X(g_steps) X(d_steps) X(policy_lr) X(grad_clip)               \
  X(episodes_per_gstep) X(reward_baseline) X(refresh_rollout_each_gstep)                        \
  X(gen_pretrain_steps) X(disc_pretrain_steps) X(gen_pretrain_lr) X(gen_batch) X(disc_lr)      \
  X(disc_batch) X(dropout) X(hidden) X(embedding_dim) X(embeddings_path) X(train_embeddings)   \
  X(end_terminates) X(kernel_windows) X(kernel_filters) X(conv_activation) X(k_folds) X(seed)  \
  X(convergence_window) X(convergence_tol) X(max_iterations) X(threads) X(record_wall_clock)

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
#define X(name) j[#name] = c.name;
  FAKEGAN_CONFIG_FIELDS(X)
#undef X
  j["mode"] = to_string(c.mode);
  return j;
}

// Overlays the fields present in `j` onto `base`. Unknown keys are errors.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ContractError("config: expected a JSON object");
  static const std::vector<std::string> known = {
#define X(name) #name,
      FAKEGAN_CONFIG_FIELDS(X)
#undef X
          "mode"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ContractError("config: unknown field '" + it.key() + "'");
    }
  }
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(base.name);
    FAKEGAN_CONFIG_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  if (j.contains("mode")) base.mode = parse_mode(j.at("mode").get<std::string>());
  base.validate();
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

// Desk-scale preset for the synthetic source pair (L=16); mirrors
// configs/desk.json.
inline TrainConfig desk_config() {
  TrainConfig c;
  c.sequence_length = 16;
  c.gen_pretrain_lr = 1e-3;
  c.disc_lr = 2e-4;
  c.embedding_dim = 16;
  c.max_iterations = 30;
  return c;
}

}  // namespace fakegan
