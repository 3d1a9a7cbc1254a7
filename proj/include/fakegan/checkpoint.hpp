#pragma once

// Versioned binary tensor container.
//
// Layout (little-endian):
//   "FKGNCKPT" | u32 version | u8 kind | u64 vocab hash
//   u32 vocab count, then per token: u32 length, bytes
//   u32 metadata length, metadata JSON bytes
//   u32 tensor count, then per tensor:
//     u32 name length, name, u32 ndim, u64 dims[ndim], f64 values[prod(dims)]

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakegan/discriminator.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/text.hpp"

namespace fakegan {

inline constexpr char kCheckpointMagic[8] = {'F', 'K', 'G', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t { kGenerator = 0, kD = 1, kDPrime = 2 };

struct NamedArray {
  std::string name;
  Array array;
};

struct CheckpointData {
  CheckpointKind kind = CheckpointKind::kGenerator;
  std::vector<std::string> vocabulary;
  std::uint64_t vocab_hash = 0;
  nlohmann::json metadata;
  std::vector<NamedArray> tensors;

  const Array& tensor(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t.array;
    }
    throw FormatError("checkpoint: missing tensor '" + name + "'");
  }
};

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file");
  return v;
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 28)) throw FormatError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw FormatError("checkpoint: truncated file");
  return s;
}

}  // namespace detail

inline void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(data.kind));
  detail::put<std::uint64_t>(out, data.vocab_hash);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.vocabulary.size()));
  for (const auto& t : data.vocabulary) detail::put_string(out, t);
  detail::put_string(out, data.metadata.dump());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, arr] : data.tensors) {
    detail::put_string(out, name);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arr.ndim()));
    for (std::size_t d : arr.shape()) detail::put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(arr.data()),
              static_cast<std::streamsize>(arr.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  CheckpointData d;
  d.kind = static_cast<CheckpointKind>(detail::get<std::uint8_t>(in));
  d.vocab_hash = detail::get<std::uint64_t>(in);
  const auto nv = detail::get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nv; ++i) d.vocabulary.push_back(detail::get_string(in));
  try {
    d.metadata = nlohmann::json::parse(detail::get_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const auto nt = detail::get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nt; ++i) {
    NamedArray t;
    t.name = detail::get_string(in);
    const auto nd = detail::get<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t k = 0; k < nd; ++k) shape.push_back(detail::get<std::uint64_t>(in));
    std::vector<double> vals(shape_size(shape));
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint: truncated tensor '" + t.name + "'");
    t.array = Array(std::move(shape), std::move(vals));
    d.tensors.push_back(std::move(t));
  }
  Vocabulary check(std::vector<std::string>(d.vocabulary.begin(), d.vocabulary.end()));
  if (check.hash() != d.vocab_hash) throw FormatError("checkpoint: vocabulary hash mismatch");
  return d;
}

// Rebuilds the vocabulary stored in a checkpoint.
inline std::shared_ptr<const Vocabulary> checkpoint_vocabulary(const CheckpointData& d) {
  return std::make_shared<const Vocabulary>(d.vocabulary);
}

inline void save_generator(const std::filesystem::path& path, GeneratorParams& g,
                           const Vocabulary& vocab) {
  if (vocab.size() != g.vocab_size) throw ContractError("save_generator: vocabulary mismatch");
  CheckpointData d;
  d.kind = CheckpointKind::kGenerator;
  d.vocabulary = vocab.tokens();
  d.vocab_hash = vocab.hash();
  d.metadata = {{"hidden", g.hidden},
                {"sequence_length", g.sequence_length},
                {"train_embeddings", g.train_embeddings},
                {"end_terminates", g.end_terminates}};
  for (const auto& r : g.tensors()) d.tensors.push_back({r.name, *r.array});
  write_checkpoint(path, d);
}

namespace detail {

inline void expect_shape(const Array& a, const Shape& want, const std::string& name) {
  if (a.shape() != want) {
    throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_string(a.shape()) +
                      ", expected " + shape_string(want));
  }
}

}  // namespace detail

inline GeneratorParams generator_from_checkpoint(const CheckpointData& d) {
  if (d.kind != CheckpointKind::kGenerator) throw FormatError("checkpoint is not a generator");
  GeneratorParams g;
  try {
    g.vocab_size = d.vocabulary.size();
    g.hidden = d.metadata.at("hidden").get<std::size_t>();
    g.sequence_length = d.metadata.at("sequence_length").get<std::size_t>();
    g.train_embeddings = d.metadata.at("train_embeddings").get<bool>();
    g.end_terminates = d.metadata.at("end_terminates").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("generator checkpoint metadata: ") + e.what());
  }
  for (auto& r : g.tensors()) *r.array = d.tensor(r.name);
  const std::size_t v = g.vocab_size, h = g.hidden;
  if (g.embedding.ndim() != 2) throw FormatError("checkpoint: embedding must be a matrix");
  const std::size_t e = g.embedding.dim(1);
  detail::expect_shape(g.embedding, {v, e}, "embedding");
  detail::expect_shape(g.wx, {4 * h, e}, "lstm.wx");
  detail::expect_shape(g.wh, {4 * h, h}, "lstm.wh");
  detail::expect_shape(g.b, {4 * h}, "lstm.b");
  detail::expect_shape(g.out_w, {v - 1, h}, "out.w");
  detail::expect_shape(g.out_b, {v - 1}, "out.b");
  return g;
}

inline void save_discriminator(const std::filesystem::path& path, DiscriminatorParams& p,
                               const Vocabulary& vocab) {
  if (vocab.size() != p.embedding.dim(0)) {
    throw ContractError("save_discriminator: vocabulary mismatch");
  }
  CheckpointData d;
  d.kind = p.role == Role::kD ? CheckpointKind::kD : CheckpointKind::kDPrime;
  d.vocabulary = vocab.tokens();
  d.vocab_hash = vocab.hash();
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& k : p.kernels) kernels.push_back({k.window, k.filters});
  d.metadata = {{"role", to_string(p.role)},
                {"sequence_length", p.sequence_length},
                {"dropout", p.dropout},
                {"conv_activation", to_string(p.conv_activation)},
                {"highway_activation", to_string(p.highway_activation)},
                {"train_embeddings", p.train_embeddings},
                {"kernels", kernels}};
  for (const auto& r : p.tensors()) d.tensors.push_back({r.name, *r.array});
  write_checkpoint(path, d);
}

inline DiscriminatorParams discriminator_from_checkpoint(const CheckpointData& d) {
  if (d.kind == CheckpointKind::kGenerator) throw FormatError("checkpoint is not a discriminator");
  DiscriminatorParams p;
  p.role = d.kind == CheckpointKind::kD ? Role::kD : Role::kDPrime;
  try {
    p.sequence_length = d.metadata.at("sequence_length").get<std::size_t>();
    p.dropout = d.metadata.at("dropout").get<double>();
    p.conv_activation = parse_nonlinearity(d.metadata.at("conv_activation").get<std::string>());
    p.highway_activation =
        parse_nonlinearity(d.metadata.at("highway_activation").get<std::string>());
    p.train_embeddings = d.metadata.at("train_embeddings").get<bool>();
    for (const auto& k : d.metadata.at("kernels")) {
      p.kernels.push_back({k.at(0).get<std::size_t>(), k.at(1).get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("discriminator checkpoint metadata: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("discriminator checkpoint metadata: ") + e.what());
  }
  p.conv_w.resize(p.kernels.size());
  p.conv_b.resize(p.kernels.size());
  for (auto& r : p.tensors()) *r.array = d.tensor(r.name);
  if (p.embedding.ndim() != 2) throw FormatError("checkpoint: embedding must be a matrix");
  const std::size_t v = d.vocabulary.size(), e = p.embedding.dim(1);
  detail::expect_shape(p.embedding, {v, e}, "embedding");
  std::size_t m = 0;
  for (std::size_t j = 0; j < p.kernels.size(); ++j) {
    const auto [w, f] = p.kernels[j];
    if (w < 1 || w > p.sequence_length) throw FormatError("checkpoint: kernel window exceeds L");
    detail::expect_shape(p.conv_w[j], {f, w, e}, "conv" + std::to_string(j) + ".w");
    detail::expect_shape(p.conv_b[j], {f}, "conv" + std::to_string(j) + ".b");
    m += f;
  }
  detail::expect_shape(p.hw_wt, {m, m}, "highway.wt");
  detail::expect_shape(p.hw_bt, {m}, "highway.bt");
  detail::expect_shape(p.hw_wh, {m, m}, "highway.wh");
  detail::expect_shape(p.hw_bh, {m}, "highway.bh");
  detail::expect_shape(p.head_w, {m}, "head.w");
  detail::expect_shape(p.head_b, {1}, "head.b");
  return p;
}

template <typename Params>
struct Loaded {
  Params params;
  std::shared_ptr<const Vocabulary> vocab;
};

inline Loaded<GeneratorParams> load_generator(const std::filesystem::path& path) {
  const CheckpointData d = read_checkpoint(path);
  return {generator_from_checkpoint(d), checkpoint_vocabulary(d)};
}

inline Loaded<DiscriminatorParams> load_discriminator(const std::filesystem::path& path) {
  const CheckpointData d = read_checkpoint(path);
  return {discriminator_from_checkpoint(d), checkpoint_vocabulary(d)};
}

// Cached corpus: a JSON document holding the vocabulary and both classes.
inline nlohmann::json corpus_to_json(const LabeledCorpus& c) {
  auto seqs = [](const std::vector<TokenSequence>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back({{"ids", s.ids}, {"length", s.original_length}});
    return a;
  };
  return {{"sequence_length", c.sequence_length},
          {"vocabulary", c.vocab->tokens()},
          {"truthful", seqs(c.truthful)},
          {"deceptive", seqs(c.deceptive)}};
}

inline LabeledCorpus corpus_from_json(const nlohmann::json& j) {
  LabeledCorpus c;
  try {
    c.sequence_length = j.at("sequence_length").get<std::size_t>();
    c.vocab = std::make_shared<const Vocabulary>(j.at("vocabulary").get<std::vector<std::string>>());
    for (const char* cls : {"truthful", "deceptive"}) {
      auto& dst = std::string(cls) == "truthful" ? c.truthful : c.deceptive;
      for (const auto& e : j.at(cls)) {
        dst.push_back({e.at("ids").get<std::vector<TokenId>>(), e.at("length").get<std::size_t>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corpus: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("corpus: ") + e.what());
  }
  return c;
}

inline void save_corpus(const std::filesystem::path& path, const LabeledCorpus& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << corpus_to_json(c).dump() << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline LabeledCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return corpus_from_json(j);
}

}  // namespace fakegan
