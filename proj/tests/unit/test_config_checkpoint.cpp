#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fakegan/checkpoint.hpp"
#include "fakegan/config.hpp"
#include "fakegan/synth.hpp"

using namespace fakegan;

namespace {

std::filesystem::path temp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fakegan_ckpt";
  std::filesystem::create_directories(dir);
  return dir / name;
}

EmbeddingTable table(std::size_t words) {
  auto vocab = synthetic_vocabulary(words);
  return random_embeddings(*vocab, 4, 3);
}

std::string bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  TrainConfig c;
  c.rollouts = 7;
  c.policy_lr = 0.125;
  c.kernel_windows = {1, 5};
  c.kernel_filters = {9, 11};
  c.mode = TrainMode::kDeceptivePretrainOnlyD;
  c.embeddings_path = "/x/glove.txt";
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.mode, TrainMode::kDeceptivePretrainOnlyD);
  EXPECT_EQ(back.kernel_filters, (std::vector<std::size_t>{9, 11}));
}

TEST(Config, PartialFileOverridesBase) {
  TrainConfig base;
  base.hidden = 12;
  auto c = config_from_json(nlohmann::json{{"rollouts", 3}}, base);
  EXPECT_EQ(c.rollouts, 3u);
  EXPECT_EQ(c.hidden, 12u);
}

TEST(Config, Errors) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"rolouts", 3}}), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"rollouts", "many"}}), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"mode", "triple"}}), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"rollouts", 0}}), ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"kernel_windows", {2}}, {"kernel_filters", {1, 2}}}),
               ContractError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ContractError);
  write_bytes(temp("bad.json"), "{ nope");
  EXPECT_THROW(load_config(temp("bad.json")), FormatError);
  EXPECT_THROW(load_config(temp("missing.json")), IoError);
}

TEST(Config, ModeNames) {
  for (auto m : {TrainMode::kFull, TrainMode::kTruthfulPretrainOnlyD, TrainMode::kDeceptivePretrainOnlyD}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_mode("1"), TrainMode::kTruthfulPretrainOnlyD);
}

TEST(Config, ShippedConfigsLoad) {
  const auto root = std::filesystem::path(FAKEGAN_SOURCE_DIR) / "configs";
  for (const char* name : {"desk.json", "full_scale.json"}) {
    EXPECT_NO_THROW(load_config(root / name)) << name;
  }
  EXPECT_EQ(to_json(load_config(root / "desk.json")), to_json(desk_config()));
}

TEST(Checkpoint, GeneratorRoundTripIsBitExact) {
  auto t = table(5);
  GeneratorConfig gc;
  gc.hidden = 6;
  gc.sequence_length = 7;
  gc.train_embeddings = true;
  auto g = make_generator(t, gc, 4);
  const auto path = temp("g.ckpt");
  save_generator(path, g, *synthetic_vocabulary(5));
  auto loaded = load_generator(path);
  auto& h = loaded.params;
  EXPECT_EQ(h.hidden, 6u);
  EXPECT_TRUE(h.train_embeddings);
  auto a = g.tensors(), b = h.tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].array, *b[i].array) << a[i].name;
  Rng r1(9), r2(9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_sequence(g, r1).ids, sample_sequence(h, r2).ids);
  EXPECT_EQ(loaded.vocab->tokens(), synthetic_vocabulary(5)->tokens());
  save_generator(temp("g2.ckpt"), h, *loaded.vocab);
  EXPECT_EQ(bytes(path), bytes(temp("g2.ckpt")));
}

TEST(Checkpoint, DiscriminatorRoundTripIsBitExact) {
  auto t = table(5);
  DiscriminatorConfig dc;
  dc.kernels = {{2, 3}, {4, 2}};
  dc.sequence_length = 6;
  dc.conv_activation = Nonlinearity::kRelu;
  auto d = make_discriminator(t, dc, Role::kDPrime, 2);
  const auto path = temp("d.ckpt");
  save_discriminator(path, d, *synthetic_vocabulary(5));
  auto e = load_discriminator(path).params;
  EXPECT_EQ(e.role, Role::kDPrime);
  EXPECT_EQ(e.kernels, d.kernels);
  EXPECT_EQ(e.conv_activation, Nonlinearity::kRelu);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    std::vector<std::size_t> s(6);
    for (auto& x : s) x = rng.below(5);
    const auto x = from_symbols(s, 6);
    EXPECT_EQ(score(e, x), score(d, x));
  }
  EXPECT_THROW(generator_from_checkpoint(read_checkpoint(path)), FormatError);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  auto t = table(3);
  GeneratorConfig gc;
  gc.hidden = 2;
  gc.sequence_length = 3;
  auto g = make_generator(t, gc, 1);
  const auto path = temp("c.ckpt");
  save_generator(path, g, *synthetic_vocabulary(3));
  const std::string good = bytes(path);

  write_bytes(temp("trunc.ckpt"), good.substr(0, good.size() - 9));
  EXPECT_THROW(read_checkpoint(temp("trunc.ckpt")), FormatError);

  std::string magic = good;
  magic[0] = 'X';
  write_bytes(temp("magic.ckpt"), magic);
  EXPECT_THROW(read_checkpoint(temp("magic.ckpt")), FormatError);

  std::string version = good;
  version[8] = 9;
  write_bytes(temp("version.ckpt"), version);
  EXPECT_THROW(read_checkpoint(temp("version.ckpt")), FormatError);

  std::string hash = good;
  hash[13] ^= 0x5a;  // inside the vocabulary hash
  write_bytes(temp("hash.ckpt"), hash);
  EXPECT_THROW(read_checkpoint(temp("hash.ckpt")), FormatError);

  EXPECT_THROW(read_checkpoint(temp("absent.ckpt")), IoError);

  // Structurally valid file whose tensors disagree with the metadata.
  auto data = read_checkpoint(path);
  data.metadata["hidden"] = 3;
  write_checkpoint(temp("shape.ckpt"), data);
  EXPECT_THROW(load_generator(temp("shape.ckpt")), FormatError);
  data = read_checkpoint(path);
  data.metadata.erase("hidden");
  write_checkpoint(temp("meta.ckpt"), data);
  EXPECT_THROW(load_generator(temp("meta.ckpt")), FormatError);
  data = read_checkpoint(path);
  data.tensors.pop_back();
  write_checkpoint(temp("missing_tensor.ckpt"), data);
  EXPECT_THROW(load_generator(temp("missing_tensor.ckpt")), FormatError);
}

TEST(Checkpoint, VocabularyMismatchOnSave) {
  auto t = table(3);
  GeneratorConfig gc;
  gc.hidden = 2;
  gc.sequence_length = 3;
  auto g = make_generator(t, gc, 1);
  EXPECT_THROW(save_generator(temp("x.ckpt"), g, *synthetic_vocabulary(4)), ContractError);
}

TEST(CorpusCache, RoundTrip) {
  auto c = sample_corpus(default_desk_pair(), 12, 5, 18);
  const auto path = temp("corpus.json");
  save_corpus(path, c);
  auto back = load_corpus(path);
  EXPECT_EQ(back.sequence_length, 18u);
  EXPECT_EQ(back.vocab->tokens(), c.vocab->tokens());
  ASSERT_EQ(back.truthful.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(back.truthful[i].ids, c.truthful[i].ids);
    EXPECT_EQ(back.deceptive[i].original_length, c.deceptive[i].original_length);
  }
  write_bytes(temp("corpus_bad.json"), R"({"sequence_length": 2, "vocabulary": [], "truthful": [{"ids": [0, 0, 0], "length": 1}], "deceptive": []})");
  EXPECT_THROW(load_corpus(temp("corpus_bad.json")), FormatError);
  write_bytes(temp("corpus_junk.json"), "[1, 2");
  EXPECT_THROW(load_corpus(temp("corpus_junk.json")), FormatError);
  EXPECT_THROW(load_corpus(temp("corpus_absent.json")), IoError);
}
