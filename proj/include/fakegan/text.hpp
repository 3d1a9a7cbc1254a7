#pragma once

// Tokenization, vocabulary, padded token sequences, labeled corpora,
// embedding tables and k-fold splitting.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fakegan/array.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/random.hpp"

namespace fakegan {

using TokenId = std::uint32_t;

inline constexpr TokenId kEndId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr const char* kEndToken = "<END>";
inline constexpr const char* kUnkToken = "<UNK>";
inline constexpr const char* kStartToken = "<START>";

enum class Label { kTruthful, kDeceptive, kGenerated };

inline const char* to_string(Label l) {
  switch (l) {
    case Label::kTruthful: return "truthful";
    case Label::kDeceptive: return "deceptive";
    case Label::kGenerated: return "generated";
  }
  return "?";
}

// Lowercases, isolates ASCII punctuation as single-character tokens and
// splits on whitespace.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 0x80 && std::ispunct(ch)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(ch));
    } else {
      cur.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
    }
  }
  flush();
  if (tokens.empty()) throw EmptyInputError("tokenize: no tokens in input text");
  return tokens;
}

// Ids: END = 0, UNK = 1, words from 2, START last. Every id below start_id()
// is an emittable generator output, so output index == token id.
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  explicit Vocabulary(const std::vector<std::string>& words) {
    add(kEndToken);
    add(kUnkToken);
    for (const std::string& w : words) {
      if (w == kEndToken || w == kUnkToken || w == kStartToken) continue;
      if (!index_.count(w)) add(w);
    }
    add(kStartToken);
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t emittable_count() const noexcept { return tokens_.size() - 1; }
  TokenId start_id() const noexcept { return static_cast<TokenId>(tokens_.size() - 1); }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) throw LookupError("vocabulary: id out of range");
    return tokens_[id];
  }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // FNV-1a over the token list; identifies a vocabulary inside checkpoints.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& t : tokens_) {
      for (unsigned char c : t) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= 0xff;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  void add(const std::string& t) {
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Words ordered by descending frequency, ties broken lexicographically.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                                   std::size_t min_count = 1) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    for (const auto& t : doc) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (const auto& [w, c] : ordered) {
    if (c >= min_count) words.push_back(w);
  }
  return Vocabulary(words);
}

struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t original_length = 0;

  std::size_t length() const noexcept { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Pads to exactly `length` with END. Throws when the input is empty or
// longer than `length`.
inline TokenSequence pad_sequence(std::vector<TokenId> ids, std::size_t length) {
  if (ids.empty()) throw EmptyInputError("pad_sequence: empty token list");
  if (ids.size() > length) {
    throw ContractError("pad_sequence: " + std::to_string(ids.size()) +
                        " tokens exceed length " + std::to_string(length));
  }
  TokenSequence seq;
  seq.original_length = ids.size();
  seq.ids = std::move(ids);
  seq.ids.resize(length, kEndId);
  return seq;
}

// nullopt when the token list is longer than `length` (filtered, never
// truncated).
inline std::optional<TokenSequence> encode(const std::vector<std::string>& tokens,
                                           const Vocabulary& vocab, std::size_t length) {
  if (tokens.size() > length) return std::nullopt;
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return pad_sequence(std::move(ids), length);
}

inline std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seq.original_length; ++i) out.push_back(vocab.token(seq.ids[i]));
  return out;
}

inline void validate_sequence(const TokenSequence& seq, std::size_t length, std::size_t vocab_size) {
  if (seq.ids.size() != length) {
    throw DimensionError("sequence length " + std::to_string(seq.ids.size()) + " != " +
                         std::to_string(length));
  }
  if (seq.original_length < 1 || seq.original_length > length) {
    throw ContractError("sequence original_length out of range");
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (seq.ids[i] >= vocab_size) throw LookupError("sequence token id out of range");
    if (i >= seq.original_length && seq.ids[i] != kEndId) {
      throw ContractError("sequence has a non-END token in its padded region");
    }
  }
}

struct LabeledCorpus {
  std::shared_ptr<const Vocabulary> vocab;
  std::size_t sequence_length = 0;
  std::vector<TokenSequence> truthful;
  std::vector<TokenSequence> deceptive;

  std::size_t size() const noexcept { return truthful.size() + deceptive.size(); }

  void validate() const {
    if (!vocab) throw ContractError("corpus has no vocabulary");
    std::set<std::vector<TokenId>> seen;
    for (const auto& s : truthful) {
      validate_sequence(s, sequence_length, vocab->size());
      seen.insert(s.ids);
    }
    for (const auto& s : deceptive) {
      validate_sequence(s, sequence_length, vocab->size());
      if (seen.count(s.ids)) throw ContractError("corpus classes are not disjoint");
    }
  }
};

struct IngestResult {
  LabeledCorpus corpus;
  std::size_t truthful_read = 0;
  std::size_t deceptive_read = 0;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::filesystem::path> text_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

// Reads <root>/truthful/*.txt and <root>/deceptive/*.txt (searched
// recursively, one review per file). Reviews longer than `length` tokens are
// discarded; the vocabulary is built from the retained reviews.
inline IngestResult ingest_labeled_dir(const std::filesystem::path& root, std::size_t length) {
  namespace fs = std::filesystem;
  const fs::path tdir = root / "truthful", ddir = root / "deceptive";
  for (const auto& d : {tdir, ddir}) {
    if (!fs::is_directory(d)) throw LayoutError("missing subdirectory " + d.string());
  }
  IngestResult result;
  std::vector<std::vector<std::string>> kept_t, kept_d;
  auto load = [&](const fs::path& dir, std::vector<std::vector<std::string>>& kept) {
    std::size_t read = 0;
    for (const auto& f : detail::text_files(dir)) {
      ++read;
      std::vector<std::string> toks;
      try {
        toks = tokenize(detail::read_file(f));
      } catch (const EmptyInputError&) {
        continue;
      }
      if (toks.size() <= length) kept.push_back(std::move(toks));
    }
    return read;
  };
  result.truthful_read = load(tdir, kept_t);
  result.deceptive_read = load(ddir, kept_d);
  if (kept_t.empty() && kept_d.empty()) {
    throw EmptyCorpusError("no reviews of at most " + std::to_string(length) + " tokens under " +
                           root.string());
  }
  std::vector<std::vector<std::string>> all(kept_t);
  all.insert(all.end(), kept_d.begin(), kept_d.end());
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(all));
  LabeledCorpus& c = result.corpus;
  c.vocab = vocab;
  c.sequence_length = length;
  for (const auto& t : kept_t) c.truthful.push_back(*encode(t, *vocab, length));
  for (const auto& t : kept_d) c.deceptive.push_back(*encode(t, *vocab, length));
  return result;
}

struct EmbeddingTable {
  Array matrix;  // vocab size x dim

  std::size_t dim() const { return matrix.dim(1); }
  std::size_t rows() const { return matrix.dim(0); }
};

// Rows uniform in [-0.1, 0.1]; each row draws from its own seeded stream.
inline void fill_random_row(Array& m, std::size_t row, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0xe3b, row});
  for (double& v : m.row(row)) v = rng.uniform(-0.1, 0.1);
}

inline EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim,
                                        std::uint64_t seed) {
  EmbeddingTable t{Array({vocab.size(), dim})};
  for (std::size_t r = 0; r < vocab.size(); ++r) fill_random_row(t.matrix, r, seed);
  return t;
}

// Parses "token v1 ... vE" lines. Vocabulary tokens found in the file get
// the file vector; every other row (including specials) is random.
inline EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                      std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embedding file " + path.string());
  std::size_t dim = 0;
  std::vector<std::optional<std::vector<double>>> found(vocab.size());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError("embedding line " + std::to_string(lineno) + " has no values");
    const std::string token = line.substr(0, sp);
    std::vector<double> vals;
    const char* p = line.c_str() + sp;
    char* end = nullptr;
    for (;;) {
      const double v = std::strtod(p, &end);
      if (end == p) break;
      vals.push_back(v);
      p = end;
    }
    if (dim == 0) dim = vals.size();
    if (vals.size() != dim || dim == 0) {
      throw FormatError("embedding line " + std::to_string(lineno) + " has " +
                        std::to_string(vals.size()) + " values, expected " + std::to_string(dim));
    }
    if (vocab.contains(token)) {
      const TokenId id = vocab.id(token);
      if (!found[id]) found[id] = std::move(vals);
    }
  }
  if (dim == 0) throw FormatError("embedding file " + path.string() + " is empty");
  EmbeddingTable t{Array({vocab.size(), dim})};
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (found[r]) {
      std::copy(found[r]->begin(), found[r]->end(), t.matrix.row(r).begin());
    } else {
      fill_random_row(t.matrix, r, seed);
    }
  }
  return t;
}

struct Fold {
  LabeledCorpus train;
  LabeledCorpus test;
};

// Stratified k-fold split. Each class is shuffled under the seed and dealt
// round-robin; the deal continues across classes so total fold sizes also
// differ by at most one.
inline std::vector<Fold> kfold_split(const LabeledCorpus& corpus, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 2) throw ContractError("kfold_split: k must be at least 2");
  if (corpus.truthful.size() < k || corpus.deceptive.size() < k) {
    throw ContractError("kfold_split: k=" + std::to_string(k) + " exceeds a class size");
  }
  std::vector<Fold> folds(k);
  for (auto& f : folds) {
    f.train.vocab = f.test.vocab = corpus.vocab;
    f.train.sequence_length = f.test.sequence_length = corpus.sequence_length;
  }
  std::size_t offset = 0;
  for (int cls = 0; cls < 2; ++cls) {
    const auto& pool = cls == 0 ? corpus.truthful : corpus.deceptive;
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::stream(seed, {0xf01d, static_cast<std::uint64_t>(cls)});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t j = 0; j < order.size(); ++j) {
      const std::size_t test_fold = (offset + j) % k;
      for (std::size_t f = 0; f < k; ++f) {
        LabeledCorpus& dst = f == test_fold ? folds[f].test : folds[f].train;
        (cls == 0 ? dst.truthful : dst.deceptive).push_back(pool[order[j]]);
      }
    }
    offset += pool.size();
  }
  return folds;
}

}  // namespace fakegan
