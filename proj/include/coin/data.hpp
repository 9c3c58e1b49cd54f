#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coin/tensor.hpp"

namespace coin {

enum class TokenMode { kWord, kChar };

TokenMode token_mode_from_string(const std::string& s);
std::string to_string(TokenMode mode);

/// Word mode: lowercase, split on Unicode whitespace, strip leading and
/// trailing punctuation per token (internal punctuation survives, so
/// "macbook-pro" stays one token). Char mode: one token per non-whitespace
/// codepoint, no case folding. Throws ConfigError when no token remains.
std::vector<std::string> tokenize(const std::string& text, TokenMode mode);

struct PairExample {
  std::vector<std::string> a;
  std::vector<std::string> b;
  int label = 0;  // 0 = non-duplicate, 1 = duplicate
};

/// Reads "sentence_a<TAB>sentence_b<TAB>label" lines. Blank lines are
/// skipped; any line with the wrong field count, a label outside {0, 1} or
/// a sentence that tokenizes to nothing fails the load with a report that
/// cites every offending line number.
std::vector<PairExample> load_pairs_tsv(const std::string& path, TokenMode mode);

class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  /// Id for a token, kUnkId when absent.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return to_id_.count(token) > 0; }
  std::size_t size() const { return tokens_.size(); }

  void add(const std::string& token);  // no-op if present

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  /// FNV-1a over the id-ordered token list; ties checkpoints to the
  /// vocabulary they were trained with.
  std::string fingerprint() const;

 private:
  std::unordered_map<std::string, int> to_id_;
  std::vector<std::string> tokens_;
};

/// PAD and UNK take ids 0 and 1; remaining tokens are ranked by frequency
/// (descending) then lexicographically, so identical corpora always map to
/// identical vocabularies. Tokens below min_count are left out (they map
/// to UNK at encode time).
Vocabulary build_vocab(const std::vector<PairExample>& examples, std::size_t min_count = 1);

struct EmbeddingTable {
  TensorPtr table;  // |V| x dim, requires_grad == trainable
  std::size_t dim = 0;
  bool trainable = true;
};

/// GloVe-style text format: "token v1 v2 ... v_dim" per line. In-vocab
/// tokens take the file vector; vocabulary tokens absent from the file get
/// uniform(-0.05, 0.05) values drawn in id order from `seed`; the PAD row
/// is forced to zeros. The resulting table is frozen (word mode).
EmbeddingTable load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                          std::size_t dim, std::uint64_t seed);

/// Trainable table with uniform(-0.05, 0.05) entries and a zero PAD row.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

/// Crop to the first L ids or pad with PAD up to L; the mask is 1 exactly
/// at real-token positions.
std::pair<std::vector<int>, std::vector<int>> pad_or_crop(const std::vector<int>& ids,
                                                          std::size_t L);

struct Batch {
  std::size_t size = 0;     // number of pairs
  std::size_t seq_len = 0;  // L
  std::vector<int> ids_a, ids_b;    // size*L, row-major
  std::vector<int> mask_a, mask_b;  // size*L, 1 = real token
  std::vector<int> labels;          // size

  std::vector<int> row_ids_a(std::size_t i) const;
  std::vector<int> row_ids_b(std::size_t i) const;
  std::vector<int> row_mask_a(std::size_t i) const;
  std::vector<int> row_mask_b(std::size_t i) const;
};

Batch make_batch(const std::vector<PairExample>& examples, const Vocabulary& vocab,
                 std::size_t L);

/// Deterministic Fisher-Yates shuffle under `shuffle_seed`, then fixed-size
/// batches with the final partial batch included.
std::vector<Batch> batch_examples(const std::vector<PairExample>& examples,
                                  const Vocabulary& vocab, std::size_t L,
                                  std::size_t batch_size, std::uint64_t shuffle_seed);

}  // namespace coin
