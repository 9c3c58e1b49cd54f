#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "coin/data.hpp"
#include "coin/errors.hpp"

using namespace coin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("coin_data_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p.string();
  }
};

}  // namespace

TEST_CASE("word tokenization lowercases, splits and strips edge punctuation") {
  auto toks = tokenize("What do YOU think?", TokenMode::kWord);
  CHECK(toks == std::vector<std::string>{"what", "do", "you", "think"});
  CHECK(tokenize("Is a MacBook-Pro worth it?", TokenMode::kWord) ==
        std::vector<std::string>{"is", "a", "macbook-pro", "worth", "it"});
  CHECK(tokenize("\"quoted\" words,", TokenMode::kWord) ==
        std::vector<std::string>{"quoted", "words"});
}

TEST_CASE("char tokenization emits one token per codepoint") {
  auto toks = tokenize("你好吗", TokenMode::kChar);
  CHECK(toks == std::vector<std::string>{"你", "好", "吗"});
  CHECK(tokenize("你 好", TokenMode::kChar) == std::vector<std::string>{"你", "好"});
  CHECK(tokenize("ab", TokenMode::kChar) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("whitespace-only text is an error") {
  CHECK_THROWS_AS(tokenize("  ", TokenMode::kWord), ConfigError);
  CHECK_THROWS_AS(tokenize(" \t\n", TokenMode::kChar), ConfigError);
}

TEST_CASE("load_pairs_tsv parses the three-column format") {
  TempDir tmp;
  const auto path = tmp.file("pairs.tsv", "a B\tc d\t1\nx y\tz w\t0\n");
  auto pairs = load_pairs_tsv(path, TokenMode::kWord);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].a == std::vector<std::string>{"a", "b"});
  CHECK(pairs[0].b == std::vector<std::string>{"c", "d"});
  CHECK(pairs[0].label == 1);
  CHECK(pairs[1].label == 0);
}

TEST_CASE("load_pairs_tsv on an empty file gives an empty list") {
  TempDir tmp;
  CHECK(load_pairs_tsv(tmp.file("empty.tsv", ""), TokenMode::kWord).empty());
}

TEST_CASE("load_pairs_tsv rejects malformed lines with line numbers") {
  TempDir tmp;
  const auto two_fields = tmp.file("two.tsv", "a\tb\n");
  CHECK_THROWS_WITH_AS(load_pairs_tsv(two_fields, TokenMode::kWord), doctest::Contains("line 1"),
                       ConfigError);

  const auto bad_label = tmp.file("label.tsv", "a\tb\t1\nc\td\t7\n");
  CHECK_THROWS_WITH_AS(load_pairs_tsv(bad_label, TokenMode::kWord), doctest::Contains("line 2"),
                       ConfigError);

  CHECK_THROWS_AS(load_pairs_tsv((tmp.path / "missing.tsv").string(), TokenMode::kWord),
                  ConfigError);
}

TEST_CASE("build_vocab orders by frequency then token") {
  std::vector<PairExample> corpus{{{"a", "a"}, {"b"}, 1}};
  auto vocab = build_vocab(corpus);
  CHECK(vocab.id("<pad>") == 0);
  CHECK(vocab.id("<unk>") == 1);
  CHECK(vocab.id("a") == 2);
  CHECK(vocab.id("b") == 3);
  CHECK(vocab.size() == 4);
  CHECK(vocab.id("zzz") == Vocabulary::kUnkId);
}

TEST_CASE("build_vocab honors min_count") {
  std::vector<PairExample> corpus{{{"a", "a"}, {"b"}, 0}};
  auto vocab = build_vocab(corpus, 2);
  CHECK(vocab.contains("a"));
  CHECK(!vocab.contains("b"));
  CHECK(vocab.id("b") == Vocabulary::kUnkId);
}

TEST_CASE("vocabulary construction is deterministic") {
  std::vector<PairExample> corpus{
      {{"red", "green"}, {"blue", "red"}, 1},
      {{"green", "blue"}, {"red"}, 0},
  };
  auto v1 = build_vocab(corpus);
  auto v2 = build_vocab(corpus);
  CHECK(v1.to_json() == v2.to_json());
  CHECK(v1.fingerprint() == v2.fingerprint());
}

TEST_CASE("vocabulary JSON round-trips") {
  std::vector<PairExample> corpus{{{"alpha", "beta"}, {"gamma"}, 1}};
  auto vocab = build_vocab(corpus);
  auto restored = Vocabulary::from_json(vocab.to_json());
  CHECK(restored.size() == vocab.size());
  CHECK(restored.id("alpha") == vocab.id("alpha"));
  CHECK(restored.fingerprint() == vocab.fingerprint());
}

TEST_CASE("pretrained embeddings load file vectors and seed OOV rows") {
  TempDir tmp;
  std::string line = "alpha";
  for (int i = 0; i < 4; ++i) line += " 0.1";
  const auto path = tmp.file("emb.txt", line + "\n");

  std::vector<PairExample> corpus{{{"alpha", "beta"}, {"beta"}, 1}};
  auto vocab = build_vocab(corpus);
  auto emb = load_pretrained_embeddings(path, vocab, 4, 77);
  CHECK(emb.trainable == false);
  CHECK(emb.table->shape == Shape{vocab.size(), 4});
  for (int j = 0; j < 4; ++j) {
    CHECK(emb.table->data[vocab.id("alpha") * 4 + j] == doctest::Approx(0.1));
    CHECK(emb.table->data[Vocabulary::kPadId * 4 + j] == 0.0);
    const double oov = emb.table->data[vocab.id("beta") * 4 + j];
    CHECK(oov > -0.05);
    CHECK(oov < 0.05);
  }
  // OOV rows are reproducible under the same seed
  auto emb2 = load_pretrained_embeddings(path, vocab, 4, 77);
  CHECK(emb.table->data == emb2.table->data);
}

TEST_CASE("pretrained embeddings report dimension mismatches by line") {
  TempDir tmp;
  const auto path = tmp.file("emb.txt", "alpha 0.1 0.2 0.3\n");
  std::vector<PairExample> corpus{{{"alpha"}, {"alpha"}, 1}};
  auto vocab = build_vocab(corpus);
  CHECK_THROWS_WITH_AS(load_pretrained_embeddings(path, vocab, 4, 1), doctest::Contains("line 1"),
                       ConfigError);
}

TEST_CASE("pad_or_crop pads, crops and masks") {
  auto [ids, mask] = pad_or_crop({5, 6, 7}, 5);
  CHECK(ids == std::vector<int>{5, 6, 7, 0, 0});
  CHECK(mask == std::vector<int>{1, 1, 1, 0, 0});

  std::vector<int> forty(40);
  for (int i = 0; i < 40; ++i) forty[i] = i + 2;
  auto [ids2, mask2] = pad_or_crop(forty, 32);
  CHECK(ids2.size() == 32);
  CHECK(ids2.back() == 33);
  for (int m : mask2) CHECK(m == 1);

  auto [ids3, mask3] = pad_or_crop({9, 9, 9, 9, 9}, 5);
  CHECK(ids3 == std::vector<int>{9, 9, 9, 9, 9});
  CHECK(mask3 == std::vector<int>{1, 1, 1, 1, 1});
}

TEST_CASE("unpadding recovers the original ids (round trip)") {
  std::vector<int> ids = {4, 9, 2};
  auto [padded, mask] = pad_or_crop(ids, 8);
  std::vector<int> recovered;
  for (std::size_t i = 0; i < padded.size(); ++i)
    if (mask[i] == 1) recovered.push_back(padded[i]);
  CHECK(recovered == ids);
}

namespace {

std::vector<PairExample> tiny_corpus(int n) {
  std::vector<PairExample> out;
  for (int i = 0; i < n; ++i) {
    PairExample ex;
    ex.a = {"tok" + std::to_string(i), "x"};
    ex.b = {"tok" + std::to_string((i * 3) % n), "y"};
    ex.label = i % 2;
    out.push_back(ex);
  }
  return out;
}

}  // namespace

TEST_CASE("batching sizes and determinism") {
  auto corpus = tiny_corpus(10);
  auto vocab = build_vocab(corpus);
  auto batches = batch_examples(corpus, vocab, 4, 4, 99);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size == 4);
  CHECK(batches[1].size == 4);
  CHECK(batches[2].size == 2);

  auto again = batch_examples(corpus, vocab, 4, 4, 99);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    CHECK(batches[i].ids_a == again[i].ids_a);
    CHECK(batches[i].labels == again[i].labels);
  }
  auto other = batch_examples(corpus, vocab, 4, 4, 100);
  bool same_order = true;
  for (std::size_t i = 0; i < batches.size() && same_order; ++i)
    same_order = batches[i].ids_a == other[i].ids_a;
  CHECK(!same_order);
}

TEST_CASE("batch invariants: mask is 1 exactly at non-PAD ids") {
  auto corpus = tiny_corpus(7);
  auto vocab = build_vocab(corpus);
  for (const auto& batch : batch_examples(corpus, vocab, 6, 3, 5)) {
    for (std::size_t i = 0; i < batch.size; ++i) {
      const auto ids = batch.row_ids_a(i);
      const auto mask = batch.row_mask_a(i);
      int real_tokens = 0;
      for (std::size_t t = 0; t < ids.size(); ++t) {
        CHECK((mask[t] == 1) == (ids[t] != Vocabulary::kPadId));
        real_tokens += mask[t];
      }
      CHECK(real_tokens >= 1);
    }
  }
}
