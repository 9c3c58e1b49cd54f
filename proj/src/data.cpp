#include "coin/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coin/errors.hpp"

namespace coin {

namespace {

// Decodes one UTF-8 codepoint starting at s[i]; advances i. Invalid bytes
// are passed through as single-byte codepoints rather than rejected.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
  const unsigned char c = s[i];
  std::size_t extra = 0;
  char32_t cp = c;
  if (c >= 0xF0) {
    extra = 3;
    cp = c & 0x07;
  } else if (c >= 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if (c >= 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  }
  if (extra > 0 && i + extra >= s.size()) {
    extra = 0;
    cp = c;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    const unsigned char cc = s[i + k];
    if ((cc & 0xC0) != 0x80) {  // malformed continuation; emit lead byte alone
      extra = 0;
      cp = c;
      break;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void append_codepoint(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_strip_punct(char32_t cp) {
  return cp < 0x80 && std::ispunct(static_cast<int>(cp));
}

char32_t ascii_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  return cp;
}

std::vector<std::string> split_codepoint_words(const std::string& text) {
  std::vector<std::string> words;
  std::vector<char32_t> current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      if (!current.empty()) {
        std::string w;
        for (char32_t c : current) append_codepoint(w, c);
        words.push_back(std::move(w));
        current.clear();
      }
    } else {
      current.push_back(cp);
    }
  }
  if (!current.empty()) {
    std::string w;
    for (char32_t c : current) append_codepoint(w, c);
    words.push_back(std::move(w));
  }
  return words;
}

std::string strip_and_lower(const std::string& word) {
  std::vector<char32_t> cps;
  std::size_t i = 0;
  while (i < word.size()) cps.push_back(next_codepoint(word, i));
  std::size_t lo = 0, hi = cps.size();
  while (lo < hi && is_strip_punct(cps[lo])) ++lo;
  while (hi > lo && is_strip_punct(cps[hi - 1])) --hi;
  std::string out;
  for (std::size_t k = lo; k < hi; ++k) append_codepoint(out, ascii_lower(cps[k]));
  return out;
}

}  // namespace

TokenMode token_mode_from_string(const std::string& s) {
  if (s == "word") return TokenMode::kWord;
  if (s == "char") return TokenMode::kChar;
  throw ConfigError("unknown token mode '" + s + "' (expected 'word' or 'char')");
}

std::string to_string(TokenMode mode) { return mode == TokenMode::kWord ? "word" : "char"; }

std::vector<std::string> tokenize(const std::string& text, TokenMode mode) {
  std::vector<std::string> tokens;
  if (mode == TokenMode::kWord) {
    for (const auto& w : split_codepoint_words(text)) {
      std::string t = strip_and_lower(w);
      if (!t.empty()) tokens.push_back(std::move(t));
    }
  } else {
    std::size_t i = 0;
    while (i < text.size()) {
      const char32_t cp = next_codepoint(text, i);
      if (is_unicode_space(cp)) continue;
      std::string t;
      append_codepoint(t, cp);
      tokens.push_back(std::move(t));
    }
  }
  if (tokens.empty()) throw ConfigError("tokenize: no tokens in text \"" + text + "\"");
  return tokens;
}

std::vector<PairExample> load_pairs_tsv(const std::string& path, TokenMode mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  std::vector<PairExample> out;
  std::vector<std::string> bad;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      bad.push_back("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                    std::to_string(fields.size()));
      continue;
    }
    if (fields[2] != "0" && fields[2] != "1") {
      bad.push_back("line " + std::to_string(line_no) + ": label must be 0 or 1, got \"" +
                    fields[2] + "\"");
      continue;
    }
    PairExample ex;
    ex.label = fields[2] == "1" ? 1 : 0;
    try {
      ex.a = tokenize(fields[0], mode);
      ex.b = tokenize(fields[1], mode);
    } catch (const ConfigError&) {
      bad.push_back("line " + std::to_string(line_no) + ": sentence tokenizes to nothing");
      continue;
    }
    out.push_back(std::move(ex));
  }
  if (!bad.empty()) {
    std::string msg = "malformed lines in " + path + ":";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  return out;
}

Vocabulary::Vocabulary() {
  tokens_ = {kPadToken, kUnkToken};
  to_id_[kPadToken] = kPadId;
  to_id_[kUnkToken] = kUnkId;
}

int Vocabulary::id(const std::string& token) const {
  auto it = to_id_.find(token);
  return it == to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ConfigError("vocabulary id out of range: " + std::to_string(id));
  }
  return tokens_[id];
}

void Vocabulary::add(const std::string& token) {
  if (to_id_.count(token)) return;
  to_id_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = i;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vocabulary JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("vocabulary JSON must be an object of token -> id");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::size_t id = it.value().get<std::size_t>();
    if (id >= tokens.size()) throw ConfigError("vocabulary JSON: ids are not contiguous from 0");
    if (seen[id]) throw ConfigError("vocabulary JSON: duplicate id " + std::to_string(id));
    seen[id] = true;
    tokens[id] = it.key();
  }
  if (tokens.size() < 2 || tokens[kPadId] != kPadToken || tokens[kUnkId] != kUnkToken) {
    throw ConfigError("vocabulary JSON: ids 0/1 must be the PAD/UNK tokens");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write vocabulary to " + path);
  out << to_json() << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open vocabulary file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    mix(tokens_[i]);
    mix("\t" + std::to_string(i) + "\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocabulary build_vocab(const std::vector<PairExample>& examples, std::size_t min_count) {
  if (examples.empty()) throw ConfigError("build_vocab: empty example list");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& ex : examples) {
    for (const auto& t : ex.a) ++freq[t];
    for (const auto& t : ex.b) ++freq[t];
  }
  freq.erase(Vocabulary::kPadToken);
  freq.erase(Vocabulary::kUnkToken);
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [token, count] : ranked) {
    if (count >= min_count) v.add(token);
  }
  return v;
}

namespace {

TensorPtr init_embedding_rows(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  auto table = uniform_init({vocab_size, dim}, rng, -0.05, 0.05);
  for (std::size_t j = 0; j < dim; ++j) table->data[Vocabulary::kPadId * dim + j] = real(0);
  return table;
}

}  // namespace

EmbeddingTable load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                          std::size_t dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embeddings file: " + path);
  // Draw the uniform fallback rows first so OOV vectors depend only on
  // (seed, vocab), not on file order.
  EmbeddingTable emb;
  emb.dim = dim;
  emb.trainable = false;
  emb.table = init_embedding_rows(vocab.size(), dim, seed);
  emb.table->requires_grad = false;

  std::vector<bool> filled(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) {
      throw ConfigError("embeddings " + path + " line " + std::to_string(line_no) +
                        ": expected token followed by " + std::to_string(dim) + " values");
    }
    const std::string token = line.substr(0, sp);
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (filled[id]) continue;  // first occurrence wins
    std::size_t count = 0;
    const char* p = line.c_str() + sp;
    char* end = nullptr;
    std::vector<real> row(dim);
    while (true) {
      while (*p == ' ') ++p;
      if (*p == '\0') break;
      const double v = std::strtod(p, &end);
      if (end == p) {
        throw ConfigError("embeddings " + path + " line " + std::to_string(line_no) +
                          ": unparseable value");
      }
      if (count < dim) row[count] = static_cast<real>(v);
      ++count;
      p = end;
    }
    if (count != dim) {
      throw ConfigError("embeddings " + path + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " values, got " + std::to_string(count));
    }
    if (id != Vocabulary::kPadId) {
      std::copy(row.begin(), row.end(), emb.table->data.begin() + id * dim);
    }
    filled[id] = true;
  }
  return emb;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable emb;
  emb.dim = dim;
  emb.trainable = true;
  emb.table = init_embedding_rows(vocab.size(), dim, seed);
  emb.table->requires_grad = true;
  return emb;
}

std::pair<std::vector<int>, std::vector<int>> pad_or_crop(const std::vector<int>& ids,
                                                          std::size_t L) {
  if (L == 0) throw ConfigError("pad_or_crop: L must be at least 1");
  std::vector<int> out(L, Vocabulary::kPadId);
  std::vector<int> mask(L, 0);
  const std::size_t n = std::min(ids.size(), L);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = ids[i];
    mask[i] = 1;
  }
  return {out, mask};
}

std::vector<int> Batch::row_ids_a(std::size_t i) const {
  return {ids_a.begin() + i * seq_len, ids_a.begin() + (i + 1) * seq_len};
}
std::vector<int> Batch::row_ids_b(std::size_t i) const {
  return {ids_b.begin() + i * seq_len, ids_b.begin() + (i + 1) * seq_len};
}
std::vector<int> Batch::row_mask_a(std::size_t i) const {
  return {mask_a.begin() + i * seq_len, mask_a.begin() + (i + 1) * seq_len};
}
std::vector<int> Batch::row_mask_b(std::size_t i) const {
  return {mask_b.begin() + i * seq_len, mask_b.begin() + (i + 1) * seq_len};
}

Batch make_batch(const std::vector<PairExample>& examples, const Vocabulary& vocab,
                 std::size_t L) {
  Batch batch;
  batch.size = examples.size();
  batch.seq_len = L;
  for (const auto& ex : examples) {
    auto [ia, ma] = pad_or_crop(vocab.encode(ex.a), L);
    auto [ib, mb] = pad_or_crop(vocab.encode(ex.b), L);
    batch.ids_a.insert(batch.ids_a.end(), ia.begin(), ia.end());
    batch.mask_a.insert(batch.mask_a.end(), ma.begin(), ma.end());
    batch.ids_b.insert(batch.ids_b.end(), ib.begin(), ib.end());
    batch.mask_b.insert(batch.mask_b.end(), mb.begin(), mb.end());
    batch.labels.push_back(ex.label);
  }
  return batch;
}

std::vector<Batch> batch_examples(const std::vector<PairExample>& examples,
                                  const Vocabulary& vocab, std::size_t L,
                                  std::size_t batch_size, std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch_examples: batch_size must be at least 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  std::vector<Batch> batches;
  std::vector<PairExample> slice;
  for (std::size_t i = 0; i < order.size(); ++i) {
    slice.push_back(examples[order[i]]);
    if (slice.size() == batch_size || i + 1 == order.size()) {
      batches.push_back(make_batch(slice, vocab, L));
      slice.clear();
    }
  }
  return batches;
}

}  // namespace coin
