#include "binoculars/backend.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "binoculars/numeric.hpp"

namespace binoculars {

void check_simplex(const PredictionMatrix& m, double tol) {
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& row = m.rows[i];
    if (row.size() != static_cast<std::size_t>(m.vocab_size)) {
      throw std::runtime_error("prediction row " + std::to_string(i) +
                               " has wrong width");
    }
    KahanSum sum;
    for (double lp : row) {
      if (lp > 0.0) {
        throw std::runtime_error("prediction row " + std::to_string(i) +
                                 " has a positive log-probability");
      }
      sum.add(std::exp(lp));
    }
    if (std::abs(sum.value() - 1.0) > tol) {
      throw std::runtime_error("prediction row " + std::to_string(i) +
                               " does not sum to 1 (got " +
                               std::to_string(sum.value()) + ")");
    }
  }
}

std::string role_name(Role role) {
  switch (role) {
    case Role::observer: return "observer";
    case Role::performer: return "performer";
    case Role::generic: return "generic";
  }
  throw std::logic_error("unreachable role");
}

namespace {

constexpr int32_t kByteVocab = 256;

// FNV-1a, enough to fingerprint a word list.
uint64_t fnv1a(const std::string& data) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x00000100000001B3ull;
  }
  return h;
}

struct Utf8Decoder {
  const std::string& text;
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }

  // Returns the next code point; throws on malformed input.
  uint32_t next() {
    unsigned char c0 = static_cast<unsigned char>(text[pos]);
    auto cont = [&](std::size_t off) -> uint32_t {
      if (pos + off >= text.size()) throw std::runtime_error("truncated UTF-8");
      unsigned char c = static_cast<unsigned char>(text[pos + off]);
      if ((c & 0xC0) != 0x80) throw std::runtime_error("malformed UTF-8");
      return c & 0x3F;
    };
    if (c0 < 0x80) {
      pos += 1;
      return c0;
    }
    if ((c0 & 0xE0) == 0xC0) {
      uint32_t cp = (uint32_t(c0 & 0x1F) << 6) | cont(1);
      pos += 2;
      if (cp < 0x80) throw std::runtime_error("overlong UTF-8");
      return cp;
    }
    if ((c0 & 0xF0) == 0xE0) {
      uint32_t cp = (uint32_t(c0 & 0x0F) << 12) | (cont(1) << 6) | cont(2);
      pos += 3;
      if (cp < 0x800) throw std::runtime_error("overlong UTF-8");
      return cp;
    }
    if ((c0 & 0xF8) == 0xF0) {
      uint32_t cp = (uint32_t(c0 & 0x07) << 18) | (cont(1) << 12) |
                    (cont(2) << 6) | cont(3);
      pos += 4;
      if (cp < 0x10000 || cp > 0x10FFFF)
        throw std::runtime_error("invalid UTF-8 code point");
      return cp;
    }
    throw std::runtime_error("malformed UTF-8 lead byte");
  }
};

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string word;
  while (in >> word) words.push_back(word);
  return words;
}

}  // namespace

Tokenizer Tokenizer::bytes() {
  Tokenizer t;
  t.byte_mode_ = true;
  t.vocab_size_ = kByteVocab;
  t.vocab_id_ = "byte-256";
  return t;
}

Tokenizer Tokenizer::words(std::vector<std::string> vocabulary) {
  Tokenizer t;
  t.byte_mode_ = false;
  bool has_unk = false;
  for (const auto& w : vocabulary) {
    if (w.empty()) throw std::invalid_argument("empty word in vocabulary");
    for (char c : w) {
      if (std::isspace(static_cast<unsigned char>(c)))
        throw std::invalid_argument("word contains whitespace: \"" + w + "\"");
    }
    if (w == "<unk>") has_unk = true;
  }
  if (!has_unk) vocabulary.push_back("<unk>");
  if (vocabulary.size() < 2)
    throw std::invalid_argument("word vocabulary needs at least 2 entries");
  t.words_ = std::move(vocabulary);
  t.vocab_size_ = static_cast<int32_t>(t.words_.size());
  std::string joined;
  for (std::size_t i = 0; i < t.words_.size(); ++i) {
    joined += t.words_[i];
    joined += '\n';
    if (t.words_[i] == "<unk>" && t.unk_id_ < 0)
      t.unk_id_ = static_cast<int32_t>(i);
  }
  std::ostringstream id;
  id << "word-" << t.words_.size() << "-" << std::hex << fnv1a(joined);
  t.vocab_id_ = id.str();
  return t;
}

TokenSequence Tokenizer::encode(const std::string& text) const {
  if (text.empty()) throw std::invalid_argument("cannot tokenize empty text");
  TokenSequence seq;
  seq.vocab_id = vocab_id_;
  seq.vocab_size = vocab_size_;
  if (byte_mode_) {
    Utf8Decoder dec{text};
    while (!dec.done()) {
      uint32_t cp = dec.next();
      // Code points beyond the byte vocabulary collapse to '?'.
      seq.tokens.push_back(cp <= 0xFF ? static_cast<int32_t>(cp) : 0x3F);
    }
  } else {
    auto words = split_whitespace(text);
    if (words.empty())
      throw std::invalid_argument("cannot tokenize whitespace-only text");
    std::unordered_map<std::string, int32_t> index;
    for (std::size_t i = 0; i < words_.size(); ++i)
      index.emplace(words_[i], static_cast<int32_t>(i));
    for (const auto& w : words) {
      auto it = index.find(w);
      seq.tokens.push_back(it == index.end() ? unk_id_ : it->second);
    }
  }
  return seq;
}

std::string Tokenizer::decode(std::span<const int32_t> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    int32_t tok = tokens[i];
    if (tok < 0 || tok >= vocab_size_) {
      throw std::invalid_argument("token id " + std::to_string(tok) +
                                  " outside vocabulary of size " +
                                  std::to_string(vocab_size_));
    }
    if (byte_mode_) {
      append_utf8(out, static_cast<uint32_t>(tok));
    } else {
      if (i > 0) out.push_back(' ');
      out += words_[static_cast<std::size_t>(tok)];
    }
  }
  return out;
}

}  // namespace binoculars
