#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "binoculars/corpus.hpp"

namespace binoculars {

/// Per-position next-token distributions for one sequence. rows[i] holds
/// natural-log probabilities over the vocabulary for the token at position i
/// given tokens 0..i-1; row 0 is the model's empty-context distribution.
struct PredictionMatrix {
  std::vector<std::vector<double>> rows;  // L x V, natural-log probabilities
  std::string vocab_id;
  int32_t vocab_size = 0;

  std::size_t length() const { return rows.size(); }
};

// Every row must exponentiate and sum to 1 within tol, entries <= 0.
void check_simplex(const PredictionMatrix& m, double tol = 1e-4);

enum class Role { observer, performer, generic };

std::string role_name(Role role);

struct BackendDescriptor {
  std::string name;
  int32_t vocab_size = 0;
  std::string vocab_id;
  Role role_hint = Role::generic;
};

/// Text <-> token IDs for the synthetic backends. Byte mode maps Unicode
/// code points 0..255 to token IDs (vocab 256); code points above 255 encode
/// as '?'. Decoding therefore always yields valid UTF-8, so any token
/// sequence survives a JSONL round trip. Word mode splits on whitespace and
/// maps unknown words to a designated <unk> id.
class Tokenizer {
 public:
  static Tokenizer bytes();
  static Tokenizer words(std::vector<std::string> vocabulary);

  TokenSequence encode(const std::string& text) const;
  std::string decode(std::span<const int32_t> tokens) const;

  int32_t vocab_size() const { return vocab_size_; }
  const std::string& vocab_id() const { return vocab_id_; }
  bool byte_mode() const { return byte_mode_; }
  const std::vector<std::string>& word_list() const { return words_; }

 private:
  Tokenizer() = default;

  bool byte_mode_ = true;
  int32_t vocab_size_ = 0;
  std::string vocab_id_;
  std::vector<std::string> words_;  // word mode only; last entry is <unk>
  int32_t unk_id_ = -1;
};

/// The pluggable contract between scoring and whatever produces logits:
/// a tokenizer plus per-position full-vocabulary log-probability rows.
class LogitBackend {
 public:
  virtual ~LogitBackend() = default;

  virtual BackendDescriptor descriptor() const = 0;

  // pre: text non-empty. post: all IDs < vocab_size.
  virtual TokenSequence tokenize(const std::string& text) const = 0;

  // Inverse of tokenize for synthetic backends; remote backends may not
  // support it (the wire protocol has no detokenize op).
  virtual std::string detokenize(std::span<const int32_t> tokens) const = 0;

  // pre: seq.vocab_id matches this backend ("tokenizer mismatch" otherwise).
  // post: one row per position, row i conditioned on tokens 0..i-1.
  virtual PredictionMatrix predict(const TokenSequence& seq) const = 0;

  // Ancestral sampling: returns prompt ++ up to max_new generated tokens,
  // stopping early only at the model's designated end token. Deterministic
  // for a fixed (model, prompt, seed).
  virtual TokenSequence sample(const TokenSequence& prompt, int max_new,
                               uint64_t seed) const = 0;
};

using BackendPtr = std::shared_ptr<const LogitBackend>;

}  // namespace binoculars
