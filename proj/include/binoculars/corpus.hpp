#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace binoculars {

enum class Label { human, machine, unlabeled };

std::string label_name(Label label);
Label parse_label(const std::string& name);  // throws on unknown names

/// One document of an evaluation or scoring corpus.
struct LabeledDocument {
  std::string id;
  std::string text;  // UTF-8
  Label label = Label::unlabeled;
  std::string source;                    // origin tag, e.g. "news"; may be empty
  std::optional<std::string> generator;  // model that produced machine text
};

struct Corpus {
  std::string name;
  std::vector<LabeledDocument> documents;
};

// Thrown when a single document fails a per-document precondition. Batch
// operations catch this and report the document as skipped instead of
// aborting the run.
struct SkipError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SkippedDocument {
  std::string id;
  std::string reason;
};

void validate_document(const LabeledDocument& doc);

// JSONL corpus format, one document per line, UTF-8, LF line endings:
//   {"id":str?, "text":str, "label":"human"|"machine"|"unlabeled",
//    "source":str?, "generator":str?}
// Missing ids are assigned "line-<n>". A leading {"meta":...} header line
// (as written by the CLI) is skipped on load.
Corpus load_corpus(const std::string& path);
Corpus read_corpus_jsonl(std::istream& in, const std::string& name);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus_jsonl(std::ostream& out, const Corpus& corpus);
std::string document_to_jsonl(const LabeledDocument& doc);

// Slice a raw text into fixed-size windows (documents). Cut points are
// snapped backward onto UTF-8 boundaries so no multi-byte sequence is split.
Corpus chunk_text(const std::string& name, const std::string& text,
                  int window_bytes, int stride_bytes, Label label,
                  const std::string& source = "");

/// Token IDs for one document plus the identity of the tokenizer that
/// produced them. vocab_size bounds every ID.
struct TokenSequence {
  std::vector<int32_t> tokens;
  std::string vocab_id;
  int32_t vocab_size = 0;

  std::size_t length() const { return tokens.size(); }
};

// First min(k, length) tokens; k = 0 is an error (nothing is scorable).
TokenSequence truncate_prefix(const TokenSequence& seq, std::size_t k);

}  // namespace binoculars
