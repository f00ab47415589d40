#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "binoculars/backend.hpp"

namespace binoculars {

/// Three model roles behind one shared tokenizer. The numerator model scores
/// plain log-perplexity; the observer/performer pair scores cross-perplexity
/// (observer probabilities dotted with performer log-probabilities).
struct ScoringConfig {
  BackendPtr ppl_model;
  BackendPtr xppl_observer;
  BackendPtr xppl_performer;
  int max_tokens = 512;
  bool score_first_token = false;
  int jobs = 1;
};

// Enforces the shared-tokenizer requirement across all three roles.
void validate_config(const ScoringConfig& config);

struct BinocularsResult {
  std::string doc_id;
  double log_ppl = 0.0;   // nats per scored token
  double log_xppl = 0.0;  // nats per scored token
  double score = 0.0;     // log_ppl / log_xppl; low means machine-like
  int scored_positions = 0;
  int token_count = 0;  // after truncation
  Label label = Label::unlabeled;
};

// Positions entering the averages. Position 0 has no context and is skipped
// unless score_first_token is set (empty-context rows are tokenizer-dependent,
// e.g. BOS conventions).
std::vector<int> scored_positions(std::size_t length, bool score_first_token);

// Average negative log-likelihood of the observed tokens over the given
// positions. A -inf entry at an observed token is a "zero-probability token"
// error; the position set must be non-empty.
double log_ppl(const PredictionMatrix& Y, const TokenSequence& seq,
               std::span<const int> positions);

// Average per-position cross-entropy: -(1/|P|) sum_i sum_j exp(Y1[i][j]) * Y2[i][j].
// Zero-probability observer entries contribute nothing (0 * log 0 = 0).
double cross_ppl(const PredictionMatrix& Y1, const PredictionMatrix& Y2,
                 std::span<const int> positions);

// The detection statistic itself: log-perplexity over cross-perplexity.
// log_xppl = 0 is a "degenerate denominator" error.
double binoculars_ratio(double log_ppl_value, double log_xppl_value);

// Tokenizes once with the shared tokenizer, truncates to max_tokens, and
// evaluates all three roles over the same position set. Throws SkipError
// when the text has too few tokens to score.
BinocularsResult binoculars_score(const ScoringConfig& config,
                                  const std::string& text,
                                  const std::string& doc_id = "");

struct ScoreBatch {
  std::vector<BinocularsResult> results;     // input order
  std::vector<SkippedDocument> skipped;      // input order
};

// One result per scorable document. Documents failing preconditions land in
// the skipped list; backend failures abort the whole batch.
ScoreBatch score_corpus(const ScoringConfig& config, const Corpus& corpus);

struct SweepRow {
  std::string doc_id;
  int prefix_len = 0;
  double score = 0.0;
  Label label = Label::unlabeled;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<SkippedDocument> skipped;
};

// Re-scores every document truncated to each length (lengths strictly
// increasing, each >= 2). Lengths beyond a document reproduce its full score.
SweepTable prefix_sweep(const ScoringConfig& config, const Corpus& corpus,
                        std::span<const int> lengths);

// Score output line: {"id":str, "log_ppl":float, "log_xppl":float,
// "score":float, "tokens":int, "label":str?}. Floats carry 17 significant
// digits. Sweep rows add "prefix_len":int.
std::string result_to_jsonl(const BinocularsResult& result);

struct ScoredFile {
  std::string corpus_name;  // from the meta header, if present
  std::vector<BinocularsResult> results;
};

ScoredFile read_scores_jsonl(const std::string& path);

}  // namespace binoculars
