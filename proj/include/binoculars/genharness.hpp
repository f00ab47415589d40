#pragma once

#include <cstdint>

#include "binoculars/backend.hpp"

namespace binoculars {

/// Prompt-peel generation: the first prompt_tokens tokens of a human document
/// seed the generator, and only the continuation (prompt removed in token
/// space) becomes the machine counterpart.
struct GenerationSpec {
  int prompt_tokens = 50;
  int max_new = 512;
  uint64_t seed = 0;
  BackendPtr generator;
};

// pre: doc tokenizes to more than prompt_tokens tokens (SkipError otherwise).
// post: machine-labeled document, id = doc.id + "#gen", generator = backend
// name, text = detokenized continuation only.
LabeledDocument generate_counterpart(const LabeledDocument& doc,
                                     const GenerationSpec& spec);

struct GenerationBatch {
  Corpus corpus;
  std::vector<SkippedDocument> skipped;
};

// One counterpart per human document; per-document seeds derive from
// (spec.seed, document index) so results are order-independent.
GenerationBatch generate_corpus(const Corpus& humans,
                                const GenerationSpec& spec);

// n_docs documents of len uniformly random token IDs, detokenized, labeled
// unlabeled; deterministic per seed. pre: len >= 2.
Corpus random_token_corpus(const LogitBackend& backend, int n_docs, int len,
                           uint64_t seed);

}  // namespace binoculars
