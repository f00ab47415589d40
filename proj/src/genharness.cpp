#include "binoculars/genharness.hpp"

#include <random>

#include "binoculars/numeric.hpp"

namespace binoculars {

LabeledDocument generate_counterpart(const LabeledDocument& doc,
                                     const GenerationSpec& spec) {
  if (!spec.generator)
    throw std::invalid_argument("generation spec has no generator backend");
  if (spec.prompt_tokens < 1)
    throw std::invalid_argument("prompt_tokens must be >= 1");
  if (spec.max_new < 1) throw std::invalid_argument("max_new must be >= 1");
  if (doc.label != Label::human) {
    throw SkipError("document \"" + doc.id + "\" is not labeled human");
  }

  TokenSequence seq;
  try {
    seq = spec.generator->tokenize(doc.text);
  } catch (const std::invalid_argument& e) {
    throw SkipError("document \"" + doc.id + "\": " + e.what());
  }
  auto prompt_len = static_cast<std::size_t>(spec.prompt_tokens);
  if (seq.length() <= prompt_len) {
    throw SkipError("document \"" + doc.id + "\" too short: " +
                    std::to_string(seq.length()) + " tokens, prompt needs " +
                    std::to_string(prompt_len + 1));
  }

  TokenSequence prompt = truncate_prefix(seq, prompt_len);
  TokenSequence sampled =
      spec.generator->sample(prompt, spec.max_new, spec.seed);
  // Prompt removal happens in token space, before detokenization.
  std::span<const int32_t> continuation =
      std::span<const int32_t>(sampled.tokens).subspan(prompt_len);

  LabeledDocument machine;
  machine.id = doc.id + "#gen";
  machine.text = spec.generator->detokenize(continuation);
  machine.label = Label::machine;
  machine.source = doc.source;
  machine.generator = spec.generator->descriptor().name;
  return machine;
}

GenerationBatch generate_corpus(const Corpus& humans,
                                const GenerationSpec& spec) {
  GenerationBatch batch;
  batch.corpus.name = humans.name + "-gen";
  for (std::size_t i = 0; i < humans.documents.size(); ++i) {
    GenerationSpec doc_spec = spec;
    doc_spec.seed = derive_seed(spec.seed, i);
    try {
      batch.corpus.documents.push_back(
          generate_counterpart(humans.documents[i], doc_spec));
    } catch (const SkipError& e) {
      batch.skipped.push_back({humans.documents[i].id, e.what()});
    }
  }
  return batch;
}

Corpus random_token_corpus(const LogitBackend& backend, int n_docs, int len,
                           uint64_t seed) {
  if (n_docs < 1) throw std::invalid_argument("n_docs must be >= 1");
  if (len < 2) throw std::invalid_argument("len must be >= 2");
  auto descriptor = backend.descriptor();
  Corpus corpus;
  corpus.name = "random-tokens";
  for (int d = 0; d < n_docs; ++d) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<uint64_t>(d)));
    std::vector<int32_t> tokens(static_cast<std::size_t>(len));
    for (auto& t : tokens) {
      t = static_cast<int32_t>(
          bounded_uint(rng(), static_cast<uint64_t>(descriptor.vocab_size)));
    }
    LabeledDocument doc;
    doc.id = "rand-" + std::to_string(d);
    doc.text = backend.detokenize(tokens);
    doc.label = Label::unlabeled;
    doc.source = "random-tokens";
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace binoculars
