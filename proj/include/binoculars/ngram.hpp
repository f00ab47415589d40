#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "binoculars/backend.hpp"

namespace binoculars {

/// Add-alpha smoothed n-gram model with a sampling temperature.
///
/// Counts are keyed by exact (order-1)-token contexts gathered from sliding
/// windows of length order. A lookup with any other context length misses and
/// falls back to the smoothed base distribution, so an order larger than
/// every training document degenerates to alpha-smoothed uniform.
///
/// For a context ctx: p(j|ctx) = (count(ctx,j) + alpha) / (total(ctx) + alpha*V),
/// then annealed as p^(1/temperature) and renormalized. alpha > 0 keeps every
/// probability strictly positive; alpha = 0 is permitted for hand-built test
/// tables and yields -inf log entries at unseen tokens.
class NgramModel {
 public:
  NgramModel(int order, int32_t vocab_size, double alpha,
             double temperature = 1.0,
             std::optional<int32_t> end_token = std::nullopt);

  int order() const { return order_; }
  int32_t vocab_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  double temperature() const { return temperature_; }
  std::optional<int32_t> end_token() const { return end_token_; }

  void add_count(std::span<const int32_t> context, int32_t token,
                 int64_t count = 1);
  void add_document(std::span<const int32_t> tokens);

  int64_t count(std::span<const int32_t> context, int32_t token) const;
  int64_t context_total(std::span<const int32_t> context) const;
  std::size_t context_count() const { return table_.size(); }

  // Visits every (context, token, count) triple in lexicographic context
  // order with token ids ascending; serialization stays byte-stable.
  void for_each_count(
      const std::function<void(std::span<const int32_t>, int32_t, int64_t)>&
          visit) const;

  // Natural-log next-token distribution given the (possibly longer) history;
  // only the trailing order-1 tokens form the context key.
  std::vector<double> log_distribution(std::span<const int32_t> history) const;
  std::vector<double> distribution(std::span<const int32_t> history) const;

  // Same counts, different smoothing/annealing; used to build observer /
  // performer / generator variants from one fit.
  NgramModel with_params(double alpha, double temperature) const;

 private:
  struct ContextCounts {
    std::unordered_map<int32_t, int64_t> counts;
    int64_t total = 0;
  };

  std::span<const int32_t> context_key(std::span<const int32_t> history) const;

  int order_;
  int32_t vocab_size_;
  double alpha_;
  double temperature_;
  std::optional<int32_t> end_token_;
  // std::map keeps serialization deterministic.
  std::map<std::vector<int32_t>, ContextCounts> table_;
};

// pre: order >= 1, alpha > 0, corpus non-empty.
NgramModel fit_ngram(const Corpus& corpus, const Tokenizer& tokenizer,
                     int order, double alpha, double temperature = 1.0);

/// Deterministic synthetic backend: a Tokenizer plus an NgramModel.
class NgramBackend : public LogitBackend {
 public:
  NgramBackend(std::string name, Tokenizer tokenizer, NgramModel model,
               Role role_hint = Role::generic);

  BackendDescriptor descriptor() const override;
  TokenSequence tokenize(const std::string& text) const override;
  std::string detokenize(std::span<const int32_t> tokens) const override;
  PredictionMatrix predict(const TokenSequence& seq) const override;
  TokenSequence sample(const TokenSequence& prompt, int max_new,
                       uint64_t seed) const override;

  const NgramModel& model() const { return model_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }

 private:
  std::string name_;
  Tokenizer tokenizer_;
  NgramModel model_;
  Role role_hint_;
};

// Model files are JSON with deterministic key and context ordering.
void save_ngram_backend(const NgramBackend& backend, const std::string& path);
std::shared_ptr<NgramBackend> load_ngram_backend(const std::string& path,
                                                 Role role_hint = Role::generic);

}  // namespace binoculars
