#include "binoculars/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "binoculars/metrics.hpp"
#include "binoculars/numeric.hpp"

namespace binoculars {

void validate_config(const ScoringConfig& config) {
  if (!config.ppl_model || !config.xppl_observer || !config.xppl_performer) {
    throw std::invalid_argument("scoring config is missing a backend role");
  }
  auto ppl = config.ppl_model->descriptor();
  auto obs = config.xppl_observer->descriptor();
  auto perf = config.xppl_performer->descriptor();
  if (ppl.vocab_id != obs.vocab_id || ppl.vocab_id != perf.vocab_id) {
    throw std::runtime_error(
        "tokenizer mismatch: all three scoring roles must share one "
        "tokenizer (" +
        ppl.vocab_id + " / " + obs.vocab_id + " / " + perf.vocab_id + ")");
  }
  if (config.max_tokens < 1)
    throw std::invalid_argument("max_tokens must be >= 1");
  if (config.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

std::vector<int> scored_positions(std::size_t length, bool score_first_token) {
  std::vector<int> positions;
  std::size_t first = score_first_token ? 0 : 1;
  for (std::size_t i = first; i < length; ++i)
    positions.push_back(static_cast<int>(i));
  return positions;
}

double log_ppl(const PredictionMatrix& Y, const TokenSequence& seq,
               std::span<const int> positions) {
  if (positions.empty())
    throw std::invalid_argument("log_ppl: empty position set");
  if (Y.rows.size() != seq.tokens.size())
    throw std::invalid_argument("log_ppl: matrix and sequence lengths differ");
  if (Y.vocab_id != seq.vocab_id)
    throw std::runtime_error("tokenizer mismatch between matrix and sequence");
  KahanSum sum;
  for (int i : positions) {
    if (i < 0 || static_cast<std::size_t>(i) >= Y.rows.size())
      throw std::invalid_argument("log_ppl: position out of range");
    int32_t tok = seq.tokens[static_cast<std::size_t>(i)];
    double lp = Y.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(tok)];
    if (std::isinf(lp)) {
      throw std::domain_error("zero-probability token at position " +
                              std::to_string(i));
    }
    sum.add(-lp);
  }
  return sum.value() / static_cast<double>(positions.size());
}

double cross_ppl(const PredictionMatrix& Y1, const PredictionMatrix& Y2,
                 std::span<const int> positions) {
  if (positions.empty())
    throw std::invalid_argument("cross_ppl: empty position set");
  if (Y1.rows.size() != Y2.rows.size() || Y1.vocab_size != Y2.vocab_size)
    throw std::invalid_argument("cross_ppl: matrix shapes differ");
  if (Y1.vocab_id != Y2.vocab_id)
    throw std::runtime_error("tokenizer mismatch between matrices");
  KahanSum outer;
  for (int i : positions) {
    if (i < 0 || static_cast<std::size_t>(i) >= Y1.rows.size())
      throw std::invalid_argument("cross_ppl: position out of range");
    const auto& p_row = Y1.rows[static_cast<std::size_t>(i)];
    const auto& q_row = Y2.rows[static_cast<std::size_t>(i)];
    KahanSum dot;
    for (std::size_t j = 0; j < p_row.size(); ++j) {
      double p = std::exp(p_row[j]);
      if (p == 0.0) continue;  // 0 * log q := 0
      dot.add(p * q_row[j]);
    }
    outer.add(-dot.value());
  }
  double value = outer.value() / static_cast<double>(positions.size());
  if (!std::isfinite(value)) {
    throw std::domain_error(
        "cross_ppl is not finite: performer assigns zero probability where "
        "the observer has mass");
  }
  return value;
}

double binoculars_ratio(double log_ppl_value, double log_xppl_value) {
  if (!std::isfinite(log_ppl_value) || !std::isfinite(log_xppl_value))
    throw std::domain_error("binoculars_ratio: non-finite input");
  if (log_ppl_value < 0.0 || log_xppl_value < 0.0)
    throw std::domain_error("binoculars_ratio: negative perplexity input");
  if (log_xppl_value == 0.0) {
    throw std::domain_error(
        "degenerate denominator: cross-perplexity is zero (performer "
        "certainty everywhere)");
  }
  return log_ppl_value / log_xppl_value;
}

namespace {

// Core evaluation over an already-tokenized, already-truncated sequence.
BinocularsResult score_tokens(const ScoringConfig& config,
                              const TokenSequence& seq,
                              const std::string& doc_id) {
  auto positions = scored_positions(seq.length(), config.score_first_token);
  if (positions.empty()) {
    throw SkipError("document \"" + doc_id +
                    "\" has no scorable positions (needs at least " +
                    std::string(config.score_first_token ? "1 token" : "2 tokens") +
                    ")");
  }
  PredictionMatrix y_ppl = config.ppl_model->predict(seq);
  PredictionMatrix y_obs = config.xppl_observer->predict(seq);
  PredictionMatrix y_perf = config.xppl_performer->predict(seq);

  BinocularsResult result;
  result.doc_id = doc_id;
  result.log_ppl = log_ppl(y_ppl, seq, positions);
  result.log_xppl = cross_ppl(y_obs, y_perf, positions);
  result.score = binoculars_ratio(result.log_ppl, result.log_xppl);
  result.scored_positions = static_cast<int>(positions.size());
  result.token_count = static_cast<int>(seq.length());
  return result;
}

TokenSequence tokenize_for_scoring(const ScoringConfig& config,
                                   const std::string& text,
                                   const std::string& doc_id) {
  if (text.empty())
    throw SkipError("document \"" + doc_id + "\" is empty");
  TokenSequence seq;
  try {
    seq = config.ppl_model->tokenize(text);
  } catch (const std::invalid_argument& e) {
    throw SkipError("document \"" + doc_id + "\": " + e.what());
  }
  return truncate_prefix(seq, static_cast<std::size_t>(config.max_tokens));
}

}  // namespace

BinocularsResult binoculars_score(const ScoringConfig& config,
                                  const std::string& text,
                                  const std::string& doc_id) {
  validate_config(config);
  auto seq = tokenize_for_scoring(config, text, doc_id);
  return score_tokens(config, seq, doc_id);
}

namespace {

// Fans per-document work out to config.jobs threads. Results land in
// pre-sized slots so output order equals input order regardless of timing;
// the first exception aborts the batch.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(jobs, count);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ScoreBatch score_corpus(const ScoringConfig& config, const Corpus& corpus) {
  validate_config(config);
  std::size_t n = corpus.documents.size();
  std::vector<std::optional<BinocularsResult>> slots(n);
  std::vector<std::optional<SkippedDocument>> skips(n);

  parallel_for(n, config.jobs, [&](std::size_t i) {
    const auto& doc = corpus.documents[i];
    try {
      auto seq = tokenize_for_scoring(config, doc.text, doc.id);
      auto result = score_tokens(config, seq, doc.id);
      result.label = doc.label;
      slots[i] = std::move(result);
    } catch (const SkipError& e) {
      skips[i] = SkippedDocument{doc.id, e.what()};
    }
  });

  ScoreBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) batch.results.push_back(std::move(*slots[i]));
    if (skips[i]) batch.skipped.push_back(std::move(*skips[i]));
  }
  return batch;
}

SweepTable prefix_sweep(const ScoringConfig& config, const Corpus& corpus,
                        std::span<const int> lengths) {
  validate_config(config);
  if (lengths.empty()) throw std::invalid_argument("no sweep lengths given");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 2)
      throw std::invalid_argument("sweep lengths must each be >= 2");
    if (i > 0 && lengths[i] <= lengths[i - 1])
      throw std::invalid_argument("sweep lengths must be strictly increasing");
  }

  std::size_t n = corpus.documents.size();
  std::vector<std::vector<SweepRow>> rows_per_doc(n);
  std::vector<std::optional<SkippedDocument>> skips(n);

  parallel_for(n, config.jobs, [&](std::size_t i) {
    const auto& doc = corpus.documents[i];
    try {
      auto seq = tokenize_for_scoring(config, doc.text, doc.id);
      if (scored_positions(seq.length(), config.score_first_token).empty()) {
        throw SkipError("document \"" + doc.id +
                        "\" has no scorable positions");
      }
      // Row i of a prediction depends only on tokens before i, so one
      // full-length predict serves every prefix.
      PredictionMatrix y_ppl = config.ppl_model->predict(seq);
      PredictionMatrix y_obs = config.xppl_observer->predict(seq);
      PredictionMatrix y_perf = config.xppl_performer->predict(seq);
      for (int k : lengths) {
        auto k_eff = std::min<std::size_t>(static_cast<std::size_t>(k),
                                           seq.length());
        auto positions =
            scored_positions(k_eff, config.score_first_token);
        if (positions.empty()) continue;
        TokenSequence prefix = truncate_prefix(seq, k_eff);
        PredictionMatrix sub_ppl{{y_ppl.rows.begin(),
                                  y_ppl.rows.begin() + k_eff},
                                 y_ppl.vocab_id, y_ppl.vocab_size};
        double lp = log_ppl(sub_ppl, prefix, positions);
        KahanSum outer;
        for (int pos : positions) {
          const auto& p_row = y_obs.rows[static_cast<std::size_t>(pos)];
          const auto& q_row = y_perf.rows[static_cast<std::size_t>(pos)];
          KahanSum dot;
          for (std::size_t j = 0; j < p_row.size(); ++j) {
            double p = std::exp(p_row[j]);
            if (p == 0.0) continue;
            dot.add(p * q_row[j]);
          }
          outer.add(-dot.value());
        }
        double xp = outer.value() / static_cast<double>(positions.size());
        SweepRow row;
        row.doc_id = doc.id;
        row.prefix_len = static_cast<int>(k_eff);
        row.score = binoculars_ratio(lp, xp);
        row.label = doc.label;
        rows_per_doc[i].push_back(std::move(row));
      }
    } catch (const SkipError& e) {
      skips[i] = SkippedDocument{doc.id, e.what()};
    }
  });

  SweepTable table;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& row : rows_per_doc[i]) table.rows.push_back(std::move(row));
    if (skips[i]) table.skipped.push_back(std::move(*skips[i]));
  }
  return table;
}

std::string result_to_jsonl(const BinocularsResult& result) {
  std::ostringstream out;
  out << "{\"id\":" << nlohmann::json(result.doc_id).dump()
      << ",\"log_ppl\":" << format_double(result.log_ppl)
      << ",\"log_xppl\":" << format_double(result.log_xppl)
      << ",\"score\":" << format_double(result.score)
      << ",\"tokens\":" << result.token_count;
  if (result.label != Label::unlabeled)
    out << ",\"label\":\"" << label_name(result.label) << "\"";
  out << "}";
  return out.str();
}

ScoredFile read_scores_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open())
    throw std::runtime_error("cannot open scores file: " + path);
  ScoredFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": malformed JSON (" + e.what() + ")");
    }
    if (obj.contains("meta")) {
      const auto& meta = obj["meta"];
      if (meta.is_object() && meta.contains("corpus"))
        file.corpus_name = meta["corpus"].get<std::string>();
      continue;
    }
    BinocularsResult r;
    r.doc_id = obj.at("id").get<std::string>();
    r.log_ppl = obj.at("log_ppl").get<double>();
    r.log_xppl = obj.at("log_xppl").get<double>();
    r.score = obj.at("score").get<double>();
    r.token_count = obj.value("tokens", 0);
    if (obj.contains("label"))
      r.label = parse_label(obj["label"].get<std::string>());
    file.results.push_back(std::move(r));
  }
  if (file.results.empty())
    throw std::runtime_error("no score lines in " + path);
  return file;
}

}  // namespace binoculars
