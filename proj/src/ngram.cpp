#include "binoculars/ngram.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binoculars/numeric.hpp"

namespace binoculars {

NgramModel::NgramModel(int order, int32_t vocab_size, double alpha,
                       double temperature, std::optional<int32_t> end_token)
    : order_(order),
      vocab_size_(vocab_size),
      alpha_(alpha),
      temperature_(temperature),
      end_token_(end_token) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (!(temperature > 0.0))
    throw std::invalid_argument("temperature must be > 0");
  if (end_token && (*end_token < 0 || *end_token >= vocab_size))
    throw std::invalid_argument("end token outside vocabulary");
}

void NgramModel::add_count(std::span<const int32_t> context, int32_t token,
                           int64_t count) {
  if (context.size() != static_cast<std::size_t>(order_ - 1)) {
    throw std::invalid_argument("context length must equal order-1");
  }
  for (int32_t t : context) {
    if (t < 0 || t >= vocab_size_)
      throw std::invalid_argument("context token outside vocabulary");
  }
  if (token < 0 || token >= vocab_size_)
    throw std::invalid_argument("counted token outside vocabulary");
  if (count <= 0) throw std::invalid_argument("count must be positive");
  auto& slot = table_[std::vector<int32_t>(context.begin(), context.end())];
  slot.counts[token] += count;
  slot.total += count;
}

void NgramModel::add_document(std::span<const int32_t> tokens) {
  auto n = static_cast<std::size_t>(order_);
  if (tokens.size() < n) return;  // too short for a single window
  for (std::size_t i = n - 1; i < tokens.size(); ++i) {
    add_count(tokens.subspan(i - (n - 1), n - 1), tokens[i]);
  }
}

std::span<const int32_t> NgramModel::context_key(
    std::span<const int32_t> history) const {
  auto need = static_cast<std::size_t>(order_ - 1);
  if (history.size() <= need) return history;
  return history.subspan(history.size() - need);
}

int64_t NgramModel::count(std::span<const int32_t> context,
                          int32_t token) const {
  auto it = table_.find(std::vector<int32_t>(context.begin(), context.end()));
  if (it == table_.end()) return 0;
  auto jt = it->second.counts.find(token);
  return jt == it->second.counts.end() ? 0 : jt->second;
}

int64_t NgramModel::context_total(std::span<const int32_t> context) const {
  auto it = table_.find(std::vector<int32_t>(context.begin(), context.end()));
  return it == table_.end() ? 0 : it->second.total;
}

std::vector<double> NgramModel::log_distribution(
    std::span<const int32_t> history) const {
  auto key = context_key(history);
  const ContextCounts* slot = nullptr;
  // Only exact (order-1)-length contexts were ever inserted, so a shorter
  // history simply misses and gets the smoothed base distribution.
  auto it = table_.find(std::vector<int32_t>(key.begin(), key.end()));
  if (it != table_.end()) slot = &it->second;

  int64_t total = slot ? slot->total : 0;
  double denom = static_cast<double>(total) + alpha_ * vocab_size_;
  if (denom <= 0.0) {
    throw std::runtime_error(
        "n-gram distribution undefined: alpha = 0 and unseen context");
  }
  double log_denom = std::log(denom);

  std::vector<double> logp(static_cast<std::size_t>(vocab_size_));
  for (int32_t j = 0; j < vocab_size_; ++j) {
    double c = alpha_;
    if (slot) {
      auto jt = slot->counts.find(j);
      if (jt != slot->counts.end()) c += static_cast<double>(jt->second);
    }
    logp[static_cast<std::size_t>(j)] =
        c > 0.0 ? std::log(c) - log_denom
                : -std::numeric_limits<double>::infinity();
  }
  if (temperature_ != 1.0) {
    for (double& lp : logp) lp /= temperature_;
    double norm = log_sum_exp(logp);
    for (double& lp : logp) lp -= norm;
  }
  return logp;
}

std::vector<double> NgramModel::distribution(
    std::span<const int32_t> history) const {
  auto logp = log_distribution(history);
  std::vector<double> p(logp.size());
  for (std::size_t j = 0; j < logp.size(); ++j) p[j] = std::exp(logp[j]);
  return p;
}

NgramModel NgramModel::with_params(double alpha, double temperature) const {
  NgramModel copy(order_, vocab_size_, alpha, temperature, end_token_);
  copy.table_ = table_;
  return copy;
}

void NgramModel::for_each_count(
    const std::function<void(std::span<const int32_t>, int32_t, int64_t)>&
        visit) const {
  for (const auto& [context, slot] : table_) {
    std::vector<std::pair<int32_t, int64_t>> items(slot.counts.begin(),
                                                   slot.counts.end());
    std::sort(items.begin(), items.end());
    for (const auto& [token, count] : items) visit(context, token, count);
  }
}

NgramModel fit_ngram(const Corpus& corpus, const Tokenizer& tokenizer,
                     int order, double alpha, double temperature) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("fit_ngram requires alpha > 0");
  if (corpus.documents.empty())
    throw std::runtime_error("cannot fit on an empty corpus");
  NgramModel model(order, tokenizer.vocab_size(), alpha, temperature);
  for (const auto& doc : corpus.documents) {
    auto seq = tokenizer.encode(doc.text);
    model.add_document(seq.tokens);
  }
  return model;
}

NgramBackend::NgramBackend(std::string name, Tokenizer tokenizer,
                           NgramModel model, Role role_hint)
    : name_(std::move(name)),
      tokenizer_(std::move(tokenizer)),
      model_(std::move(model)),
      role_hint_(role_hint) {
  if (model_.vocab_size() != tokenizer_.vocab_size()) {
    throw std::invalid_argument(
        "model and tokenizer disagree on vocabulary size");
  }
}

BackendDescriptor NgramBackend::descriptor() const {
  return {name_, tokenizer_.vocab_size(), tokenizer_.vocab_id(), role_hint_};
}

TokenSequence NgramBackend::tokenize(const std::string& text) const {
  return tokenizer_.encode(text);
}

std::string NgramBackend::detokenize(std::span<const int32_t> tokens) const {
  return tokenizer_.decode(tokens);
}

namespace {

void check_sequence(const TokenSequence& seq, const Tokenizer& tokenizer) {
  if (seq.vocab_id != tokenizer.vocab_id()) {
    throw std::runtime_error("tokenizer mismatch: sequence has \"" +
                             seq.vocab_id + "\", backend has \"" +
                             tokenizer.vocab_id() + "\"");
  }
  for (int32_t t : seq.tokens) {
    if (t < 0 || t >= tokenizer.vocab_size()) {
      throw std::runtime_error("token id " + std::to_string(t) +
                               " outside vocabulary of size " +
                               std::to_string(tokenizer.vocab_size()));
    }
  }
}

}  // namespace

PredictionMatrix NgramBackend::predict(const TokenSequence& seq) const {
  check_sequence(seq, tokenizer_);
  PredictionMatrix m;
  m.vocab_id = tokenizer_.vocab_id();
  m.vocab_size = tokenizer_.vocab_size();
  m.rows.reserve(seq.tokens.size());
  std::span<const int32_t> tokens(seq.tokens);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    m.rows.push_back(model_.log_distribution(tokens.subspan(0, i)));
  }
  return m;
}

TokenSequence NgramBackend::sample(const TokenSequence& prompt, int max_new,
                                   uint64_t seed) const {
  if (max_new < 1) throw std::invalid_argument("max_new must be >= 1");
  check_sequence(prompt, tokenizer_);
  TokenSequence out = prompt;
  out.vocab_id = tokenizer_.vocab_id();
  out.vocab_size = tokenizer_.vocab_size();
  std::mt19937_64 rng(seed);
  for (int step = 0; step < max_new; ++step) {
    auto p = model_.distribution(out.tokens);
    double u = uniform_double(rng());
    double cum = 0.0;
    int32_t drawn = static_cast<int32_t>(p.size()) - 1;
    for (std::size_t j = 0; j < p.size(); ++j) {
      cum += p[j];
      if (u < cum) {
        drawn = static_cast<int32_t>(j);
        break;
      }
    }
    out.tokens.push_back(drawn);
    if (model_.end_token() && drawn == *model_.end_token()) break;
  }
  return out;
}

namespace {

using json = nlohmann::ordered_json;

json tokenizer_to_json(const Tokenizer& tokenizer) {
  json t;
  if (tokenizer.byte_mode()) {
    t["mode"] = "byte";
  } else {
    t["mode"] = "word";
    t["words"] = tokenizer.word_list();
  }
  return t;
}

Tokenizer tokenizer_from_json(const json& t) {
  std::string mode = t.at("mode").get<std::string>();
  if (mode == "byte") return Tokenizer::bytes();
  if (mode == "word")
    return Tokenizer::words(t.at("words").get<std::vector<std::string>>());
  throw std::runtime_error("unknown tokenizer mode: " + mode);
}

}  // namespace

void save_ngram_backend(const NgramBackend& backend, const std::string& path) {
  const NgramModel& model = backend.model();
  json root;
  root["format"] = "ngram-backend-v1";
  root["name"] = backend.descriptor().name;
  root["tokenizer"] = tokenizer_to_json(backend.tokenizer());
  root["order"] = model.order();
  root["vocab_size"] = model.vocab_size();
  root["alpha"] = model.alpha();
  root["temperature"] = model.temperature();
  if (model.end_token()) root["end_token"] = *model.end_token();

  // Contexts in lexicographic order, token counts in id order: files are
  // byte-stable across runs.
  json counts = json::array();
  json current_pairs = json::array();
  std::vector<int32_t> current_ctx;
  bool have_ctx = false;
  auto flush = [&]() {
    if (!have_ctx) return;
    counts.push_back(json::array({current_ctx, current_pairs}));
    current_pairs = json::array();
  };
  model.for_each_count([&](std::span<const int32_t> context, int32_t token,
                           int64_t count) {
    std::vector<int32_t> ctx(context.begin(), context.end());
    if (!have_ctx || ctx != current_ctx) {
      flush();
      current_ctx = std::move(ctx);
      have_ctx = true;
    }
    current_pairs.push_back(json::array({token, count}));
  });
  flush();
  root["counts"] = std::move(counts);

  std::ofstream out(path, std::ios::binary);
  if (!out.is_open())
    throw std::runtime_error("cannot write model file: " + path);
  out << root.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::shared_ptr<NgramBackend> load_ngram_backend(const std::string& path,
                                                 Role role_hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open())
    throw std::runtime_error("cannot open model file: " + path);
  json root = json::parse(in);
  if (root.value("format", "") != "ngram-backend-v1")
    throw std::runtime_error("unrecognized model file format: " + path);
  Tokenizer tokenizer = tokenizer_from_json(root.at("tokenizer"));
  std::optional<int32_t> end_token;
  if (root.contains("end_token")) end_token = root["end_token"].get<int32_t>();
  NgramModel model(root.at("order").get<int>(),
                   root.at("vocab_size").get<int32_t>(),
                   root.at("alpha").get<double>(),
                   root.at("temperature").get<double>(), end_token);
  for (const auto& entry : root.at("counts")) {
    auto context = entry.at(0).get<std::vector<int32_t>>();
    for (const auto& pair : entry.at(1)) {
      model.add_count(context, pair.at(0).get<int32_t>(),
                      pair.at(1).get<int64_t>());
    }
  }
  return std::make_shared<NgramBackend>(root.at("name").get<std::string>(),
                                        std::move(tokenizer), std::move(model),
                                        role_hint);
}

}  // namespace binoculars
