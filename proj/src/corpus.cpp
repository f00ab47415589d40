#include "binoculars/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace binoculars {

using json = nlohmann::ordered_json;

std::string label_name(Label label) {
  switch (label) {
    case Label::human: return "human";
    case Label::machine: return "machine";
    case Label::unlabeled: return "unlabeled";
  }
  throw std::logic_error("unreachable label");
}

Label parse_label(const std::string& name) {
  if (name == "human") return Label::human;
  if (name == "machine") return Label::machine;
  if (name == "unlabeled") return Label::unlabeled;
  throw std::runtime_error("unknown label \"" + name +
                           "\" (expected human, machine, or unlabeled)");
}

namespace {

bool is_blank(const std::string& text) {
  for (char c : text) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' &&
        c != '\v') {
      return false;
    }
  }
  return true;
}

}  // namespace

void validate_document(const LabeledDocument& doc) {
  if (is_blank(doc.text)) {
    throw std::runtime_error("document \"" + doc.id +
                             "\": text is empty after trimming");
  }
  if (doc.label == Label::human && doc.generator.has_value()) {
    throw std::runtime_error("document \"" + doc.id +
                             "\": human documents cannot carry a generator");
  }
}

namespace {

LabeledDocument parse_document_line(const json& obj, std::size_t line_no) {
  auto ctx = [line_no](const std::string& what) {
    return std::runtime_error("line " + std::to_string(line_no) + ": " + what);
  };
  if (!obj.is_object()) throw ctx("expected a JSON object");
  if (!obj.contains("text") || !obj["text"].is_string())
    throw ctx("missing string field \"text\"");
  if (!obj.contains("label") || !obj["label"].is_string())
    throw ctx("missing string field \"label\"");

  LabeledDocument doc;
  doc.text = obj["text"].get<std::string>();
  try {
    doc.label = parse_label(obj["label"].get<std::string>());
  } catch (const std::exception& e) {
    throw ctx(e.what());
  }
  if (obj.contains("id")) {
    if (!obj["id"].is_string()) throw ctx("\"id\" must be a string");
    doc.id = obj["id"].get<std::string>();
  }
  if (doc.id.empty()) doc.id = "line-" + std::to_string(line_no);
  if (obj.contains("source") && !obj["source"].is_null()) {
    if (!obj["source"].is_string()) throw ctx("\"source\" must be a string");
    doc.source = obj["source"].get<std::string>();
  }
  if (obj.contains("generator") && !obj["generator"].is_null()) {
    if (!obj["generator"].is_string())
      throw ctx("\"generator\" must be a string");
    doc.generator = obj["generator"].get<std::string>();
  }
  try {
    validate_document(doc);
  } catch (const std::exception& e) {
    throw ctx(e.what());
  }
  return doc;
}

}  // namespace

Corpus read_corpus_jsonl(std::istream& in, const std::string& name) {
  Corpus corpus;
  corpus.name = name;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  bool first_payload_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    json obj;
    try {
      obj = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed JSON (" + e.what() + ")");
    }
    // Tool-written files start with a {"meta":...} header line.
    if (first_payload_line && obj.is_object() && obj.contains("meta") &&
        !obj.contains("text")) {
      first_payload_line = false;
      continue;
    }
    first_payload_line = false;
    LabeledDocument doc = parse_document_line(obj, line_no);
    if (!seen_ids.insert(doc.id).second) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": duplicate document id \"" + doc.id + "\"");
    }
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) {
    throw std::runtime_error("empty corpus: " + name);
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw std::runtime_error("cannot open corpus file: " + path);
  }
  return read_corpus_jsonl(in, std::filesystem::path(path).stem().string());
}

std::string document_to_jsonl(const LabeledDocument& doc) {
  json obj;
  obj["id"] = doc.id;
  obj["text"] = doc.text;
  obj["label"] = label_name(doc.label);
  if (!doc.source.empty()) obj["source"] = doc.source;
  if (doc.generator.has_value()) obj["generator"] = *doc.generator;
  try {
    return obj.dump();
  } catch (const std::exception& e) {
    throw std::runtime_error("document \"" + doc.id +
                             "\": not serializable as UTF-8 JSON (" + e.what() +
                             ")");
  }
}

void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents) {
    validate_document(doc);
    out << document_to_jsonl(doc) << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) {
    throw std::runtime_error("cannot write corpus file: " + path);
  }
  write_corpus_jsonl(out, corpus);
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// UTF-8 continuation bytes are 0b10xxxxxx.
bool is_continuation_byte(unsigned char c) { return (c & 0xC0) == 0x80; }

std::size_t snap_to_boundary(const std::string& text, std::size_t pos) {
  while (pos > 0 && pos < text.size() &&
         is_continuation_byte(static_cast<unsigned char>(text[pos]))) {
    --pos;
  }
  return pos;
}

}  // namespace

Corpus chunk_text(const std::string& name, const std::string& text,
                  int window_bytes, int stride_bytes, Label label,
                  const std::string& source) {
  if (window_bytes < 1) throw std::invalid_argument("window must be >= 1");
  if (stride_bytes < 1) throw std::invalid_argument("stride must be >= 1");
  Corpus corpus;
  corpus.name = name;
  std::size_t index = 0;
  for (std::size_t start = 0; start + window_bytes <= text.size();
       start += stride_bytes, ++index) {
    std::size_t lo = snap_to_boundary(text, start);
    std::size_t hi = snap_to_boundary(text, start + window_bytes);
    if (hi <= lo) continue;
    LabeledDocument doc;
    doc.id = name + "-" + std::to_string(index);
    doc.text = text.substr(lo, hi - lo);
    doc.label = label;
    doc.source = source;
    if (is_blank(doc.text)) continue;
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) {
    throw std::runtime_error("chunking produced an empty corpus (text shorter "
                             "than one window?)");
  }
  return corpus;
}

TokenSequence truncate_prefix(const TokenSequence& seq, std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument(
        "truncate_prefix: k must be >= 1 (a zero-token document is "
        "unscorable)");
  }
  TokenSequence out;
  out.vocab_id = seq.vocab_id;
  out.vocab_size = seq.vocab_size;
  std::size_t n = std::min(k, seq.tokens.size());
  out.tokens.assign(seq.tokens.begin(), seq.tokens.begin() + n);
  return out;
}

}  // namespace binoculars
