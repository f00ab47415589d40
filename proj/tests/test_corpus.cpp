#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "binoculars/corpus.hpp"

using namespace binoculars;

namespace {

Corpus from_string(const std::string& jsonl, const std::string& name = "test") {
  std::istringstream in(jsonl);
  return read_corpus_jsonl(in, name);
}

}  // namespace

TEST_CASE("load maps fields and preserves line order") {
  auto corpus = from_string(
      "{\"text\":\"a\",\"label\":\"human\"}\n"
      "{\"text\":\"b\",\"label\":\"machine\"}\n");
  REQUIRE(corpus.documents.size() == 2);
  CHECK(corpus.documents[0].text == "a");
  CHECK(corpus.documents[0].label == Label::human);
  CHECK(corpus.documents[1].label == Label::machine);
  CHECK(corpus.documents[0].id == "line-1");
  CHECK(corpus.documents[1].id == "line-2");
}

TEST_CASE("empty file is an error") {
  CHECK_THROWS_WITH_AS(from_string(""), doctest::Contains("empty corpus"),
                       std::runtime_error);
}

TEST_CASE("malformed line is reported with its line number") {
  std::string data =
      "{\"text\":\"a\",\"label\":\"human\"}\n"
      "{\"text\":\"b\",\"label\":\"human\"}\n"
      "{\"text\":\n";
  CHECK_THROWS_WITH_AS(from_string(data), doctest::Contains("line 3"),
                       std::runtime_error);
}

TEST_CASE("unknown label is an error") {
  CHECK_THROWS_WITH_AS(from_string("{\"text\":\"a\",\"label\":\"robot\"}\n"),
                       doctest::Contains("unknown label"), std::runtime_error);
}

TEST_CASE("explicit ids are kept and duplicates rejected") {
  auto corpus = from_string(
      "{\"id\":\"x\",\"text\":\"a\",\"label\":\"human\"}\n"
      "{\"text\":\"b\",\"label\":\"human\"}\n");
  CHECK(corpus.documents[0].id == "x");
  CHECK(corpus.documents[1].id == "line-2");

  CHECK_THROWS_WITH_AS(
      from_string("{\"id\":\"x\",\"text\":\"a\",\"label\":\"human\"}\n"
                  "{\"id\":\"x\",\"text\":\"b\",\"label\":\"human\"}\n"),
      doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("blank text and human+generator violate invariants") {
  CHECK_THROWS_WITH_AS(from_string("{\"text\":\"  \t \",\"label\":\"human\"}\n"),
                       doctest::Contains("empty after trimming"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      from_string(
          "{\"text\":\"a\",\"label\":\"human\",\"generator\":\"m\"}\n"),
      doctest::Contains("generator"), std::runtime_error);
  // machine text may carry one
  auto corpus = from_string(
      "{\"text\":\"a\",\"label\":\"machine\",\"generator\":\"m\"}\n");
  CHECK(corpus.documents[0].generator == "m");
}

TEST_CASE("meta header line from tool output is skipped") {
  auto corpus = from_string(
      "{\"meta\":{\"command\":\"generate\",\"corpus\":\"x\"}}\n"
      "{\"text\":\"a\",\"label\":\"machine\"}\n");
  CHECK(corpus.documents.size() == 1);
}

TEST_CASE("jsonl round trip preserves every field") {
  std::mt19937 rng(7);
  Corpus corpus;
  corpus.name = "rt";
  // UTF-8 units including JSON-escaped characters and multibyte code points.
  const std::vector<std::string> units = {"a",  "b",    "c",      " ",
                                          "\n", "\t",   "\"",     "\\",
                                          "0",  "é", "ß", "中"};
  for (int d = 0; d < 50; ++d) {
    LabeledDocument doc;
    doc.id = "doc-" + std::to_string(d);
    std::size_t len = 1 + rng() % 40;
    for (std::size_t i = 0; i < len; ++i) doc.text += units[rng() % units.size()];
    doc.text += "x";  // never blank after trimming
    switch (rng() % 3) {
      case 0: doc.label = Label::human; break;
      case 1:
        doc.label = Label::machine;
        if (rng() % 2) doc.generator = "gen-" + std::to_string(rng() % 3);
        break;
      default: doc.label = Label::unlabeled; break;
    }
    if (rng() % 2) doc.source = "src-" + std::to_string(rng() % 3);
    corpus.documents.push_back(std::move(doc));
  }

  std::ostringstream out;
  write_corpus_jsonl(out, corpus);
  auto reloaded = from_string(out.str(), corpus.name);

  REQUIRE(reloaded.documents.size() == corpus.documents.size());
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& a = corpus.documents[i];
    const auto& b = reloaded.documents[i];
    CHECK(a.id == b.id);
    CHECK(a.text == b.text);
    CHECK(a.label == b.label);
    CHECK(a.source == b.source);
    CHECK(a.generator == b.generator);
  }
}

TEST_CASE("save and load through a file") {
  auto path = std::filesystem::temp_directory_path() / "binoc_corpus_test.jsonl";
  Corpus corpus;
  corpus.name = "disk";
  corpus.documents.push_back({"a", "hello", Label::human, "", {}});
  corpus.documents.push_back({"b", "world", Label::machine, "news", "gen"});
  save_corpus(corpus, path.string());
  auto loaded = load_corpus(path.string());
  CHECK(loaded.name == "binoc_corpus_test");
  REQUIRE(loaded.documents.size() == 2);
  CHECK(loaded.documents[1].generator == "gen");
  std::filesystem::remove(path);
}

TEST_CASE("truncate_prefix basics") {
  TokenSequence seq{{5, 7, 9}, "byte-256", 256};
  CHECK(truncate_prefix(seq, 2).tokens == std::vector<int32_t>{5, 7});
  CHECK(truncate_prefix(seq, 10).tokens == std::vector<int32_t>{5, 7, 9});
  CHECK(truncate_prefix(seq, 2).vocab_id == "byte-256");
  CHECK_THROWS_AS(truncate_prefix(seq, 0), std::invalid_argument);

  TokenSequence longer;
  longer.vocab_id = "byte-256";
  longer.vocab_size = 256;
  for (int i = 0; i < 700; ++i) longer.tokens.push_back(i % 256);
  CHECK(truncate_prefix(longer, 512).tokens.size() == 512);
  CHECK(truncate_prefix(seq, 512).tokens.size() == 3);
}

TEST_CASE("truncate_prefix is idempotent and prefix-monotone") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    TokenSequence seq;
    seq.vocab_id = "byte-256";
    seq.vocab_size = 256;
    std::size_t len = 1 + rng() % 64;
    for (std::size_t i = 0; i < len; ++i)
      seq.tokens.push_back(static_cast<int32_t>(rng() % 256));
    std::size_t k1 = 1 + rng() % 70;
    std::size_t k2 = k1 + rng() % 70;

    auto once = truncate_prefix(seq, k1);
    auto twice = truncate_prefix(once, k1);
    CHECK(once.tokens == twice.tokens);

    auto small = truncate_prefix(seq, k1);
    auto large = truncate_prefix(seq, k2);
    REQUIRE(small.tokens.size() <= large.tokens.size());
    CHECK(std::equal(small.tokens.begin(), small.tokens.end(),
                     large.tokens.begin()));
  }
}

TEST_CASE("chunk_text windows a raw text") {
  std::string text(1000, 'x');
  for (std::size_t i = 0; i < text.size(); i += 7) text[i] = ' ';
  text[0] = 'y';
  auto corpus = chunk_text("win", text, 100, 50, Label::human, "fixture");
  CHECK(corpus.documents.size() == 19);
  for (const auto& doc : corpus.documents) {
    CHECK(doc.text.size() == 100);
    CHECK(doc.label == Label::human);
    CHECK(doc.source == "fixture");
  }
  CHECK(corpus.documents[0].id == "win-0");
}
