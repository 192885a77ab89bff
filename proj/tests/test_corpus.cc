#include <sstream>

#include "doctest.h"
#include "ptm/corpus.h"
#include "test_util.h"

using namespace ptm;
using testutil::corpus_from_jsonl;

TEST_CASE("tokenize splits on whitespace with punctuation peeled off") {
    auto toks = tokenize("good food.");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].text == "good");
    CHECK(toks[1].text == "food");
    CHECK(toks[2].text == ".");

    CHECK(tokenize("").empty());

    toks = tokenize("United States");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].begin == 0);
    CHECK(toks[0].end == 6);
    CHECK(toks[1].begin == 7);
    CHECK(toks[1].end == 13);

    toks = tokenize("(really?!)");
    REQUIRE(toks.size() == 5);
    CHECK(toks[0].text == "(");
    CHECK(toks[1].text == "really");
    CHECK(toks[2].text == "?");
    CHECK(toks[3].text == "!");
    CHECK(toks[4].text == ")");
}

TEST_CASE("token spans slice the text back exactly") {
    const std::string text = "He lived in the United States.";
    for (const Token& t : tokenize(text)) {
        CHECK(t.begin < t.end);
        CHECK(t.end <= text.size());
        CHECK(text.substr(t.begin, t.end - t.begin) == t.text);
    }
}

TEST_CASE("ingest builds default keys from case-folded mentions") {
    auto corpus = corpus_from_jsonl(
        R"({"id":"s1","text":"He lived in the United States","spans":[{"l":16,"r":29}]})"
        "\n");
    REQUIRE(corpus.sentences.size() == 1);
    REQUIRE(corpus.instances.size() == 1);
    CHECK(corpus.instances[0].key == "united states");
    CHECK(corpus.mention_text(corpus.instances[0]) == "United States");
    CHECK(corpus.snapped_spans == 0);
}

TEST_CASE("empty spans are rejected") {
    CHECK_THROWS_AS(corpus_from_jsonl(
                        R"({"id":"s1","text":"abc def","spans":[{"l":2,"r":2}]})"),
                    ParseError);
}

TEST_CASE("duplicate sentence ids are rejected") {
    CHECK_THROWS_AS(corpus_from_jsonl(R"({"id":"s1","text":"a"})"
                                      "\n"
                                      R"({"id":"s1","text":"b"})"),
                    ParseError);
}

TEST_CASE("malformed records report the line number") {
    try {
        corpus_from_jsonl("{\"id\":\"s1\",\"text\":\"ok\"}\nnot json\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("misaligned spans snap outward to token boundaries") {
    auto corpus = corpus_from_jsonl(
        R"({"id":"s1","text":"the quick fox","spans":[{"l":5,"r":8}]})");
    REQUIRE(corpus.instances.size() == 1);
    CHECK(corpus.instances[0].l == 4);
    CHECK(corpus.instances[0].r == 9);
    CHECK(corpus.instances[0].key == "quick");
    CHECK(corpus.snapped_spans == 1);
}

TEST_CASE("index groups by key, preserving order and totals") {
    std::ostringstream jsonl;
    for (int i = 0; i < 3; ++i)
        jsonl << "{\"id\":\"s" << i
              << "\",\"text\":\"visit London now\",\"spans\":[{\"l\":6,\"r\":12}]}\n";
    jsonl << R"({"id":"x","text":"see Paris","spans":[{"l":4,"r":9}]})"
          << "\n";
    auto corpus = corpus_from_jsonl(jsonl.str());
    auto index = index_phrases(corpus);
    REQUIRE(index.keys.size() == 2);
    CHECK(index.keys[0] == "london");
    CHECK(index.groups.at("london").size() == 3);
    CHECK(index.groups.at("paris").size() == 1);

    std::size_t total = 0;
    for (const auto& key : index.keys) total += index.groups.at(key).size();
    CHECK(total == corpus.instances.size());
}

TEST_CASE("empty corpus yields an empty index") {
    auto corpus = corpus_from_jsonl("");
    CHECK(index_phrases(corpus).keys.empty());
}

TEST_CASE("explicit key overrides the case-folded mention") {
    auto corpus = corpus_from_jsonl(
        R"({"id":"s1","text":"Big Apple tour","spans":[{"l":0,"r":9,"key":"Q60"}]})");
    CHECK(corpus.instances[0].key == "Q60");
}

TEST_CASE("serialize then ingest round-trips the corpus") {
    auto synth = testutil::make_planted(2, 4, 3, 6, 8, 0.1, 42);
    std::ostringstream out;
    write_corpus(synth.corpus, out);
    auto again = corpus_from_jsonl(out.str());
    CHECK(again == synth.corpus);
}

TEST_CASE("vocab is dense with reserved MASK and UNK") {
    auto corpus = corpus_from_jsonl(R"({"id":"s1","text":"a b a"})");
    CHECK(corpus.vocab[kMaskId] == kMaskToken);
    CHECK(corpus.vocab[kUnkId] == kUnkToken);
    CHECK(corpus.vocab.size() == 4);  // MASK, UNK, a, b
    CHECK(corpus.token_id("a") == 2);
    CHECK(corpus.token_id("never-seen") == kUnkId);
}
