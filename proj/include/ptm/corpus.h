#ifndef PTM_CORPUS_H_
#define PTM_CORPUS_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptm/common.h"

namespace ptm {

struct Token {
    std::string text;
    std::size_t begin = 0;  // char offset, half-open [begin, end)
    std::size_t end = 0;

    bool operator==(const Token&) const = default;
};

struct Sentence {
    std::string id;
    std::string text;
    std::vector<Token> tokens;

    bool operator==(const Sentence&) const = default;
};

// One mention of a phrase in context: sentence plus a character span.
struct PhraseInstance {
    std::string sentence_id;
    std::size_t l = 0;
    std::size_t r = 0;  // half-open span [l, r)
    std::string key;    // identity class for pair construction

    bool operator==(const PhraseInstance&) const = default;
};

constexpr int kMaskId = 0;
constexpr int kUnkId = 1;
inline constexpr const char* kMaskToken = "<MASK>";
inline constexpr const char* kUnkToken = "<UNK>";

struct Corpus {
    std::vector<Sentence> sentences;  // input order
    std::vector<PhraseInstance> instances;
    std::vector<std::string> vocab;  // dense ids; [0]=MASK, [1]=UNK
    std::size_t snapped_spans = 0;   // spans widened to token boundaries

    std::unordered_map<std::string, std::size_t> sentence_by_id;
    std::unordered_map<std::string, int> token_ids;

    const Sentence& sentence(const std::string& id) const;
    int token_id(const std::string& tok) const;  // kUnkId when absent
    std::uint64_t vocab_hash() const;

    // Token indices covered by / outside an instance's span.
    std::vector<int> span_token_ids(const PhraseInstance& inst) const;
    std::vector<int> context_token_ids(const PhraseInstance& inst) const;

    std::string mention_text(const PhraseInstance& inst) const;

    bool operator==(const Corpus& o) const {
        return sentences == o.sentences && instances == o.instances && vocab == o.vocab;
    }
};

// Whitespace split with leading/trailing punctuation broken out as
// separate one-char tokens. Offsets are char (byte) positions.
std::vector<Token> tokenize(std::string_view text);

std::string casefold(std::string_view s);

// Groups instance indices by key, keys in order of first appearance.
struct PhraseIndex {
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
};

Corpus ingest_corpus(const std::string& path);
Corpus ingest_corpus(std::istream& in, const std::string& source_name);

void write_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::string& path);

PhraseIndex index_phrases(const Corpus& corpus);

// One phrase string per line; blank lines skipped.
std::vector<std::string> read_phrase_list(const std::string& path);

}  // namespace ptm

#endif  // PTM_CORPUS_H_
