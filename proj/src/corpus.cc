#include "ptm/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ptm {

namespace {

bool is_space_char(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct_char(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_space_char(text[i])) ++i;
        if (i >= n) break;
        std::size_t j = i;
        while (j < n && !is_space_char(text[j])) ++j;
        // [i, j) is one whitespace-delimited chunk; peel punctuation off
        // both ends as single-char tokens.
        std::size_t lead = i;
        while (lead < j && is_punct_char(text[lead])) ++lead;
        std::size_t trail = j;
        while (trail > lead && is_punct_char(text[trail - 1])) --trail;
        for (std::size_t p = i; p < lead; ++p)
            tokens.push_back({std::string(text.substr(p, 1)), p, p + 1});
        if (lead < trail)
            tokens.push_back({std::string(text.substr(lead, trail - lead)), lead, trail});
        for (std::size_t p = trail; p < j; ++p)
            tokens.push_back({std::string(text.substr(p, 1)), p, p + 1});
        i = j;
    }
    return tokens;
}

std::string casefold(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

const Sentence& Corpus::sentence(const std::string& id) const {
    auto it = sentence_by_id.find(id);
    if (it == sentence_by_id.end()) throw Error("unknown sentence id: " + id);
    return sentences[it->second];
}

int Corpus::token_id(const std::string& tok) const {
    auto it = token_ids.find(tok);
    return it == token_ids.end() ? kUnkId : it->second;
}

std::uint64_t Corpus::vocab_hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& tok : vocab) {
        h = fnv1a(tok, h);
        h = fnv1a(std::string_view("\x1f", 1), h);
    }
    return h;
}

std::vector<int> Corpus::span_token_ids(const PhraseInstance& inst) const {
    const Sentence& s = sentence(inst.sentence_id);
    std::vector<int> ids;
    for (const Token& t : s.tokens)
        if (t.begin >= inst.l && t.end <= inst.r) ids.push_back(token_id(t.text));
    return ids;
}

std::vector<int> Corpus::context_token_ids(const PhraseInstance& inst) const {
    const Sentence& s = sentence(inst.sentence_id);
    std::vector<int> ids;
    for (const Token& t : s.tokens)
        if (!(t.begin >= inst.l && t.end <= inst.r)) ids.push_back(token_id(t.text));
    return ids;
}

std::string Corpus::mention_text(const PhraseInstance& inst) const {
    const Sentence& s = sentence(inst.sentence_id);
    return s.text.substr(inst.l, inst.r - inst.l);
}

namespace {

// Widens [l, r) to the smallest enclosing token span. Returns false when
// no token overlaps the span at all.
bool snap_span(const std::vector<Token>& tokens, std::size_t& l, std::size_t& r,
               bool* snapped) {
    std::size_t new_l = std::string::npos, new_r = 0;
    for (const Token& t : tokens) {
        if (t.end <= l || t.begin >= r) continue;  // no overlap
        new_l = std::min(new_l == std::string::npos ? t.begin : new_l, t.begin);
        new_r = std::max(new_r, t.end);
    }
    if (new_l == std::string::npos) return false;
    *snapped = (new_l != l || new_r != r);
    l = new_l;
    r = new_r;
    return true;
}

}  // namespace

Corpus ingest_corpus(std::istream& in, const std::string& source_name) {
    Corpus corpus;
    corpus.vocab = {kMaskToken, kUnkToken};
    corpus.token_ids[kMaskToken] = kMaskId;
    corpus.token_ids[kUnkToken] = kUnkId;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": malformed record: " + e.what());
        }
        auto fail = [&](const std::string& msg) -> ParseError {
            return ParseError(source_name + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("text"))
            throw fail("record must have \"id\" and \"text\"");

        Sentence sent;
        sent.id = rec.at("id").get<std::string>();
        sent.text = rec.at("text").get<std::string>();
        if (corpus.sentence_by_id.count(sent.id))
            throw fail("duplicate sentence id: " + sent.id);
        sent.tokens = tokenize(sent.text);

        for (const Token& t : sent.tokens) {
            if (!corpus.token_ids.count(t.text)) {
                corpus.token_ids[t.text] = static_cast<int>(corpus.vocab.size());
                corpus.vocab.push_back(t.text);
            }
        }

        if (rec.contains("spans")) {
            for (const auto& sp : rec.at("spans")) {
                if (!sp.contains("l") || !sp.contains("r"))
                    throw fail("span must have \"l\" and \"r\"");
                long long ll = sp.at("l").get<long long>();
                long long rr = sp.at("r").get<long long>();
                if (ll < 0 || rr <= ll || static_cast<std::size_t>(rr) > sent.text.size())
                    throw fail("invalid span [" + std::to_string(ll) + ", " +
                               std::to_string(rr) + ") in sentence " + sent.id);
                PhraseInstance inst;
                inst.sentence_id = sent.id;
                inst.l = static_cast<std::size_t>(ll);
                inst.r = static_cast<std::size_t>(rr);
                bool snapped = false;
                if (!snap_span(sent.tokens, inst.l, inst.r, &snapped))
                    throw fail("span covers no token in sentence " + sent.id);
                if (snapped) ++corpus.snapped_spans;
                if (sp.contains("key") && !sp.at("key").is_null())
                    inst.key = sp.at("key").get<std::string>();
                else
                    inst.key = casefold(sent.text.substr(inst.l, inst.r - inst.l));
                corpus.instances.push_back(std::move(inst));
            }
        }

        corpus.sentence_by_id[sent.id] = corpus.sentences.size();
        corpus.sentences.push_back(std::move(sent));
    }
    return corpus;
}

Corpus ingest_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    return ingest_corpus(in, path);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    // Instances are grouped back under their sentence, in input order.
    std::unordered_map<std::string, std::vector<const PhraseInstance*>> by_sentence;
    for (const PhraseInstance& inst : corpus.instances)
        by_sentence[inst.sentence_id].push_back(&inst);
    for (const Sentence& sent : corpus.sentences) {
        nlohmann::json rec;
        rec["id"] = sent.id;
        rec["text"] = sent.text;
        rec["spans"] = nlohmann::json::array();
        auto it = by_sentence.find(sent.id);
        if (it != by_sentence.end()) {
            for (const PhraseInstance* inst : it->second) {
                rec["spans"].push_back(
                    {{"l", inst->l}, {"r", inst->r}, {"key", inst->key}});
            }
        }
        out << rec.dump() << "\n";
    }
}

void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file: " + path);
    write_corpus(corpus, out);
}

PhraseIndex index_phrases(const Corpus& corpus) {
    PhraseIndex index;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        const std::string& key = corpus.instances[i].key;
        auto [it, inserted] = index.groups.try_emplace(key);
        if (inserted) index.keys.push_back(key);
        it->second.push_back(i);
    }
    return index;
}

std::vector<std::string> read_phrase_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open phrase list: " + path);
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (!line.empty()) phrases.push_back(line);
    }
    return phrases;
}

}  // namespace ptm
