#include "ptm/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace ptm {

namespace {

// Contingency counts with labels remapped to dense 0-based indices.
struct Contingency {
    std::vector<std::vector<std::size_t>> counts;  // pred x gold
    std::vector<std::size_t> pred_totals, gold_totals;
    std::size_t n = 0;
};

Contingency contingency(const LabeledPartition& part) {
    if (part.predicted.empty() || part.predicted.size() != part.gold.size())
        throw Error("partition maps must be non-empty and cover the same instances");
    std::map<int, std::size_t> pred_ids, gold_ids;
    for (int l : part.predicted) pred_ids.emplace(l, pred_ids.size());
    for (int l : part.gold) gold_ids.emplace(l, gold_ids.size());
    Contingency c;
    c.n = part.predicted.size();
    c.counts.assign(pred_ids.size(), std::vector<std::size_t>(gold_ids.size(), 0));
    c.pred_totals.assign(pred_ids.size(), 0);
    c.gold_totals.assign(gold_ids.size(), 0);
    for (std::size_t i = 0; i < c.n; ++i) {
        const std::size_t p = pred_ids[part.predicted[i]];
        const std::size_t g = gold_ids[part.gold[i]];
        ++c.counts[p][g];
        ++c.pred_totals[p];
        ++c.gold_totals[g];
    }
    return c;
}

// Min-cost perfect matching on a square matrix (Hungarian algorithm with
// potentials, O(n^3)).
double hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
        if (match[j] != 0) total += cost[match[j] - 1][j - 1];
    return total;
}

}  // namespace

double clustering_accuracy(const LabeledPartition& partition) {
    const Contingency c = contingency(partition);
    const std::size_t n = std::max(c.counts.size(), c.counts[0].size());
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (std::size_t p = 0; p < c.counts.size(); ++p)
        for (std::size_t g = 0; g < c.counts[p].size(); ++g)
            cost[p][g] = -static_cast<double>(c.counts[p][g]);
    return -hungarian(cost) / static_cast<double>(c.n);
}

double nmi(const LabeledPartition& partition) {
    const Contingency c = contingency(partition);
    const double n = static_cast<double>(c.n);
    auto entropy = [&](const std::vector<std::size_t>& totals) {
        double h = 0.0;
        for (std::size_t t : totals) {
            if (t == 0) continue;
            const double p = static_cast<double>(t) / n;
            h -= p * std::log(p);
        }
        return h;
    };
    const double hp = entropy(c.pred_totals);
    const double hg = entropy(c.gold_totals);
    if (hp == 0.0 && hg == 0.0) return 1.0;
    if (hp == 0.0 || hg == 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t p = 0; p < c.counts.size(); ++p) {
        for (std::size_t g = 0; g < c.counts[p].size(); ++g) {
            if (c.counts[p][g] == 0) continue;
            const double nij = static_cast<double>(c.counts[p][g]);
            mi += nij / n *
                  std::log(n * nij /
                           (static_cast<double>(c.pred_totals[p]) *
                            static_cast<double>(c.gold_totals[g])));
        }
    }
    return std::clamp(mi / std::sqrt(hp * hg), 0.0, 1.0);
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats stats;
    stats.n_docs = corpus.sentences.size();
    for (const Sentence& sent : corpus.sentences) {
        std::set<std::string> seen;
        for (const Token& t : sent.tokens) seen.insert(casefold(t.text));
        for (const std::string& w : seen) ++stats.doc_freq[w];
    }
    return stats;
}

double phrase_tfidf(const std::vector<std::string>& phrase_tokens,
                    const Sentence& document, const CorpusStats& stats) {
    if (phrase_tokens.empty()) throw Error("phrase_tfidf: empty phrase");
    std::map<std::string, std::size_t> tf;
    for (const Token& t : document.tokens) ++tf[casefold(t.text)];
    double total = 0.0;
    for (const std::string& w : phrase_tokens) {
        const std::string folded = casefold(w);
        auto df = stats.doc_freq.find(folded);
        if (df == stats.doc_freq.end()) continue;  // unseen -> 0
        auto count = tf.find(folded);
        const double tfv = count == tf.end() ? 0.0 : static_cast<double>(count->second);
        total += tfv * std::log(static_cast<double>(stats.n_docs) /
                                static_cast<double>(df->second));
    }
    return total / static_cast<double>(phrase_tokens.size());
}

double word_diversity(const std::vector<std::string>& phrases) {
    if (phrases.empty()) throw Error("word_diversity: empty phrase list");
    std::size_t total = 0;
    std::set<std::string> unique;
    for (const std::string& p : phrases) {
        for (const Token& t : tokenize(p)) {
            ++total;
            unique.insert(casefold(t.text));
        }
    }
    if (total == 0) throw Error("word_diversity: phrases produce no tokens");
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

ScoreReport report_scores(const TopicReport& report, const Corpus& corpus,
                          const LabeledPartition* partition,
                          std::size_t phrases_per_topic) {
    ScoreReport scores;
    if (partition != nullptr) {
        scores.has_partition = true;
        scores.acc = clustering_accuracy(*partition);
        scores.nmi = nmi(*partition);
    }

    const CorpusStats stats = corpus_stats(corpus);
    // Case-folded mention -> sentences containing it.
    std::map<std::string, std::vector<const Sentence*>> mention_docs;
    for (const PhraseInstance& inst : corpus.instances)
        mention_docs[casefold(corpus.mention_text(inst))].push_back(
            &corpus.sentence(inst.sentence_id));

    for (std::size_t t = 0; t < report.topics.size(); ++t) {
        if (report.topics[t].empty()) continue;
        std::vector<std::string> top_phrases;
        double tfidf_sum = 0.0;
        std::size_t tfidf_count = 0;
        for (std::size_t i = 0; i < report.topics[t].size() && i < phrases_per_topic; ++i) {
            const std::string& mention = report.topics[t][i].mention;
            top_phrases.push_back(mention);
            std::vector<std::string> words;
            for (const Token& tok : tokenize(mention)) words.push_back(tok.text);
            auto docs = mention_docs.find(mention);
            if (docs == mention_docs.end() || words.empty()) continue;
            double per_doc = 0.0;
            for (const Sentence* doc : docs->second)
                per_doc += phrase_tfidf(words, *doc, stats);
            tfidf_sum += per_doc / static_cast<double>(docs->second.size());
            ++tfidf_count;
        }
        TopicScores ts;
        ts.topic = t;
        ts.tfidf = tfidf_count == 0 ? 0.0 : tfidf_sum / static_cast<double>(tfidf_count);
        ts.word_div = word_diversity(top_phrases);
        scores.per_topic.push_back(ts);
    }
    if (!scores.per_topic.empty()) {
        for (const TopicScores& ts : scores.per_topic) {
            scores.mean_tfidf += ts.tfidf;
            scores.mean_word_div += ts.word_div;
        }
        scores.mean_tfidf /= static_cast<double>(scores.per_topic.size());
        scores.mean_word_div /= static_cast<double>(scores.per_topic.size());
    }
    return scores;
}

void save_score_report(const ScoreReport& report, const std::string& path) {
    nlohmann::json j;
    if (report.has_partition) {
        j["acc"] = report.acc;
        j["nmi"] = report.nmi;
    }
    j["per_topic"] = nlohmann::json::array();
    for (const TopicScores& ts : report.per_topic)
        j["per_topic"].push_back(
            {{"topic", ts.topic}, {"tfidf", ts.tfidf}, {"word_div", ts.word_div}});
    j["mean_tfidf"] = report.mean_tfidf;
    j["mean_word_div"] = report.mean_word_div;
    std::ofstream out(path);
    if (!out) throw Error("cannot write metrics file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace ptm
