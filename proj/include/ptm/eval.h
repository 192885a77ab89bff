#ifndef PTM_EVAL_H_
#define PTM_EVAL_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "ptm/common.h"
#include "ptm/corpus.h"
#include "ptm/topics.h"

namespace ptm {

struct LabeledPartition {
    std::vector<int> predicted;
    std::vector<int> gold;
};

// Best accuracy under an optimal one-to-one mapping between predicted
// clusters and gold classes (injective from the smaller label set).
double clustering_accuracy(const LabeledPartition& partition);

// I(pred; gold) / sqrt(H(pred) * H(gold)), natural logs. 1.0 when both
// entropies are zero, 0.0 when exactly one is.
double nmi(const LabeledPartition& partition);

// Document frequencies with one sentence per document; tokens case-folded.
struct CorpusStats {
    std::size_t n_docs = 0;
    std::unordered_map<std::string, std::size_t> doc_freq;
};

CorpusStats corpus_stats(const Corpus& corpus);

// Mean over phrase tokens of tf(w,d) * ln(N/df(w)); unseen tokens
// contribute 0.
double phrase_tfidf(const std::vector<std::string>& phrase_tokens,
                    const Sentence& document, const CorpusStats& stats);

// Distinct / total token ratio over the case-folded tokenization of all
// phrases.
double word_diversity(const std::vector<std::string>& phrases);

struct TopicScores {
    std::size_t topic = 0;
    double tfidf = 0.0;
    double word_div = 0.0;
};

struct ScoreReport {
    bool has_partition = false;
    double acc = 0.0;
    double nmi = 0.0;
    std::vector<TopicScores> per_topic;  // topics with >= 1 ranked phrase
    double mean_tfidf = 0.0;
    double mean_word_div = 0.0;
};

// Per topic: mean phrase tf-idf and word diversity over the top
// `phrases_per_topic` phrases; a phrase's tf-idf is averaged over the
// sentences containing it. ACC/NMI included when a partition is given.
ScoreReport report_scores(const TopicReport& report, const Corpus& corpus,
                          const LabeledPartition* partition = nullptr,
                          std::size_t phrases_per_topic = 10);

void save_score_report(const ScoreReport& report, const std::string& path);

}  // namespace ptm

#endif  // PTM_EVAL_H_
