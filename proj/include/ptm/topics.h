#ifndef PTM_TOPICS_H_
#define PTM_TOPICS_H_

#include <string>
#include <utility>
#include <vector>

#include "ptm/cluster.h"
#include "ptm/common.h"
#include "ptm/corpus.h"
#include "ptm/encoder.h"

namespace ptm {

// Nearest-centroid topic under cosine similarity; ties -> lowest index.
int infer_topic(const Vec& h, const ClusterModel& model);

// Softmax over centroid cosine similarities / tau_inf; argmax agrees with
// infer_topic.
Vec topic_distribution(const Vec& h, const ClusterModel& model, double tau_inf = 0.05);

// Mean of the per-instance distributions plus its argmax topic.
std::pair<Vec, int> mention_topic(const std::vector<Vec>& instance_embeddings,
                                  const ClusterModel& model, double tau_inf = 0.05);

struct TopicReport {
    struct Entry {
        std::string mention;
        std::size_t freq = 0;
        double score = 0.0;
    };
    std::vector<std::vector<Entry>> topics;  // per topic, score-descending
    std::size_t min_frequency = 3;
    std::size_t top_n = 0;
    std::size_t skipped_phrases = 0;  // candidates with no corpus match
};

// Context-agnostic phrase topics: candidates are matched against corpus
// mentions by case-folded string, each mention's instances are encoded
// (mention masked, matching the clustering space) and the averaged topic
// distribution decides topic and score.
TopicReport mine_topics(const Corpus& corpus, const std::vector<std::string>& phrase_list,
                        const EncoderParams& params, const ClusterModel& model,
                        std::size_t min_frequency = 3, std::size_t top_n = 20,
                        double tau_inf = 0.05);

void save_topic_report(const TopicReport& report, const std::string& path);
TopicReport load_topic_report(const std::string& path);

struct IntrusionQuestion {
    std::string qid;
    std::vector<std::string> phrases;  // 6 entries, shuffled
    int intruder_index = -1;
    int source_topic = -1;
    int intruder_topic = -1;
};

// Each question: 5 phrases from one topic's top-`pool_size` pool plus one
// intruder from a different topic's pool, order shuffled by seed.
std::vector<IntrusionQuestion> gen_intrusion_questions(const TopicReport& report,
                                                       std::size_t n_questions,
                                                       std::uint64_t seed,
                                                       std::size_t pool_size = 50);

void write_intrusion_files(const std::vector<IntrusionQuestion>& questions,
                           const std::string& questions_path,
                           const std::string& key_path);

}  // namespace ptm

#endif  // PTM_TOPICS_H_
