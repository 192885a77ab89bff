#ifndef PTM_TRAIN_H_
#define PTM_TRAIN_H_

#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ptm/cluster.h"
#include "ptm/common.h"
#include "ptm/corpus.h"
#include "ptm/encoder.h"

namespace ptm {

struct TrainConfig {
    double tau = 0.05;
    double p_keep = 0.5;
    double lr_pretrain = 5e-5;
    double lr_finetune = 1e-5;
    std::size_t batch_size = 100;
    std::size_t epochs = 1;
    double t_percent = 20.0;
    std::size_t negatives_per_topic = 1;
    std::uint64_t seed = 0;
    std::size_t max_pairs_per_key = 0;  // 0 = unlimited
    std::size_t k_lo = 2;
    std::size_t k_hi = 30;
    std::size_t sample_size = 10000;
    std::size_t d_in = 32;
    std::size_t d = 64;

    void validate() const;  // throws Error on out-of-range values
};

struct PairSide {
    std::size_t instance = 0;  // index into corpus.instances
    bool masked = true;
};

// Two instances sharing a phrase key; at least one side is masked.
struct PositivePair {
    PairSide a;
    PairSide b;
};

// All C(n,2) pairs per key (keys with one instance yield nothing). With
// probability p_keep exactly one side, chosen uniformly, keeps its mention
// unmasked; otherwise both sides are masked.
std::vector<PositivePair> build_positive_pairs(const PhraseIndex& index,
                                               std::mt19937_64& rng, double p_keep,
                                               std::size_t max_pairs_per_key = 0);

struct StepRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::string phase;
    bool anchor_masked = true;
    int anchor_label = -1;             // finetune only
    std::vector<int> negative_labels;  // finetune only
};

// Per-step training telemetry; records are kept in memory and optionally
// streamed as JSON lines.
class Telemetry {
  public:
    explicit Telemetry(std::ostream* out = nullptr) : out_(out) {}
    void log(const StepRecord& rec);
    const std::vector<StepRecord>& records() const { return records_; }

  private:
    std::ostream* out_;
    std::vector<StepRecord> records_;
};

// In-batch contrastive pretraining with SGD; deterministic given the seed.
EncoderParams pretrain(const Corpus& corpus, const TrainConfig& config,
                       Telemetry* telemetry = nullptr);

struct PseudoLabeling {
    std::vector<std::size_t> instance_indices;
    std::vector<int> instance_labels;  // parallel to instance_indices
    std::vector<std::pair<std::string, int>> mention_labels;
    double t_percent = 0.0;
};

struct FinetuneResult {
    EncoderParams params;
    ClusterModel model;  // centroids re-estimated from final embeddings
    PseudoLabeling labeling;
    std::size_t chosen_k = 0;
};

// Cluster-assisted contrastive finetuning. k = 0 selects the topic count by
// silhouette sweep over [config.k_lo, config.k_hi].
FinetuneResult finetune_ccl(const Corpus& corpus, const EncoderParams& pretrained,
                            std::size_t k, const TrainConfig& config,
                            Telemetry* telemetry = nullptr);

void save_pseudo_labeling(const PseudoLabeling& labeling, const std::string& path);

}  // namespace ptm

#endif  // PTM_TRAIN_H_
