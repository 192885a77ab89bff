#ifndef PTM_OBJECTIVES_H_
#define PTM_OBJECTIVES_H_

#include <utility>
#include <vector>

#include "ptm/common.h"

namespace ptm {

// Contrastive softmax temperature; tau > 0.
struct Temperature {
    double tau = 0.05;
};

double cosine_sim(const Vec& a, const Vec& b);  // throws on zero norm

struct PairLoss {
    double loss = 0.0;
    Vec d_anchor;
    Vec d_positive;
    std::vector<Vec> d_negatives;
};

// l = -log( e^{sim(h,h+)/tau} / (e^{sim(h,h+)/tau} + sum_i e^{sim(h,h-_i)/tau}) )
PairLoss contrastive_loss(const Vec& anchor, const Vec& positive,
                          const std::vector<Vec>& negatives, double tau);

struct BatchLoss {
    double loss = 0.0;  // mean over anchors
    std::vector<Vec> d_anchors;
    std::vector<Vec> d_positives;
};

// In-batch negatives: per anchor j the denominator runs over all N in-batch
// positives, own positive included. N >= 2.
BatchLoss in_batch_loss(const std::vector<Vec>& anchors,
                        const std::vector<Vec>& positives, double tau);

// Cluster-assisted variant: every negative carries a topic label that must
// differ from the anchor's.
PairLoss ccl_loss(const Vec& anchor, int anchor_label, const Vec& positive,
                  const std::vector<std::pair<Vec, int>>& negatives, double tau);

}  // namespace ptm

#endif  // PTM_OBJECTIVES_H_
