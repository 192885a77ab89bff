#include "ptm/objectives.h"

#include <algorithm>
#include <cmath>

namespace ptm {

namespace {

double norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Adds w * d(sim(a,b))/da into *da and w * d(sim(a,b))/db into *db.
void add_cosine_grad(const Vec& a, const Vec& b, double w, Vec* da, Vec* db) {
    const double na = norm(a), nb = norm(b);
    const double s = dot(a, b) / (na * nb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        (*da)[i] += w * (b[i] / (na * nb) - s * a[i] / (na * na));
        (*db)[i] += w * (a[i] / (na * nb) - s * b[i] / (nb * nb));
    }
}

void check_nonzero(const Vec& v) {
    if (norm(v) == 0.0) throw Error("cosine similarity of zero-norm embedding");
}

void check_tau(double tau) {
    if (!(tau > 0.0)) throw Error("temperature must be positive");
}

// -log softmax(logits)[0], numerically stable.
double neg_log_softmax0(const std::vector<double>& logits, std::vector<double>* probs) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    probs->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) (*probs)[i] = std::exp(logits[i] - m) / z;
    return -(logits[0] - m) + std::log(z);
}

}  // namespace

double cosine_sim(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw Error("embedding dimension mismatch");
    check_nonzero(a);
    check_nonzero(b);
    return dot(a, b) / (norm(a) * norm(b));
}

PairLoss contrastive_loss(const Vec& anchor, const Vec& positive,
                          const std::vector<Vec>& negatives, double tau) {
    check_tau(tau);
    const std::size_t d = anchor.size();
    PairLoss out;
    out.d_anchor.assign(d, 0.0);
    out.d_positive.assign(d, 0.0);
    out.d_negatives.assign(negatives.size(), Vec(d, 0.0));

    std::vector<double> logits;
    logits.push_back(cosine_sim(anchor, positive) / tau);
    for (const Vec& n : negatives) logits.push_back(cosine_sim(anchor, n) / tau);

    std::vector<double> probs;
    out.loss = neg_log_softmax0(logits, &probs);

    // dl/dsim_0 = (p_0 - 1)/tau, dl/dsim_i = p_i/tau.
    add_cosine_grad(anchor, positive, (probs[0] - 1.0) / tau, &out.d_anchor, &out.d_positive);
    for (std::size_t i = 0; i < negatives.size(); ++i)
        add_cosine_grad(anchor, negatives[i], probs[i + 1] / tau, &out.d_anchor,
                        &out.d_negatives[i]);
    return out;
}

BatchLoss in_batch_loss(const std::vector<Vec>& anchors,
                        const std::vector<Vec>& positives, double tau) {
    check_tau(tau);
    const std::size_t n = anchors.size();
    if (n != positives.size()) throw Error("anchor/positive count mismatch");
    if (n < 2) throw Error("in-batch loss requires N >= 2");
    const std::size_t d = anchors[0].size();

    BatchLoss out;
    out.d_anchors.assign(n, Vec(d, 0.0));
    out.d_positives.assign(n, Vec(d, 0.0));

    std::vector<std::vector<double>> sims(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) sims[j][i] = cosine_sim(anchors[j], positives[i]);

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        // Reorder so the anchor's own positive is logit 0.
        std::vector<double> logits(n);
        logits[0] = sims[j][j] / tau;
        std::size_t pos = 1;
        for (std::size_t i = 0; i < n; ++i)
            if (i != j) logits[pos++] = sims[j][i] / tau;
        std::vector<double> probs;
        total += neg_log_softmax0(logits, &probs);

        const double scale = 1.0 / (tau * static_cast<double>(n));
        add_cosine_grad(anchors[j], positives[j], (probs[0] - 1.0) * scale,
                        &out.d_anchors[j], &out.d_positives[j]);
        pos = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            add_cosine_grad(anchors[j], positives[i], probs[pos++] * scale,
                            &out.d_anchors[j], &out.d_positives[i]);
        }
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

PairLoss ccl_loss(const Vec& anchor, int anchor_label, const Vec& positive,
                  const std::vector<std::pair<Vec, int>>& negatives, double tau) {
    std::vector<Vec> negs;
    negs.reserve(negatives.size());
    for (const auto& [emb, label] : negatives) {
        if (label == anchor_label)
            throw Error("CCL negative shares the anchor's topic label " +
                        std::to_string(label));
        negs.push_back(emb);
    }
    return contrastive_loss(anchor, positive, negs, tau);
}

}  // namespace ptm
