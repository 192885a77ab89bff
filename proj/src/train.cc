#include "ptm/train.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "json.hpp"
#include "ptm/objectives.h"

namespace ptm {

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw Error("tau must be positive");
    if (p_keep < 0.0 || p_keep > 1.0) throw Error("p_keep must be in [0, 1]");
    if (!(lr_pretrain > 0.0) || !(lr_finetune > 0.0))
        throw Error("learning rates must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (epochs == 0) throw Error("epochs must be positive");
    if (!(t_percent > 0.0) || t_percent > 100.0)
        throw Error("t percent must be in (0, 100]");
    if (negatives_per_topic == 0) throw Error("negatives_per_topic must be positive");
    if (k_lo < 2 || k_hi < k_lo) throw Error("invalid k range");
    if (d_in == 0 || d == 0) throw Error("embedding dimensions must be positive");
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(
    const PhraseIndex& index, std::size_t max_pairs_per_key) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const std::string& key : index.keys) {
        const auto& group = index.groups.at(key);
        std::size_t emitted = 0;
        for (std::size_t i = 0; i < group.size() && !(max_pairs_per_key && emitted >= max_pairs_per_key); ++i) {
            for (std::size_t j = i + 1; j < group.size(); ++j) {
                pairs.emplace_back(group[i], group[j]);
                if (max_pairs_per_key && ++emitted >= max_pairs_per_key) break;
            }
        }
    }
    return pairs;
}

// Draws the per-pair mask policy: both masked, except with probability
// p_keep one uniformly chosen side stays unmasked.
PositivePair draw_mask_flags(std::pair<std::size_t, std::size_t> pair,
                             std::mt19937_64& rng, double p_keep) {
    PositivePair out;
    out.a = {pair.first, true};
    out.b = {pair.second, true};
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < p_keep) {
        if (u01(rng) < 0.5)
            out.a.masked = false;
        else
            out.b.masked = false;
    }
    return out;
}

}  // namespace

std::vector<PositivePair> build_positive_pairs(const PhraseIndex& index,
                                               std::mt19937_64& rng, double p_keep,
                                               std::size_t max_pairs_per_key) {
    std::vector<PositivePair> out;
    for (const auto& p : enumerate_pairs(index, max_pairs_per_key))
        out.push_back(draw_mask_flags(p, rng, p_keep));
    return out;
}

void Telemetry::log(const StepRecord& rec) {
    if (out_ != nullptr) {
        nlohmann::json j{{"step", rec.step},
                         {"loss", rec.loss},
                         {"lr", rec.lr},
                         {"phase", rec.phase}};
        if (rec.phase == "finetune") {
            j["anchor_masked"] = rec.anchor_masked;
            j["anchor_label"] = rec.anchor_label;
            j["negative_labels"] = rec.negative_labels;
        }
        (*out_) << j.dump() << "\n";
    }
    records_.push_back(rec);
}

EncoderParams pretrain(const Corpus& corpus, const TrainConfig& config,
                       Telemetry* telemetry) {
    config.validate();
    EncoderParams params = init_params(corpus, config.d_in, config.d, config.seed);

    const PhraseIndex index = index_phrases(corpus);
    const auto base_pairs = enumerate_pairs(index, config.max_pairs_per_key);
    if (base_pairs.size() < 2)
        throw Error("pretraining needs at least 2 positive pairs, got " +
                    std::to_string(base_pairs.size()));

    std::mt19937_64 rng(config.seed + 1);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        // Fresh mask draws and a fresh shuffle every epoch.
        std::vector<PositivePair> pairs;
        pairs.reserve(base_pairs.size());
        for (const auto& p : base_pairs) pairs.push_back(draw_mask_flags(p, rng, config.p_keep));
        std::shuffle(pairs.begin(), pairs.end(), rng);

        for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, pairs.size());
            if (end - start < 2) break;  // in-batch loss needs N >= 2

            std::vector<Vec> anchors, positives;
            for (std::size_t i = start; i < end; ++i) {
                anchors.push_back(encode(params, corpus, corpus.instances[pairs[i].a.instance],
                                         pairs[i].a.masked));
                positives.push_back(encode(params, corpus,
                                           corpus.instances[pairs[i].b.instance],
                                           pairs[i].b.masked));
            }
            const BatchLoss loss = in_batch_loss(anchors, positives, config.tau);

            ParamGrad grad(params);
            for (std::size_t i = start; i < end; ++i) {
                add_encode_gradient(params, corpus, corpus.instances[pairs[i].a.instance],
                                    pairs[i].a.masked, loss.d_anchors[i - start], &grad);
                add_encode_gradient(params, corpus, corpus.instances[pairs[i].b.instance],
                                    pairs[i].b.masked, loss.d_positives[i - start], &grad);
            }
            apply_sgd(&params, grad, config.lr_pretrain);

            if (telemetry != nullptr)
                telemetry->log({++step, loss.loss, config.lr_pretrain, "pretrain"});
            else
                ++step;
        }
    }
    return params;
}

FinetuneResult finetune_ccl(const Corpus& corpus, const EncoderParams& pretrained,
                            std::size_t k, const TrainConfig& config,
                            Telemetry* telemetry) {
    config.validate();
    check_compat(pretrained, corpus);
    if (k == 1) throw Error("k must be >= 2");

    FinetuneResult result;
    result.params = pretrained;

    // Clustering space: every instance encoded with its mention masked.
    std::vector<Vec> embeddings;
    embeddings.reserve(corpus.instances.size());
    for (const PhraseInstance& inst : corpus.instances)
        embeddings.push_back(encode(result.params, corpus, inst, true));

    result.chosen_k =
        k != 0 ? k
               : select_topic_count(embeddings, config.k_lo, config.k_hi,
                                    config.sample_size, config.seed);
    result.model = kmeans(embeddings, result.chosen_k, config.seed);

    const ConfidentSelection confident = select_confident(result.model, config.t_percent);
    std::vector<std::string> point_keys;
    point_keys.reserve(corpus.instances.size());
    for (const PhraseInstance& inst : corpus.instances) point_keys.push_back(inst.key);
    result.labeling.instance_indices = confident.indices;
    result.labeling.instance_labels = confident.labels;
    result.labeling.t_percent = config.t_percent;
    result.labeling.mention_labels =
        majority_vote(point_keys, confident, result.model, embeddings);

    std::map<std::string, int> label_of;
    for (const auto& [key, label] : result.labeling.mention_labels) label_of[key] = label;

    // Negative pool per topic: confident instances only.
    std::vector<std::vector<std::size_t>> pool(result.chosen_k);
    for (std::size_t i = 0; i < confident.indices.size(); ++i)
        pool[static_cast<std::size_t>(confident.labels[i])].push_back(confident.indices[i]);
    for (std::size_t c = 0; c < pool.size(); ++c)
        if (pool[c].empty())
            std::cerr << "warning: topic " << c
                      << " has no confident instances; excluded from negative sampling\n";

    const PhraseIndex index = index_phrases(corpus);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& p : enumerate_pairs(index, config.max_pairs_per_key))
        if (label_of.count(corpus.instances[p.first].key)) pairs.push_back(p);
    if (pairs.empty()) throw Error("no trainable pairs: no mention received a pseudo label");

    std::mt19937_64 rng(config.seed + 2);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::pair<std::size_t, std::size_t>> order = pairs;
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto& [ia, ib] : order) {
            const int anchor_label = label_of.at(corpus.instances[ia].key);
            // Anchor always masked; positive and negatives keep their
            // mention unchanged with probability p_keep.
            const Vec anchor = encode(result.params, corpus, corpus.instances[ia], true);
            const bool pos_masked = !(u01(rng) < config.p_keep);
            const Vec positive =
                encode(result.params, corpus, corpus.instances[ib], pos_masked);

            struct NegDraw {
                std::size_t instance;
                bool masked;
                int label;
            };
            std::vector<NegDraw> draws;
            std::vector<std::pair<Vec, int>> negatives;
            for (std::size_t c = 0; c < result.chosen_k; ++c) {
                if (static_cast<int>(c) == anchor_label || pool[c].empty()) continue;
                for (std::size_t m = 0; m < config.negatives_per_topic; ++m) {
                    const std::size_t pick = pool[c][std::uniform_int_distribution<std::size_t>(
                        0, pool[c].size() - 1)(rng)];
                    const bool neg_masked = !(u01(rng) < config.p_keep);
                    draws.push_back({pick, neg_masked, static_cast<int>(c)});
                    negatives.emplace_back(
                        encode(result.params, corpus, corpus.instances[pick], neg_masked),
                        static_cast<int>(c));
                }
            }

            const PairLoss loss =
                ccl_loss(anchor, anchor_label, positive, negatives, config.tau);

            ParamGrad grad(result.params);
            add_encode_gradient(result.params, corpus, corpus.instances[ia], true,
                                loss.d_anchor, &grad);
            add_encode_gradient(result.params, corpus, corpus.instances[ib], pos_masked,
                                loss.d_positive, &grad);
            for (std::size_t i = 0; i < draws.size(); ++i)
                add_encode_gradient(result.params, corpus, corpus.instances[draws[i].instance],
                                    draws[i].masked, loss.d_negatives[i], &grad);
            apply_sgd(&result.params, grad, config.lr_finetune);

            if (telemetry != nullptr) {
                StepRecord rec;
                rec.step = ++step;
                rec.loss = loss.loss;
                rec.lr = config.lr_finetune;
                rec.phase = "finetune";
                rec.anchor_masked = true;
                rec.anchor_label = anchor_label;
                for (const NegDraw& d : draws) rec.negative_labels.push_back(d.label);
                telemetry->log(rec);
            }
        }
    }

    // Re-estimate topic representations from the finetuned embeddings,
    // keeping the clustering's grouping, then refresh assignments.
    std::vector<Vec> final_embeddings;
    final_embeddings.reserve(corpus.instances.size());
    for (const PhraseInstance& inst : corpus.instances)
        final_embeddings.push_back(encode(result.params, corpus, inst, true));
    const std::size_t d = result.model.centroids.cols;
    Matrix sums(result.chosen_k, d);
    for (std::size_t i = 0; i < final_embeddings.size(); ++i) {
        const Vec unit = normalized(final_embeddings[i]);
        double* row = sums.row(static_cast<std::size_t>(result.model.assignments[i]));
        for (std::size_t j = 0; j < d; ++j) row[j] += unit[j];
    }
    for (std::size_t c = 0; c < result.chosen_k; ++c) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += sums.at(c, j) * sums.at(c, j);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;  // keep the pre-finetune centroid
        for (std::size_t j = 0; j < d; ++j)
            result.model.centroids.at(c, j) = sums.at(c, j) / norm;
    }
    for (std::size_t i = 0; i < final_embeddings.size(); ++i) {
        const Vec unit = normalized(final_embeddings[i]);
        int best = 0;
        double best_d = 2.0;
        for (std::size_t c = 0; c < result.chosen_k; ++c) {
            double sim = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                sim += unit[j] * result.model.centroids.at(c, j);
            if (1.0 - sim < best_d) {
                best_d = 1.0 - sim;
                best = static_cast<int>(c);
            }
        }
        result.model.assignments[i] = best;
        result.model.distances[i] = best_d;
    }
    return result;
}

void save_pseudo_labeling(const PseudoLabeling& labeling, const std::string& path) {
    nlohmann::json j;
    j["t_percent"] = labeling.t_percent;
    j["instances"] = nlohmann::json::array();
    for (std::size_t i = 0; i < labeling.instance_indices.size(); ++i)
        j["instances"].push_back({{"instance", labeling.instance_indices[i]},
                                  {"label", labeling.instance_labels[i]}});
    j["mentions"] = nlohmann::json::array();
    for (const auto& [key, label] : labeling.mention_labels)
        j["mentions"].push_back({{"key", key}, {"label", label}});
    std::ofstream out(path);
    if (!out) throw Error("cannot write pseudo labels: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace ptm
