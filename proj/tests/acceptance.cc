// Acceptance harness: one pass/fail line per criterion. Exits with the
// number of failed criteria. argv[1] is the phrasetopic binary.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ptm/cluster.h"
#include "ptm/corpus.h"
#include "ptm/encoder.h"
#include "ptm/eval.h"
#include "ptm/objectives.h"
#include "ptm/topics.h"
#include "ptm/train.h"
#include "test_util.h"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_binary;
fs::path g_dir;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

// Loss of a batch as a function of the flattened encoder parameters, with
// the matching analytic gradient, for each of the three objectives.
struct Draw {
    ptm::Corpus corpus;
    ptm::EncoderParams params;
    std::vector<std::size_t> anchors;    // instance indices
    std::vector<std::size_t> positives;  // parallel
    std::vector<bool> anchor_mask;
    std::vector<bool> positive_mask;
};

Draw random_draw(std::uint64_t seed, std::size_t batch) {
    auto synth = testutil::make_planted(2, 2, 3, 3, 3, 0.2, seed);
    Draw d;
    d.corpus = std::move(synth.corpus);
    d.params = ptm::init_params(d.corpus, 3, 4, seed ^ 0x9e3779b97f4a7c15ull);
    std::mt19937_64 rng(seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, d.corpus.instances.size() - 1);
    for (std::size_t i = 0; i < batch; ++i) {
        d.anchors.push_back(pick(rng));
        d.positives.push_back(pick(rng));
        d.anchor_mask.push_back(rng() % 2 == 0);
        d.positive_mask.push_back(rng() % 2 == 0);
    }
    return d;
}

bool grad_matches(const Draw& d,
                  const std::function<double(const ptm::EncoderParams&)>& loss_of,
                  const std::function<void(const ptm::EncoderParams&, ptm::ParamGrad*)>&
                      grad_of) {
    ptm::ParamGrad grad(d.params);
    grad_of(d.params, &grad);
    ptm::EncoderParams scratch = d.params;
    const ptm::Vec fd = testutil::fd_grad(
        [&](const ptm::Vec& flat) {
            testutil::unflatten(flat, &scratch);
            return loss_of(scratch);
        },
        testutil::flatten(d.params));
    return testutil::rel_err(testutil::flatten(grad), fd) < 1e-5;
}

bool criterion_gradients() {
    const auto t0 = Clock::now();
    const double tau = 0.07;
    std::size_t checked = 0;
    for (std::uint64_t trial = 0; trial < 34; ++trial) {
        const Draw d = random_draw(1000 + trial, 4);
        const auto enc = [&](const ptm::EncoderParams& p, std::size_t i, bool anchor) {
            const std::size_t idx = anchor ? d.anchors[i] : d.positives[i];
            const bool mask = anchor ? d.anchor_mask[i] : d.positive_mask[i];
            return ptm::encode(p, d.corpus, d.corpus.instances[idx], mask);
        };
        const auto add = [&](const ptm::EncoderParams& p, std::size_t i, bool anchor,
                             const ptm::Vec& up, ptm::ParamGrad* g) {
            const std::size_t idx = anchor ? d.anchors[i] : d.positives[i];
            const bool mask = anchor ? d.anchor_mask[i] : d.positive_mask[i];
            ptm::add_encode_gradient(p, d.corpus, d.corpus.instances[idx], mask, up, g);
        };

        // Pairwise loss: anchor 0, positive 0, negatives = anchors 1..3.
        const bool ok1 = grad_matches(
            d,
            [&](const ptm::EncoderParams& p) {
                std::vector<ptm::Vec> negs;
                for (std::size_t i = 1; i < 4; ++i) negs.push_back(enc(p, i, true));
                return ptm::contrastive_loss(enc(p, 0, true), enc(p, 0, false), negs, tau)
                    .loss;
            },
            [&](const ptm::EncoderParams& p, ptm::ParamGrad* g) {
                std::vector<ptm::Vec> negs;
                for (std::size_t i = 1; i < 4; ++i) negs.push_back(enc(p, i, true));
                const auto pl =
                    ptm::contrastive_loss(enc(p, 0, true), enc(p, 0, false), negs, tau);
                add(p, 0, true, pl.d_anchor, g);
                add(p, 0, false, pl.d_positive, g);
                for (std::size_t i = 1; i < 4; ++i) add(p, i, true, pl.d_negatives[i - 1], g);
            });

        // In-batch loss over the 4 pairs.
        const bool ok2 = grad_matches(
            d,
            [&](const ptm::EncoderParams& p) {
                std::vector<ptm::Vec> a, b;
                for (std::size_t i = 0; i < 4; ++i) {
                    a.push_back(enc(p, i, true));
                    b.push_back(enc(p, i, false));
                }
                return ptm::in_batch_loss(a, b, tau).loss;
            },
            [&](const ptm::EncoderParams& p, ptm::ParamGrad* g) {
                std::vector<ptm::Vec> a, b;
                for (std::size_t i = 0; i < 4; ++i) {
                    a.push_back(enc(p, i, true));
                    b.push_back(enc(p, i, false));
                }
                const auto bl = ptm::in_batch_loss(a, b, tau);
                for (std::size_t i = 0; i < 4; ++i) {
                    add(p, i, true, bl.d_anchors[i], g);
                    add(p, i, false, bl.d_positives[i], g);
                }
            });

        // Cluster-assisted loss: negatives carry labels != anchor's.
        const bool ok3 = grad_matches(
            d,
            [&](const ptm::EncoderParams& p) {
                std::vector<std::pair<ptm::Vec, int>> negs;
                for (std::size_t i = 1; i < 4; ++i)
                    negs.emplace_back(enc(p, i, true), static_cast<int>(i));
                return ptm::ccl_loss(enc(p, 0, true), 0, enc(p, 0, false), negs, tau).loss;
            },
            [&](const ptm::EncoderParams& p, ptm::ParamGrad* g) {
                std::vector<std::pair<ptm::Vec, int>> negs;
                for (std::size_t i = 1; i < 4; ++i)
                    negs.emplace_back(enc(p, i, true), static_cast<int>(i));
                const auto pl =
                    ptm::ccl_loss(enc(p, 0, true), 0, enc(p, 0, false), negs, tau);
                add(p, 0, true, pl.d_anchor, g);
                add(p, 0, false, pl.d_positive, g);
                for (std::size_t i = 1; i < 4; ++i) add(p, i, true, pl.d_negatives[i - 1], g);
            });

        if (!(ok1 && ok2 && ok3)) return false;
        checked += 3;
    }
    return checked >= 100 && seconds_since(t0) < 30.0;
}

// ---------------------------------------------------------------- criterion 2

bool criterion_loss_identities() {
    for (std::size_t n : {2u, 4u, 8u, 100u}) {
        std::mt19937_64 rng(n);
        std::normal_distribution<double> gauss;
        const ptm::Vec shared = [&] {
            ptm::Vec v(6);
            for (double& x : v) x = gauss(rng);
            return v;
        }();
        // Pairwise: positive and all negatives identical -> uniform softmax.
        std::vector<ptm::Vec> negs(n - 1, shared);
        ptm::Vec anchor(6);
        for (double& x : anchor) x = gauss(rng);
        const double l1 = ptm::contrastive_loss(anchor, shared, negs, 0.05).loss;
        if (std::fabs(l1 - std::log(static_cast<double>(n))) > 1e-9) return false;
        // In-batch: all positives identical -> each anchor sees a uniform row.
        std::vector<ptm::Vec> anchors(n), positives(n, shared);
        for (auto& a : anchors) {
            a.resize(6);
            for (double& x : a) x = gauss(rng);
        }
        const double l2 = ptm::in_batch_loss(anchors, positives, 0.05).loss;
        if (std::fabs(l2 - std::log(static_cast<double>(n))) > 1e-9) return false;
    }
    const ptm::Vec a{1.0, 0.0}, b{0.5, 0.5};
    if (std::fabs(ptm::ccl_loss(a, 0, b, {}, 0.05).loss) > 1e-12) return false;
    return true;
}

// ---------------------------------------------------------------- criterion 3

double brute_force_acc(const ptm::LabeledPartition& part) {
    std::set<int> pred_set(part.predicted.begin(), part.predicted.end());
    std::set<int> gold_set(part.gold.begin(), part.gold.end());
    std::vector<int> small(pred_set.begin(), pred_set.end());
    std::vector<int> large(gold_set.begin(), gold_set.end());
    bool map_pred = true;
    if (small.size() > large.size()) {
        std::swap(small, large);
        map_pred = false;
    }
    std::size_t best = 0;
    std::vector<int> perm = large;
    std::sort(perm.begin(), perm.end());
    do {
        std::map<int, int> mapping;
        for (std::size_t i = 0; i < small.size(); ++i) mapping[small[i]] = perm[i];
        std::size_t hits = 0;
        for (std::size_t i = 0; i < part.predicted.size(); ++i) {
            const int p = part.predicted[i], g = part.gold[i];
            if (map_pred ? mapping.count(p) && mapping[p] == g
                         : mapping.count(g) && mapping[g] == p)
                ++hits;
        }
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(part.predicted.size());
}

double exhaustive_k2_cost(const std::vector<ptm::Vec>& points) {
    const std::size_t n = points.size();
    std::vector<ptm::Vec> unit;
    for (const auto& p : points) unit.push_back(ptm::normalized(p));
    double best = 1e300;
    for (std::size_t mask = 1; mask + 1 < (1ull << n); ++mask) {
        double cost = 0.0;
        bool ok = true;
        for (int side = 0; side < 2 && ok; ++side) {
            ptm::Vec sum(points[0].size(), 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<std::size_t>(side)) continue;
                for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += unit[i][j];
                ++count;
            }
            if (count == 0) {
                ok = false;
                break;
            }
            double norm = 0.0;
            for (double v : sum) norm += v * v;
            cost += static_cast<double>(count) - std::sqrt(norm);
        }
        if (ok) best = std::min(best, cost);
    }
    return best;
}

bool criterion_oracles() {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        const int labels = 2 + static_cast<int>(rng() % 3);
        ptm::LabeledPartition part;
        for (std::size_t i = 0; i < n; ++i) {
            part.predicted.push_back(static_cast<int>(rng() % labels));
            part.gold.push_back(static_cast<int>(rng() % labels));
        }
        if (ptm::clustering_accuracy(part) != brute_force_acc(part)) return false;
    }
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng() % 5;
        std::vector<ptm::Vec> points;
        for (std::size_t i = 0; i < n; ++i) {
            ptm::Vec v(3);
            for (double& x : v) x = gauss(rng);
            points.push_back(v);
        }
        const auto model = ptm::kmeans(points, 2, rng());
        if (std::fabs(ptm::kmeans_cost(model) - exhaustive_k2_cost(points)) > 1e-9)
            return false;
    }
    return true;
}

// ---------------------------------------------------------------- criteria 4+5

struct RecoveryResult {
    bool ok = false;
    std::vector<ptm::StepRecord> finetune_records;
};

RecoveryResult planted_recovery(std::size_t k) {
    RecoveryResult out;
    auto synth = testutil::make_planted(k, 40, 5, 40, 12, 0.08, 17 * k);
    ptm::TrainConfig cfg;
    cfg.seed = 9;
    cfg.k_lo = 2;
    cfg.k_hi = 8;
    const ptm::EncoderParams pre = ptm::pretrain(synth.corpus, cfg);

    std::vector<ptm::Vec> embeds;
    for (const auto& inst : synth.corpus.instances)
        embeds.push_back(ptm::encode(pre, synth.corpus, inst, true));
    const auto pre_model = ptm::kmeans(embeds, k, cfg.seed);
    ptm::LabeledPartition pre_part{pre_model.assignments, synth.instance_topics};
    const double pre_nmi = ptm::nmi(pre_part);

    ptm::Telemetry telemetry;
    const auto fine = ptm::finetune_ccl(synth.corpus, pre, k, cfg, &telemetry);
    ptm::LabeledPartition fine_part{fine.model.assignments, synth.instance_topics};
    const double fine_nmi = ptm::nmi(fine_part);

    std::vector<ptm::Vec> fine_embeds;
    for (const auto& inst : synth.corpus.instances)
        fine_embeds.push_back(ptm::encode(fine.params, synth.corpus, inst, true));
    const std::size_t chosen =
        ptm::select_topic_count(fine_embeds, cfg.k_lo, cfg.k_hi, cfg.sample_size, cfg.seed);

    std::cerr << "  [k=" << k << "] pretrain nmi=" << pre_nmi << " ccl nmi=" << fine_nmi
              << " selected k=" << chosen << "\n";
    out.ok = pre_nmi >= 0.8 && fine_nmi >= pre_nmi - 1e-12 && fine_nmi >= 0.9 &&
             chosen == k;
    out.finetune_records = telemetry.records();
    return out;
}

bool negatives_pure(const std::vector<ptm::StepRecord>& records) {
    bool saw_finetune = false;
    for (const auto& rec : records) {
        if (rec.phase != "finetune") continue;
        saw_finetune = true;
        for (int lbl : rec.negative_labels)
            if (lbl == rec.anchor_label) return false;
    }
    return saw_finetune;
}

// ---------------------------------------------------------------- criterion 6

bool criterion_metrics() {
    if (ptm::word_diversity({"good food", "great food"}) != 0.75) return false;

    const ptm::Corpus corpus = testutil::corpus_from_jsonl(
        "{\"id\":\"a\",\"text\":\"the cat sat\",\"spans\":[{\"l\":4,\"r\":7}]}\n"
        "{\"id\":\"b\",\"text\":\"the dog ran\",\"spans\":[{\"l\":4,\"r\":7}]}\n");
    const auto stats = ptm::corpus_stats(corpus);
    if (ptm::phrase_tfidf({"the"}, corpus.sentence("a"), stats) != 0.0) return false;

    const ptm::LabeledPartition identical{{0, 1, 1, 2}, {5, 3, 3, 9}};
    if (std::fabs(ptm::nmi(identical) - 1.0) > 1e-12) return false;
    const ptm::LabeledPartition independent{{0, 0, 1, 1}, {0, 1, 0, 1}};
    if (std::fabs(ptm::nmi(independent)) > 1e-12) return false;
    return true;
}

// ---------------------------------------------------------------- criterion 7

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = g_binary + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool criterion_determinism() {
    auto synth = testutil::make_planted(3, 8, 4, 10, 8, 0.05, 23);
    const fs::path corpus = g_dir / "det_corpus.jsonl";
    ptm::write_corpus(synth.corpus, corpus.string());
    std::ofstream phrases(g_dir / "det_phrases.txt");
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < 8; ++i)
            phrases << "key" << t << "x" << i << "\n";
    phrases.close();

    for (int round = 1; round <= 2; ++round) {
        const std::string tag = std::to_string(round);
        if (run_cli("pretrain --corpus " + corpus.string() +
                    " --seed 4 --threads 1 --d-in 8 --d 16 --batch-size 16 --out " +
                    (g_dir / ("det_pre" + tag + ".json")).string()) != 0)
            return false;
        if (run_cli("finetune --corpus " + corpus.string() + " --model " +
                    (g_dir / ("det_pre" + tag + ".json")).string() +
                    " --k 3 --t 50 --seed 4 --threads 1 --out " +
                    (g_dir / ("det_fine" + tag + ".json")).string()) != 0)
            return false;
        if (run_cli("mine --corpus " + corpus.string() + " --phrases " +
                    (g_dir / "det_phrases.txt").string() + " --model " +
                    (g_dir / ("det_fine" + tag + ".json")).string() + " --clusters " +
                    (g_dir / ("det_fine" + tag + ".json.clusters.json")).string() +
                    " --min-freq 3 --threads 1 --out " +
                    (g_dir / ("det_report" + tag + ".json")).string()) != 0)
            return false;
    }
    return slurp(g_dir / "det_pre1.json") == slurp(g_dir / "det_pre2.json") &&
           slurp(g_dir / "det_fine1.json") == slurp(g_dir / "det_fine2.json") &&
           slurp(g_dir / "det_fine1.json.clusters.json") ==
               slurp(g_dir / "det_fine2.json.clusters.json") &&
           slurp(g_dir / "det_report1.json") == slurp(g_dir / "det_report2.json");
}

// ---------------------------------------------------------------- criterion 8

bool criterion_inference_invariance() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    ptm::ClusterModel model;
    model.k = 5;
    model.centroids = ptm::Matrix(5, 8);
    for (std::size_t c = 0; c < 5; ++c) {
        ptm::Vec v(8);
        for (double& x : v) x = gauss(rng);
        v = ptm::normalized(v);
        for (std::size_t j = 0; j < 8; ++j) model.centroids.at(c, j) = v[j];
    }
    for (int trial = 0; trial < 1000; ++trial) {
        ptm::Vec h(8);
        for (double& x : h) x = gauss(rng);
        const int base = ptm::infer_topic(h, model);
        for (double alpha : {1e-3, 1.0, 1e3}) {
            ptm::Vec scaled = h;
            for (double& x : scaled) x *= alpha;
            if (ptm::infer_topic(scaled, model) != base) return false;
            const ptm::Vec dist = ptm::topic_distribution(scaled, model);
            const double sum = std::accumulate(dist.begin(), dist.end(), 0.0);
            if (std::fabs(sum - 1.0) > 1e-9) return false;
            const auto arg = static_cast<int>(
                std::max_element(dist.begin(), dist.end()) - dist.begin());
            if (arg != base) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 9

bool criterion_intrusion() {
    ptm::TopicReport report;
    std::vector<std::set<std::string>> pools(3);
    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<ptm::TopicReport::Entry> entries;
        for (std::size_t i = 0; i < 60; ++i) {
            ptm::TopicReport::Entry e;
            e.mention = "t" + std::to_string(t) + "p" + std::to_string(i);
            e.freq = 5;
            e.score = 1.0 - 0.01 * static_cast<double>(i);
            entries.push_back(e);
            if (i < 50) pools[t].insert(e.mention);  // top-50 pool
        }
        report.topics.push_back(std::move(entries));
    }
    const auto questions = ptm::gen_intrusion_questions(report, 100, 13, 50);
    if (questions.size() != 100) return false;
    for (const auto& q : questions) {
        if (q.phrases.size() != 6) return false;
        if (q.intruder_index < 0 || q.intruder_index >= 6) return false;
        if (q.source_topic == q.intruder_topic) return false;
        if (q.source_topic < 0 || q.source_topic >= 3) return false;
        if (q.intruder_topic < 0 || q.intruder_topic >= 3) return false;
        const auto& src = pools[static_cast<std::size_t>(q.source_topic)];
        const auto& intr = pools[static_cast<std::size_t>(q.intruder_topic)];
        std::set<std::string> seen;
        for (int i = 0; i < 6; ++i) {
            const std::string& ph = q.phrases[static_cast<std::size_t>(i)];
            if (!seen.insert(ph).second) return false;
            if (i == q.intruder_index) {
                if (!intr.count(ph) || src.count(ph)) return false;
            } else {
                if (!src.count(ph)) return false;
            }
        }
    }
    return true;
}

bool report(const char* name, bool ok) {
    std::cout << name << ": " << (ok ? "PASS" : "FAIL") << std::endl;
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <phrasetopic-binary>\n";
        return 64;
    }
    g_binary = argv[1];
    g_dir = fs::temp_directory_path() / "ptm_acceptance";
    fs::create_directories(g_dir);

    int failures = 0;
    const auto t0 = Clock::now();
    failures += !report("criterion 1 (gradient fidelity)", criterion_gradients());
    failures += !report("criterion 2 (loss identities)", criterion_loss_identities());
    failures += !report("criterion 3 (oracle equivalence)", criterion_oracles());

    const auto t4 = Clock::now();
    const RecoveryResult rec3 = planted_recovery(3);
    const RecoveryResult rec5 = planted_recovery(5);
    const bool in_budget = seconds_since(t4) < 300.0;
    failures += !report("criterion 4 (planted-topic recovery)",
                        rec3.ok && rec5.ok && in_budget);
    failures += !report("criterion 5 (negative purity)",
                        negatives_pure(rec3.finetune_records) &&
                            negatives_pure(rec5.finetune_records));

    failures += !report("criterion 6 (metric formulas)", criterion_metrics());
    failures += !report("criterion 7 (determinism)", criterion_determinism());
    failures += !report("criterion 8 (inference invariance)",
                        criterion_inference_invariance());
    failures += !report("criterion 9 (intrusion generation)", criterion_intrusion());

    std::cerr << "total runtime " << seconds_since(t0) << " s\n";
    fs::remove_all(g_dir);
    return failures;
}
