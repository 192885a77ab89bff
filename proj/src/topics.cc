#include "ptm/topics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "json.hpp"
#include "ptm/objectives.h"

namespace ptm {

namespace {

Vec centroid_sims(const Vec& h, const ClusterModel& model) {
    Vec sims(model.k);
    Vec c(model.centroids.cols);
    for (std::size_t i = 0; i < model.k; ++i) {
        std::copy(model.centroids.row(i), model.centroids.row(i) + model.centroids.cols,
                  c.begin());
        sims[i] = cosine_sim(h, c);
    }
    return sims;
}

}  // namespace

int infer_topic(const Vec& h, const ClusterModel& model) {
    const Vec sims = centroid_sims(h, model);
    int best = 0;
    for (std::size_t i = 1; i < sims.size(); ++i)
        if (sims[i] > sims[best]) best = static_cast<int>(i);
    return best;
}

Vec topic_distribution(const Vec& h, const ClusterModel& model, double tau_inf) {
    if (!(tau_inf > 0.0)) throw Error("tau_inf must be positive");
    Vec logits = centroid_sims(h, model);
    for (double& l : logits) l /= tau_inf;
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    Vec probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = std::exp(logits[i] - m) / z;
    return probs;
}

std::pair<Vec, int> mention_topic(const std::vector<Vec>& instance_embeddings,
                                  const ClusterModel& model, double tau_inf) {
    if (instance_embeddings.empty()) throw Error("mention_topic: empty instance list");
    Vec mean(model.k, 0.0);
    for (const Vec& h : instance_embeddings) {
        const Vec z = topic_distribution(h, model, tau_inf);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += z[i];
    }
    for (double& v : mean) v /= static_cast<double>(instance_embeddings.size());
    int best = 0;
    for (std::size_t i = 1; i < mean.size(); ++i)
        if (mean[i] > mean[best]) best = static_cast<int>(i);
    return {mean, best};
}

TopicReport mine_topics(const Corpus& corpus, const std::vector<std::string>& phrase_list,
                        const EncoderParams& params, const ClusterModel& model,
                        std::size_t min_frequency, std::size_t top_n, double tau_inf) {
    if (phrase_list.empty()) throw Error("mine_topics: empty phrase list");

    // Corpus instances grouped by case-folded mention text.
    std::map<std::string, std::vector<std::size_t>> by_mention;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i)
        by_mention[casefold(corpus.mention_text(corpus.instances[i]))].push_back(i);

    TopicReport report;
    report.min_frequency = min_frequency;
    report.top_n = top_n;
    report.topics.assign(model.k, {});

    // Deduplicate candidates, keeping input order.
    std::vector<std::string> candidates;
    for (const std::string& p : phrase_list) {
        const std::string folded = casefold(p);
        if (std::find(candidates.begin(), candidates.end(), folded) == candidates.end())
            candidates.push_back(folded);
    }

    for (const std::string& mention : candidates) {
        auto it = by_mention.find(mention);
        if (it == by_mention.end()) {
            ++report.skipped_phrases;
            continue;
        }
        std::vector<Vec> embeddings;
        for (std::size_t idx : it->second)
            embeddings.push_back(encode(params, corpus, corpus.instances[idx], true));
        auto [dist, topic] = mention_topic(embeddings, model, tau_inf);
        TopicReport::Entry entry;
        entry.mention = mention;
        entry.freq = it->second.size();
        entry.score = dist[static_cast<std::size_t>(topic)];
        if (entry.freq >= min_frequency)
            report.topics[static_cast<std::size_t>(topic)].push_back(std::move(entry));
    }

    for (auto& entries : report.topics) {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.mention < b.mention;
        });
        if (top_n > 0 && entries.size() > top_n) entries.resize(top_n);
    }
    return report;
}

void save_topic_report(const TopicReport& report, const std::string& path) {
    nlohmann::json j;
    j["min_frequency"] = report.min_frequency;
    j["top_n"] = report.top_n;
    j["skipped_phrases"] = report.skipped_phrases;
    j["topics"] = nlohmann::json::array();
    for (std::size_t t = 0; t < report.topics.size(); ++t) {
        nlohmann::json topic;
        topic["id"] = t;
        topic["phrases"] = nlohmann::json::array();
        for (const auto& e : report.topics[t])
            topic["phrases"].push_back(
                {{"mention", e.mention}, {"freq", e.freq}, {"score", e.score}});
        j["topics"].push_back(std::move(topic));
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write topic report: " + path);
    out << j.dump(2) << "\n";
}

TopicReport load_topic_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open topic report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt topic report " + path + ": " + e.what());
    }
    TopicReport report;
    try {
        report.min_frequency = j.at("min_frequency").get<std::size_t>();
        report.top_n = j.at("top_n").get<std::size_t>();
        report.skipped_phrases = j.value("skipped_phrases", std::size_t{0});
        for (const auto& topic : j.at("topics")) {
            std::vector<TopicReport::Entry> entries;
            for (const auto& p : topic.at("phrases")) {
                TopicReport::Entry e;
                e.mention = p.at("mention").get<std::string>();
                e.freq = p.at("freq").get<std::size_t>();
                e.score = p.at("score").get<double>();
                entries.push_back(std::move(e));
            }
            report.topics.push_back(std::move(entries));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt topic report " + path + ": " + e.what());
    }
    return report;
}

std::vector<IntrusionQuestion> gen_intrusion_questions(const TopicReport& report,
                                                       std::size_t n_questions,
                                                       std::uint64_t seed,
                                                       std::size_t pool_size) {
    std::vector<std::vector<std::string>> pools(report.topics.size());
    for (std::size_t t = 0; t < report.topics.size(); ++t)
        for (std::size_t i = 0; i < report.topics[t].size() && i < pool_size; ++i)
            pools[t].push_back(report.topics[t][i].mention);

    std::vector<std::size_t> sources, donors;
    for (std::size_t t = 0; t < pools.size(); ++t) {
        if (pools[t].size() >= 5) sources.push_back(t);
        if (!pools[t].empty()) donors.push_back(t);
    }
    auto deficient = [&]() {
        std::string msg;
        for (std::size_t t = 0; t < pools.size(); ++t)
            if (pools[t].size() < 5)
                msg += " topic " + std::to_string(t) + " (pool " +
                       std::to_string(pools[t].size()) + ")";
        return msg;
    };
    if (sources.empty() || donors.size() < 2)
        throw Error("intrusion pools too small:" + deficient());

    std::mt19937_64 rng(seed);
    std::vector<IntrusionQuestion> questions;
    for (std::size_t q = 0; q < n_questions; ++q) {
        const std::size_t src =
            sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)];
        std::vector<std::size_t> other_donors;
        for (std::size_t t : donors)
            if (t != src) other_donors.push_back(t);
        const std::size_t intr = other_donors[std::uniform_int_distribution<std::size_t>(
            0, other_donors.size() - 1)(rng)];

        std::vector<std::string> picks(pools[src]);
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(5);
        const std::string intruder = pools[intr][std::uniform_int_distribution<std::size_t>(
            0, pools[intr].size() - 1)(rng)];

        IntrusionQuestion question;
        question.qid = "q" + std::to_string(q);
        question.phrases = picks;
        question.phrases.push_back(intruder);
        std::shuffle(question.phrases.begin(), question.phrases.end(), rng);
        for (std::size_t i = 0; i < question.phrases.size(); ++i)
            if (question.phrases[i] == intruder) question.intruder_index = static_cast<int>(i);
        question.source_topic = static_cast<int>(src);
        question.intruder_topic = static_cast<int>(intr);
        questions.push_back(std::move(question));
    }
    return questions;
}

void write_intrusion_files(const std::vector<IntrusionQuestion>& questions,
                           const std::string& questions_path, const std::string& key_path) {
    std::ofstream qout(questions_path);
    if (!qout) throw Error("cannot write questions file: " + questions_path);
    std::ofstream kout(key_path);
    if (!kout) throw Error("cannot write answer key: " + key_path);
    for (const auto& q : questions) {
        qout << nlohmann::json{{"qid", q.qid}, {"phrases", q.phrases}}.dump() << "\n";
        kout << nlohmann::json{{"qid", q.qid},
                               {"intruder_index", q.intruder_index},
                               {"source_topic", q.source_topic},
                               {"intruder_topic", q.intruder_topic}}
                    .dump()
             << "\n";
    }
}

}  // namespace ptm
