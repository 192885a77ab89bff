#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptm/cluster.h"
#include "ptm/corpus.h"
#include "ptm/encoder.h"
#include "ptm/eval.h"
#include "ptm/topics.h"
#include "ptm/train.h"

namespace {

using nlohmann::json;

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ptm::Error("cannot open input file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return ptm::fnv1a(buf.str());
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

// Run manifest: enough to reproduce the run bit-for-bit. Written last,
// atomically (tmp + rename).
struct Manifest {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    json inputs = json::object();
    json outputs = json::array();
    std::string started_at;

    void add_input(const std::string& path) { inputs[path] = hash_file(path); }
    void add_output(const std::string& path) { outputs.push_back(path); }

    void write(const std::string& out_path) const {
        json j{{"command", command}, {"config", config},     {"seed", seed},
               {"inputs", inputs},   {"outputs", outputs},   {"started_at", started_at},
               {"finished_at", iso_now()}};
        const std::string tmp = out_path + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw ptm::Error("cannot write manifest: " + tmp);
            out << j.dump(2) << "\n";
        }
        std::filesystem::rename(tmp, out_path);
    }
};

json config_json(const ptm::TrainConfig& c) {
    return json{{"tau", c.tau},
                {"p_keep", c.p_keep},
                {"lr_pretrain", c.lr_pretrain},
                {"lr_finetune", c.lr_finetune},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"t_percent", c.t_percent},
                {"negatives_per_topic", c.negatives_per_topic},
                {"seed", c.seed},
                {"max_pairs_per_key", c.max_pairs_per_key},
                {"k_lo", c.k_lo},
                {"k_hi", c.k_hi},
                {"sample_size", c.sample_size},
                {"d_in", c.d_in},
                {"d", c.d}};
}

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--k-range", "expected LO:HI");
    try {
        return {std::stoul(spec.substr(0, colon)), std::stoul(spec.substr(colon + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--k-range", "expected LO:HI");
    }
}

std::vector<ptm::Vec> encode_all(const ptm::EncoderParams& params,
                                 const ptm::Corpus& corpus) {
    std::vector<ptm::Vec> embeddings;
    embeddings.reserve(corpus.instances.size());
    for (const auto& inst : corpus.instances)
        embeddings.push_back(ptm::encode(params, corpus, inst, true));
    return embeddings;
}

int threads_flag = 1;  // single-threaded reference path; flag validated only

void add_common_train_flags(CLI::App* cmd, ptm::TrainConfig* cfg) {
    cmd->add_option("--seed", cfg->seed, "run seed; all randomness flows from it");
    cmd->add_option("--tau", cfg->tau, "contrastive temperature")->check(CLI::PositiveNumber);
    cmd->add_option("--p-keep", cfg->p_keep, "probability a mention stays unmasked")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--epochs", cfg->epochs)->check(CLI::PositiveNumber);
    cmd->add_option("--max-pairs-per-key", cfg->max_pairs_per_key,
                    "cap on pairs enumerated per key (0 = unlimited)");
    cmd->add_option("--threads", threads_flag, "worker cap; 1 = deterministic path")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrastive phrase representation learning and topic mining"};
    app.require_subcommand(1);

    ptm::TrainConfig cfg;
    std::string corpus_path, phrases_path, model_path, clusters_path, report_path;
    std::string gold_path, out_path;
    std::size_t k = 0;
    bool auto_k = false;
    std::string k_range = "2:30";
    std::size_t min_freq = 3, top_n = 20, n_questions = 50, pool_size = 50;
    double tau_inf = 0.05;
    double lr = 0.0;

    auto* cmd_pretrain = app.add_subcommand("pretrain", "contrastive pretraining");
    cmd_pretrain->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    cmd_pretrain->add_option("--out", out_path, "output parameter file")->required();
    cmd_pretrain->add_option("--lr", lr, "pretraining learning rate");
    cmd_pretrain->add_option("--batch-size", cfg.batch_size)->check(CLI::PositiveNumber);
    cmd_pretrain->add_option("--d-in", cfg.d_in)->check(CLI::PositiveNumber);
    cmd_pretrain->add_option("--d", cfg.d)->check(CLI::PositiveNumber);
    add_common_train_flags(cmd_pretrain, &cfg);

    auto* cmd_finetune = app.add_subcommand("finetune", "cluster-assisted finetuning");
    cmd_finetune->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    cmd_finetune->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    cmd_finetune->add_option("--out", out_path, "output parameter file")->required();
    cmd_finetune->add_option("--k", k, "topic count")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    cmd_finetune->add_flag("--auto-k", auto_k, "select k by silhouette sweep");
    cmd_finetune->add_option("--k-range", k_range, "LO:HI for --auto-k");
    cmd_finetune->add_option("--t", cfg.t_percent, "confident percent per cluster")
        ->check(CLI::Range(0.0, 100.0));
    cmd_finetune->add_option("--lr", lr, "finetuning learning rate");
    cmd_finetune->add_option("--negatives-per-topic", cfg.negatives_per_topic)
        ->check(CLI::PositiveNumber);
    add_common_train_flags(cmd_finetune, &cfg);

    auto* cmd_mine = app.add_subcommand("mine", "topical phrase mining");
    cmd_mine->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    cmd_mine->add_option("--phrases", phrases_path, "candidate phrase list")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_mine->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    cmd_mine->add_option("--clusters", clusters_path)->required()->check(CLI::ExistingFile);
    cmd_mine->add_option("--out", out_path, "topic report file")->required();
    cmd_mine->add_option("--min-freq", min_freq, "minimum phrase frequency");
    cmd_mine->add_option("--top-n", top_n, "phrases kept per topic (0 = all)");
    cmd_mine->add_option("--tau-inf", tau_inf)->check(CLI::PositiveNumber);
    cmd_mine->add_option("--seed", cfg.seed);
    cmd_mine->add_option("--threads", threads_flag)->check(CLI::PositiveNumber);

    auto* cmd_eval = app.add_subcommand("eval", "metrics over a topic report");
    cmd_eval->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    cmd_eval->add_option("--report", report_path)->required()->check(CLI::ExistingFile);
    cmd_eval->add_option("--gold", gold_path, "gold labels (JSONL: id, l, r, label)")
        ->check(CLI::ExistingFile);
    cmd_eval->add_option("--model", model_path)->check(CLI::ExistingFile);
    cmd_eval->add_option("--clusters", clusters_path)->check(CLI::ExistingFile);
    cmd_eval->add_option("--out", out_path, "metrics file")->required();
    cmd_eval->add_option("--threads", threads_flag)->check(CLI::PositiveNumber);

    auto* cmd_select_k = app.add_subcommand("select-k", "silhouette topic-count sweep");
    cmd_select_k->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    cmd_select_k->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    cmd_select_k->add_option("--k-range", k_range);
    cmd_select_k->add_option("--sample", cfg.sample_size)->check(CLI::PositiveNumber);
    cmd_select_k->add_option("--seed", cfg.seed);
    cmd_select_k->add_option("--out", out_path)->required();
    cmd_select_k->add_option("--threads", threads_flag)->check(CLI::PositiveNumber);

    auto* cmd_intrusion = app.add_subcommand("gen-intrusion", "phrase intrusion questions");
    cmd_intrusion->add_option("--report", report_path)->required()->check(CLI::ExistingFile);
    cmd_intrusion->add_option("--out", out_path, "output prefix")->required();
    cmd_intrusion->add_option("--n", n_questions, "number of questions");
    cmd_intrusion->add_option("--pool", pool_size, "top-pool size per topic");
    cmd_intrusion->add_option("--seed", cfg.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    // Config validation is a usage error (exit 2), not a runtime failure.
    try {
        if (lr > 0.0) {
            cfg.lr_pretrain = lr;
            cfg.lr_finetune = lr;
        }
        std::tie(cfg.k_lo, cfg.k_hi) = parse_k_range(k_range);
        if (cmd_pretrain->parsed() || cmd_finetune->parsed()) cfg.validate();
        if (cmd_finetune->parsed() && k == 0 && !auto_k)
            throw ptm::Error("one of --k or --auto-k is required");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (cmd_pretrain->parsed()) {
            Manifest manifest{"pretrain", config_json(cfg), cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(corpus_path);
            const ptm::Corpus corpus = ptm::ingest_corpus(corpus_path);
            if (corpus.snapped_spans > 0)
                std::cerr << "warning: " << corpus.snapped_spans
                          << " spans snapped to token boundaries\n";
            std::ofstream telemetry_out(out_path + ".telemetry.jsonl");
            ptm::Telemetry telemetry(&telemetry_out);
            const ptm::EncoderParams params = ptm::pretrain(corpus, cfg, &telemetry);
            ptm::save_params(params, out_path);
            manifest.add_output(out_path);
            manifest.write(out_path + ".manifest.json");
        } else if (cmd_finetune->parsed()) {
            Manifest manifest{"finetune", config_json(cfg), cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(corpus_path);
            manifest.add_input(model_path);
            const ptm::Corpus corpus = ptm::ingest_corpus(corpus_path);
            const ptm::EncoderParams pretrained = ptm::load_params(model_path);
            std::ofstream telemetry_out(out_path + ".telemetry.jsonl");
            ptm::Telemetry telemetry(&telemetry_out);
            const ptm::FinetuneResult result =
                ptm::finetune_ccl(corpus, pretrained, auto_k ? 0 : k, cfg, &telemetry);
            ptm::save_params(result.params, out_path);
            ptm::save_cluster_model(result.model, out_path + ".clusters.json");
            ptm::save_pseudo_labeling(result.labeling, out_path + ".labels.json");
            manifest.config["chosen_k"] = result.chosen_k;
            manifest.add_output(out_path);
            manifest.add_output(out_path + ".clusters.json");
            manifest.add_output(out_path + ".labels.json");
            manifest.write(out_path + ".manifest.json");
        } else if (cmd_mine->parsed()) {
            Manifest manifest{"mine",
                              json{{"min_freq", min_freq},
                                   {"top_n", top_n},
                                   {"tau_inf", tau_inf}},
                              cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(corpus_path);
            manifest.add_input(phrases_path);
            manifest.add_input(model_path);
            manifest.add_input(clusters_path);
            const ptm::Corpus corpus = ptm::ingest_corpus(corpus_path);
            const ptm::EncoderParams params = ptm::load_params(model_path);
            ptm::check_compat(params, corpus);
            const ptm::ClusterModel model = ptm::load_cluster_model(clusters_path);
            if (model.centroids.cols != params.d)
                throw ptm::Error("cluster model dimension does not match encoder");
            const auto phrases = ptm::read_phrase_list(phrases_path);
            const ptm::TopicReport report =
                ptm::mine_topics(corpus, phrases, params, model, min_freq, top_n, tau_inf);
            if (report.skipped_phrases > 0)
                std::cerr << "warning: " << report.skipped_phrases
                          << " candidate phrases had no corpus mention\n";
            ptm::save_topic_report(report, out_path);
            manifest.add_output(out_path);
            manifest.write(out_path + ".manifest.json");
        } else if (cmd_eval->parsed()) {
            Manifest manifest{"eval", json::object(), cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(corpus_path);
            manifest.add_input(report_path);
            const ptm::Corpus corpus = ptm::ingest_corpus(corpus_path);
            const ptm::TopicReport report = ptm::load_topic_report(report_path);

            ptm::LabeledPartition partition;
            bool have_partition = false;
            if (!gold_path.empty()) {
                if (model_path.empty() || clusters_path.empty())
                    throw CLI::ValidationError("eval",
                                               "--gold requires --model and --clusters");
                manifest.add_input(gold_path);
                manifest.add_input(model_path);
                manifest.add_input(clusters_path);
                const ptm::EncoderParams params = ptm::load_params(model_path);
                ptm::check_compat(params, corpus);
                const ptm::ClusterModel model = ptm::load_cluster_model(clusters_path);
                if (model.centroids.cols != params.d)
                    throw ptm::Error("cluster model dimension does not match encoder");

                std::ifstream gold(gold_path);
                std::string line;
                std::size_t line_no = 0;
                while (std::getline(gold, line)) {
                    ++line_no;
                    if (line.empty()) continue;
                    json rec;
                    try {
                        rec = json::parse(line);
                    } catch (const json::exception& e) {
                        throw ptm::ParseError(gold_path + ":" + std::to_string(line_no) +
                                              ": " + e.what());
                    }
                    const auto id = rec.at("id").get<std::string>();
                    const auto l = rec.at("l").get<std::size_t>();
                    const auto r = rec.at("r").get<std::size_t>();
                    const ptm::PhraseInstance* found = nullptr;
                    for (const auto& inst : corpus.instances)
                        if (inst.sentence_id == id && inst.l <= l && r <= inst.r) {
                            found = &inst;
                            break;
                        }
                    if (found == nullptr)
                        throw ptm::Error(gold_path + ":" + std::to_string(line_no) +
                                         ": no matching corpus instance");
                    const ptm::Vec h = ptm::encode(params, corpus, *found, true);
                    partition.predicted.push_back(ptm::infer_topic(h, model));
                    partition.gold.push_back(rec.at("label").get<int>());
                }
                have_partition = true;
            }
            const ptm::ScoreReport scores = ptm::report_scores(
                report, corpus, have_partition ? &partition : nullptr);
            ptm::save_score_report(scores, out_path);
            manifest.add_output(out_path);
            manifest.write(out_path + ".manifest.json");
        } else if (cmd_select_k->parsed()) {
            Manifest manifest{"select-k",
                              json{{"k_lo", cfg.k_lo},
                                   {"k_hi", cfg.k_hi},
                                   {"sample_size", cfg.sample_size}},
                              cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(corpus_path);
            manifest.add_input(model_path);
            const ptm::Corpus corpus = ptm::ingest_corpus(corpus_path);
            const ptm::EncoderParams params = ptm::load_params(model_path);
            ptm::check_compat(params, corpus);
            const std::size_t chosen = ptm::select_topic_count(
                encode_all(params, corpus), cfg.k_lo, cfg.k_hi, cfg.sample_size, cfg.seed);
            {
                std::ofstream out(out_path);
                if (!out) throw ptm::Error("cannot write output: " + out_path);
                out << json{{"k", chosen}}.dump() << "\n";
            }
            std::cout << "selected k = " << chosen << "\n";
            manifest.add_output(out_path);
            manifest.write(out_path + ".manifest.json");
        } else if (cmd_intrusion->parsed()) {
            Manifest manifest{"gen-intrusion",
                              json{{"n", n_questions}, {"pool", pool_size}}, cfg.seed};
            manifest.started_at = iso_now();
            manifest.add_input(report_path);
            const ptm::TopicReport report = ptm::load_topic_report(report_path);
            const auto questions =
                ptm::gen_intrusion_questions(report, n_questions, cfg.seed, pool_size);
            ptm::write_intrusion_files(questions, out_path + ".questions.jsonl",
                                       out_path + ".key.jsonl");
            manifest.add_output(out_path + ".questions.jsonl");
            manifest.add_output(out_path + ".key.jsonl");
            manifest.write(out_path + ".manifest.json");
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ptm::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ptm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
