#include "ptm/encoder.h"

#include <fstream>
#include <random>

#include "json.hpp"

namespace ptm {

EncoderParams init_params(const Corpus& corpus, std::size_t d_in, std::size_t d,
                          std::uint64_t seed) {
    EncoderParams p;
    p.d_in = d_in;
    p.d = d;
    p.vocab_hash = corpus.vocab_hash();
    p.token_table = Matrix(corpus.vocab.size(), d_in);
    p.projection = Matrix(d, 2 * d_in);
    p.bias.assign(d, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-0.1, 0.1);
    for (double& v : p.token_table.data) v = uni(rng);
    for (double& v : p.projection.data) v = uni(rng);
    return p;
}

namespace {

struct Features {
    std::vector<int> span_ids;     // single MASK id when masked
    std::vector<int> context_ids;  // may be empty
};

Features gather(const Corpus& corpus, const PhraseInstance& inst, bool mask) {
    Features f;
    f.span_ids = mask ? std::vector<int>{kMaskId} : corpus.span_token_ids(inst);
    if (f.span_ids.empty())
        throw Error("instance span covers no token in sentence " + inst.sentence_id);
    f.context_ids = corpus.context_token_ids(inst);
    return f;
}

// [span_mean ; context_mean], length 2*d_in.
Vec input_features(const EncoderParams& p, const Features& f) {
    Vec x(2 * p.d_in, 0.0);
    for (int id : f.span_ids) {
        const double* row = p.token_table.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < p.d_in; ++j) x[j] += row[j];
    }
    for (std::size_t j = 0; j < p.d_in; ++j) x[j] /= static_cast<double>(f.span_ids.size());
    if (!f.context_ids.empty()) {
        for (int id : f.context_ids) {
            const double* row = p.token_table.row(static_cast<std::size_t>(id));
            for (std::size_t j = 0; j < p.d_in; ++j) x[p.d_in + j] += row[j];
        }
        for (std::size_t j = 0; j < p.d_in; ++j)
            x[p.d_in + j] /= static_cast<double>(f.context_ids.size());
    }
    return x;
}

}  // namespace

Vec encode(const EncoderParams& params, const Corpus& corpus,
           const PhraseInstance& instance, bool mask_mention) {
    Features f = gather(corpus, instance, mask_mention);
    Vec x = input_features(params, f);
    Vec h(params.d);
    for (std::size_t i = 0; i < params.d; ++i) {
        double acc = params.bias[i];
        const double* prow = params.projection.row(i);
        for (std::size_t j = 0; j < 2 * params.d_in; ++j) acc += prow[j] * x[j];
        h[i] = acc;
    }
    return h;
}

void add_encode_gradient(const EncoderParams& params, const Corpus& corpus,
                         const PhraseInstance& instance, bool mask_mention,
                         const Vec& upstream, ParamGrad* grad) {
    Features f = gather(corpus, instance, mask_mention);
    Vec x = input_features(params, f);

    // d(u.h)/d(bias) = u;  d(u.h)/d(projection) = u x^T.
    for (std::size_t i = 0; i < params.d; ++i) {
        grad->bias[i] += upstream[i];
        double* prow = grad->projection.row(i);
        for (std::size_t j = 0; j < 2 * params.d_in; ++j) prow[j] += upstream[i] * x[j];
    }

    // d(u.h)/dx = projection^T u, split between span and context halves and
    // distributed over the contributing token rows.
    Vec dx(2 * params.d_in, 0.0);
    for (std::size_t i = 0; i < params.d; ++i) {
        const double* prow = params.projection.row(i);
        for (std::size_t j = 0; j < 2 * params.d_in; ++j) dx[j] += upstream[i] * prow[j];
    }
    const double span_scale = 1.0 / static_cast<double>(f.span_ids.size());
    for (int id : f.span_ids) {
        double* trow = grad->token_table.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < params.d_in; ++j) trow[j] += span_scale * dx[j];
    }
    if (!f.context_ids.empty()) {
        const double ctx_scale = 1.0 / static_cast<double>(f.context_ids.size());
        for (int id : f.context_ids) {
            double* trow = grad->token_table.row(static_cast<std::size_t>(id));
            for (std::size_t j = 0; j < params.d_in; ++j)
                trow[j] += ctx_scale * dx[params.d_in + j];
        }
    }
}

void apply_sgd(EncoderParams* params, const ParamGrad& grad, double lr) {
    for (std::size_t i = 0; i < params->token_table.data.size(); ++i)
        params->token_table.data[i] -= lr * grad.token_table.data[i];
    for (std::size_t i = 0; i < params->projection.data.size(); ++i)
        params->projection.data[i] -= lr * grad.projection.data[i];
    for (std::size_t i = 0; i < params->bias.size(); ++i)
        params->bias[i] -= lr * grad.bias[i];
}

void save_params(const EncoderParams& params, const std::string& path) {
    nlohmann::json j;
    j["d_in"] = params.d_in;
    j["d"] = params.d;
    j["V"] = params.token_table.rows;
    j["vocab_hash"] = params.vocab_hash;
    j["token_table"] = params.token_table.data;
    j["projection"] = params.projection.data;
    j["bias"] = params.bias;
    std::ofstream out(path);
    if (!out) throw Error("cannot write parameter file: " + path);
    out << j.dump() << "\n";
}

EncoderParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open parameter file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt parameter file " + path + ": " + e.what());
    }
    EncoderParams p;
    try {
        p.d_in = j.at("d_in").get<std::size_t>();
        p.d = j.at("d").get<std::size_t>();
        std::size_t v = j.at("V").get<std::size_t>();
        p.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
        p.token_table = Matrix(v, p.d_in);
        p.token_table.data = j.at("token_table").get<std::vector<double>>();
        p.projection = Matrix(p.d, 2 * p.d_in);
        p.projection.data = j.at("projection").get<std::vector<double>>();
        p.bias = j.at("bias").get<Vec>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt parameter file " + path + ": " + e.what());
    }
    if (p.token_table.data.size() != p.token_table.rows * p.d_in ||
        p.projection.data.size() != p.d * 2 * p.d_in || p.bias.size() != p.d)
        throw ParseError("parameter file " + path + ": dimension mismatch");
    return p;
}

void check_compat(const EncoderParams& params, const Corpus& corpus) {
    if (params.vocab_hash != corpus.vocab_hash())
        throw Error("model/corpus vocab hash mismatch");
    if (params.token_table.rows != corpus.vocab.size())
        throw Error("model/corpus vocab size mismatch");
}

}  // namespace ptm
