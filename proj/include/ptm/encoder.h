#ifndef PTM_ENCODER_H_
#define PTM_ENCODER_H_

#include <string>

#include "ptm/common.h"
#include "ptm/corpus.h"

namespace ptm {

// Affine reference encoder: h = projection * [span_mean ; context_mean] + bias.
// span_mean is the mean token embedding over the span (a single MASK row when
// the mention is masked); context_mean is the mean over all non-span tokens,
// or zero when the sentence has no context tokens.
struct EncoderParams {
    std::size_t d_in = 32;
    std::size_t d = 64;
    std::uint64_t vocab_hash = 0;
    Matrix token_table;  // V x d_in
    Matrix projection;   // d x 2*d_in
    Vec bias;            // d

    bool operator==(const EncoderParams&) const = default;
};

// Gradient of a scalar w.r.t. every parameter, same shapes as EncoderParams.
struct ParamGrad {
    Matrix token_table;
    Matrix projection;
    Vec bias;

    explicit ParamGrad(const EncoderParams& p)
        : token_table(p.token_table.rows, p.token_table.cols),
          projection(p.projection.rows, p.projection.cols),
          bias(p.bias.size(), 0.0) {}
};

// token_table and projection uniform in [-0.1, 0.1], bias zero.
EncoderParams init_params(const Corpus& corpus, std::size_t d_in, std::size_t d,
                          std::uint64_t seed);

Vec encode(const EncoderParams& params, const Corpus& corpus,
           const PhraseInstance& instance, bool mask_mention);

// Accumulates d(upstream . h)/d(params) into *grad.
void add_encode_gradient(const EncoderParams& params, const Corpus& corpus,
                         const PhraseInstance& instance, bool mask_mention,
                         const Vec& upstream, ParamGrad* grad);

void apply_sgd(EncoderParams* params, const ParamGrad& grad, double lr);

void save_params(const EncoderParams& params, const std::string& path);
EncoderParams load_params(const std::string& path);

// Vocab-hash / dimension compatibility; throws on mismatch.
void check_compat(const EncoderParams& params, const Corpus& corpus);

}  // namespace ptm

#endif  // PTM_ENCODER_H_
