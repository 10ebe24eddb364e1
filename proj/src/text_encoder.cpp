#include "trce/text_encoder.hpp"

#include <cmath>

#include "trce/errors.hpp"

namespace trce {

namespace {

Tensor causal_mask(int n) {
    Tensor m({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m.at(i, j) = -1e30;
    return m;
}

}  // namespace

int encode_on_tape(Tape& tape, ParamBinder& params, const TokenSequence& tokens,
                   const TextArch& arch) {
    const int n = arch.seq_len;
    const int d = arch.dim;
    const int hd = d / arch.heads;
    if (static_cast<int>(tokens.ids.size()) != n)
        throw InvalidArgument("encode: token sequence length " +
                              std::to_string(tokens.ids.size()) + ", expected " +
                              std::to_string(n));

    int x = tape.add(tape.gather_rows(params("te.tok_emb"), tokens.ids), params("te.pos_emb"));
    const int mask = tape.constant(causal_mask(n));
    const double qk_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    for (int b = 0; b < arch.blocks; ++b) {
        const std::string p = "te.b" + std::to_string(b);
        int h = tape.layer_norm_rows(x, params(p + ".ln1.g"), params(p + ".ln1.b"));
        int q = tape.matmul(h, params(p + ".wq"));
        int k = tape.matmul(h, params(p + ".wk"));
        int v = tape.matmul(h, params(p + ".wv"));
        int heads = -1;
        for (int hi = 0; hi < arch.heads; ++hi) {
            const int c0 = hi * hd, c1 = c0 + hd;
            int qh = tape.slice_cols(q, c0, c1);
            int kh = tape.slice_cols(k, c0, c1);
            int vh = tape.slice_cols(v, c0, c1);
            int scores = tape.add(tape.scale(tape.matmul(qh, tape.transpose(kh)), qk_scale), mask);
            int attn = tape.softmax_lastdim(scores);
            int oh = tape.matmul(attn, vh);
            heads = hi == 0 ? oh : tape.concat_cols(heads, oh);
        }
        int attn_out = tape.add_bias_cols(tape.matmul(heads, params(p + ".wo")),
                                          params(p + ".bo"));
        x = tape.add(x, attn_out);

        int h2 = tape.layer_norm_rows(x, params(p + ".ln2.g"), params(p + ".ln2.b"));
        int m = tape.silu(tape.add_bias_cols(tape.matmul(h2, params(p + ".mlp.w1")),
                                             params(p + ".mlp.b1")));
        int m2 = tape.add_bias_cols(tape.matmul(m, params(p + ".mlp.w2")), params(p + ".mlp.b2"));
        x = tape.add(x, m2);
    }
    return tape.layer_norm_rows(x, params("te.lnf.g"), params("te.lnf.b"));
}

std::vector<Segment> segments_of(const TokenSequence& tokens) {
    std::vector<Segment> segs(tokens.ids.size(), Segment::EoT);
    segs[0] = Segment::SoT;
    for (int i = 1; i <= tokens.word_count; ++i) segs[static_cast<std::size_t>(i)] = Segment::Word;
    return segs;
}

PromptEncoding encode(const std::map<std::string, Tensor>& weights, const TokenSequence& tokens,
                      const TextArch& arch) {
    Tape tape;
    ParamBinder params(tape, weights);
    const int out = encode_on_tape(tape, params, tokens, arch);
    PromptEncoding enc;
    enc.embedding = tape.value(out);
    enc.segments = segments_of(tokens);
    enc.first_eot = tokens.word_count + 1;
    if (!enc.embedding.all_finite()) throw Error("encode: non-finite embedding");
    return enc;
}

Tensor first_eot(const PromptEncoding& enc) {
    const int d = enc.embedding.cols();
    Tensor row({1, d});
    for (int c = 0; c < d; ++c) row.at(0, c) = enc.embedding.at(enc.first_eot, c);
    return row;
}

}  // namespace trce
