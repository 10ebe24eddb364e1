#include "trce/denoiser.hpp"

#include <cmath>

#include "trce/errors.hpp"

namespace trce {

Tensor cross_attention(const Tensor& hidden, const Tensor& text_emb, const Tensor& wq,
                       const Tensor& wk, const Tensor& wv) {
    if (hidden.rank() != 2 || text_emb.rank() != 2 || hidden.cols() != wq.rows() ||
        text_emb.cols() != wk.rows() || text_emb.cols() != wv.rows() || wq.cols() != wk.cols())
        throw InvalidArgument("cross_attention: incompatible shapes");
    const double d = static_cast<double>(wq.cols());
    Tensor q = matmul(hidden, wq);
    Tensor k = matmul(text_emb, wk);
    Tensor v = matmul(text_emb, wv);
    Tensor attn = softmax_lastdim(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(d)));
    return matmul(attn, v);
}

namespace {

Tensor sinusoidal_embedding(int t, int dim) {
    Tensor e({1, dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        e.at(0, i) = std::sin(t * freq);
        e.at(0, half + i) = std::cos(t * freq);
    }
    return e;
}

struct Builder {
    Tape& tape;
    ParamBinder& params;
    const ModelArch& arch;
    int temb_feat = -1;  // [1, temb_dim], post-SiLU

    int conv3x3(int x, int c_in, int h, int w, int stride, const std::string& wname,
                const std::string& bname) {
        int u = tape.unfold3x3(x, c_in, h, w, stride);
        return tape.add_bias_rows(tape.matmul(params(wname), u), params(bname));
    }

    int resblock(int x, int c, int h, int w, const std::string& p) {
        int hpath = tape.group_norm(x, params(p + ".n1.g"), params(p + ".n1.b"), arch.den.groups);
        hpath = tape.silu(hpath);
        hpath = conv3x3(hpath, c, h, w, 1, p + ".c1.w", p + ".c1.b");
        int tb = tape.add_bias_cols(tape.matmul(temb_feat, params(p + ".t.w")),
                                    params(p + ".t.b"));
        hpath = tape.add_bias_rows(hpath, tape.reshape(tb, {c}));
        hpath = tape.group_norm(hpath, params(p + ".n2.g"), params(p + ".n2.b"), arch.den.groups);
        hpath = tape.silu(hpath);
        hpath = conv3x3(hpath, c, h, w, 1, p + ".c2.w", p + ".c2.b");
        return tape.add(x, hpath);
    }

    // ctx < 0 -> self-attention over the spatial tokens
    int attention(int x, int c, int ctx, const std::string& p, const EotAblation* ablation) {
        int hn = tape.group_norm(x, params(p + ".norm.g"), params(p + ".norm.b"), arch.den.groups);
        int ht = tape.transpose(hn);  // [HW, C]
        int q = tape.matmul(ht, params(p + ".wq"));
        int kv_src = ctx >= 0 ? ctx : ht;
        int k = tape.matmul(kv_src, params(p + ".wk"));
        int v = tape.matmul(kv_src, params(p + ".wv"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(arch.den.attn_dim));
        int attn = tape.softmax_lastdim(tape.scale(tape.matmul(q, tape.transpose(k)), scale));
        if (ablation && ablation->count > 0 && ctx >= 0)
            attn = tape.zero_cols(attn, ablation->first_eot, ablation->first_eot + ablation->count);
        int o = tape.matmul(attn, v);
        int proj = tape.add_bias_cols(tape.matmul(o, params(p + ".wo")), params(p + ".bo"));
        return tape.add(x, tape.transpose(proj));
    }
};

}  // namespace

int denoiser_on_tape(Tape& tape, ParamBinder& params, int z, int text, int t,
                     const ModelArch& arch, const EotAblation* ablation) {
    const DenoiserArch& dn = arch.den;
    const int s = dn.image_size;      // 16
    const int s2 = s / 2;             // 8
    Builder b{tape, params, arch};

    // two-layer time MLP; kept post-SiLU so blocks project it directly
    int sin = tape.constant(sinusoidal_embedding(t, dn.temb_dim / 2));
    int t1 = tape.silu(
        tape.add_bias_cols(tape.matmul(sin, params("un.temb.w1")), params("un.temb.b1")));
    b.temb_feat = tape.silu(
        tape.add_bias_cols(tape.matmul(t1, params("un.temb.w2")), params("un.temb.b2")));

    int h0 = b.conv3x3(z, 1, s, s, 1, "un.conv_in.w", "un.conv_in.b");      // [c1, s*s]
    int h1 = b.conv3x3(h0, dn.c1, s, s, 2, "un.down.ds.w", "un.down.ds.b");  // [c2, s2*s2]
    h1 = b.resblock(h1, dn.c2, s2, s2, "un.down.res");
    h1 = b.attention(h1, dn.c2, text, "un.down.xattn", ablation);

    int h2 = b.resblock(h1, dn.c2, s2, s2, "un.mid.res");
    h2 = b.attention(h2, dn.c2, -1, "un.mid.sattn", nullptr);
    h2 = b.attention(h2, dn.c2, text, "un.mid.xattn", ablation);

    int h3 = tape.add(h2, h1);
    h3 = b.conv3x3(h3, dn.c2, s2, s2, 1, "un.up.conv.w", "un.up.conv.b");  // [c1, s2*s2]
    h3 = tape.upsample2x(h3, dn.c1, s2, s2);                               // [c1, s*s]
    h3 = tape.add(h3, h0);
    h3 = b.resblock(h3, dn.c1, s, s, "un.up.res");

    int out = tape.group_norm(h3, params("un.out.norm.g"), params("un.out.norm.b"),
                              arch.den.groups);
    out = tape.silu(out);
    return b.conv3x3(out, dn.c1, s, s, 1, "un.out.w", "un.out.b");  // [1, s*s]
}

}  // namespace trce
