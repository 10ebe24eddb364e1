#pragma once

#include <map>
#include <string>

#include "trce/arch.hpp"
#include "trce/params.hpp"
#include "trce/tape.hpp"

namespace trce {

// Zeroes post-softmax cross-attention columns for the first `count` EoT
// positions of the conditioning prompt (no renormalization). Applied only to
// the prompt-conditioned branch; count == 0 leaves the graph untouched.
struct EotAblation {
    int first_eot = 0;
    int count = 0;
};

// Single-head scaled dot-product attention: Softmax(Q K^T / sqrt(d)) V with
// Q = hidden * Wq, K = text * Wk, V = text * Wv. Standalone form of the
// block used inside the denoiser.
Tensor cross_attention(const Tensor& hidden, const Tensor& text_emb, const Tensor& wq,
                       const Tensor& wk, const Tensor& wv);

// Noise prediction graph. `z` is a [1, H*W] node, `text` the [N, d_text]
// conditioning node. Returns a [1, H*W] prediction node.
int denoiser_on_tape(Tape& tape, ParamBinder& params, int z, int text, int t,
                     const ModelArch& arch, const EotAblation* ablation = nullptr);

}  // namespace trce
