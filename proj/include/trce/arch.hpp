#pragma once

#include <string>
#include <vector>

namespace trce {

struct TextArch {
    int vocab_size = 0;
    int dim = 16;
    int blocks = 2;
    int heads = 2;
    int seq_len = 16;
};

// 16x16x1 image path: conv-in, one downsampled block with a cross-attention,
// a mid block with one self-attention and one cross-attention, an upsampling
// block, conv-out. Attention dim is the QK width.
struct DenoiserArch {
    int image_size = 16;
    int c1 = 8;   // channels at full resolution
    int c2 = 16;  // channels at half resolution
    int attn_dim = 32;
    int temb_dim = 64;
    int groups = 4;
};

struct ModelArch {
    TextArch text;
    DenoiserArch den;
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    // init kinds: normal(sigma), xavier (1/sqrt fan-in), ones, zeros
    enum class Init { Normal02, Xavier, Ones, Zeros } init = Init::Xavier;
};

// The full named-parameter layout, in deterministic construction order.
// Single source of truth for initialization and checkpoint validation.
std::vector<ParamSpec> expected_params(const ModelArch& arch);

// Selectors used by the two erasure stages.
bool is_cross_attention_kv(const std::string& name);
bool is_visual_layer(const std::string& name);  // self-attn weights + cross-attn W_Q
bool is_encoder_param(const std::string& name);

}  // namespace trce
