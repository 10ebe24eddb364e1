#pragma once

#include <map>
#include <string>
#include <vector>

#include "trce/arch.hpp"
#include "trce/params.hpp"
#include "trce/tape.hpp"
#include "trce/vocab.hpp"

namespace trce {

// Per-position segment labels of an encoded prompt.
enum class Segment : unsigned char { SoT = 0, Word = 1, EoT = 2 };

struct PromptEncoding {
    Tensor embedding;               // [N, d_text]
    std::vector<Segment> segments;  // N entries
    int first_eot = 0;              // == word_count + 1
};

// Causal transformer encoder built on a tape (token embedding + learned
// positions, `blocks` masked self-attention blocks, final layer norm).
// Returns the [N, d_text] embedding node.
int encode_on_tape(Tape& tape, ParamBinder& params, const TokenSequence& tokens,
                   const TextArch& arch);

// Inference path: runs the same graph on a scratch tape.
PromptEncoding encode(const std::map<std::string, Tensor>& weights, const TokenSequence& tokens,
                      const TextArch& arch);

// Row at the first-EoT index, as a [1, d_text] tensor.
Tensor first_eot(const PromptEncoding& enc);

std::vector<Segment> segments_of(const TokenSequence& tokens);

}  // namespace trce
