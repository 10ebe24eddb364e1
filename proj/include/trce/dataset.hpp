#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trce/tensor.hpp"
#include "trce/vocab.hpp"

namespace trce {

// Canonical 16x16 pattern in [-1, 1], optionally shifted by integer jitter.
// Known patterns: cross, circle, square, stripes.
Tensor render_pattern(const std::string& pattern, int jx = 0, int jy = 0, int image_size = 16);

struct DatasetConfig {
    int per_pattern = 500;
    int jitter = 1;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
    int image_size = 16;
};

struct Example {
    std::vector<std::string> words;
    std::string pattern;
    Tensor image;  // [1, H*W]
};

struct SyntheticDataset {
    std::vector<Example> items;
};

// Balanced prompt/image pairs: every concept is rendered under each of its
// surface forms with (near-)equal frequency, exactly equal for the malicious
// concept, cycling through the prompt templates.
SyntheticDataset make_dataset(const Vocabulary& vocab, const DatasetConfig& cfg);

}  // namespace trce
