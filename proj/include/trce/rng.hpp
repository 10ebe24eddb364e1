#pragma once

#include <cstdint>

#include "trce/tensor.hpp"

namespace trce {

// xoshiro256** seeded through splitmix64. Self-contained so that streams are
// reproducible bit-for-bit across process restarts and toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // uniform in [0, 1)
    double uniform();
    // standard normal via Box-Muller
    double normal();
    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    void fill_normal(Tensor& t, double stddev = 1.0);

private:
    std::uint64_t s_[4];
};

// Mixes a base seed with stream labels; used to hand out independent
// deterministic streams (one per sample / prompt / trajectory).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace trce
