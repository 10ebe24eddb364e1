#pragma once

#include <map>
#include <string>

#include "trce/tensor.hpp"

namespace trce {

// Bias-corrected Adam over a named parameter set. Moments are keyed by
// parameter name; the step counter advances once per adam_step call.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// Updates every parameter that has a gradient entry; parameters without a
// gradient are left untouched. Iteration order follows the (sorted) map.
void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state, double lr);

}  // namespace trce
