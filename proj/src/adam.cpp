#include "trce/adam.hpp"

#include <cmath>

#include "trce/errors.hpp"

namespace trce {

void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw InvalidArgument("adam_step: lr must be positive");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        const auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw InvalidArgument("adam_step: gradient shape " + shape_str(g.shape) +
                                  " does not match parameter \"" + name + "\" " +
                                  shape_str(p.shape));
        Tensor& m = state.m.try_emplace(name, Tensor(p.shape)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(p.shape)).first->second;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace trce
