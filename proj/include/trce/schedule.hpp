#pragma once

#include <vector>

namespace trce {

// DDPM forward-process constants. Index 0 is the clean state (alpha_bar = 1);
// betas run over 1..timesteps, linear in t.
struct NoiseSchedule {
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::vector<double> beta;       // [0..timesteps], beta[0] unused
    std::vector<double> alpha_bar;  // [0..timesteps], alpha_bar[0] == 1

    static NoiseSchedule linear(int timesteps = 1000, double beta_start = 1e-4,
                                double beta_end = 2e-2);

    double alpha_bar_at(int t) const;
    double sqrt_alpha_bar(int t) const;
    double sqrt_one_minus_alpha_bar(int t) const;
};

// Descending timestep ladder for deterministic DDIM sampling:
// round(T*k/steps) for k = steps..0.
std::vector<int> ddim_timesteps(int timesteps, int steps);

}  // namespace trce
