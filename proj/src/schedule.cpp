#include "trce/schedule.hpp"

#include <cmath>

#include "trce/errors.hpp"

namespace trce {

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1 || !(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start < beta_end))
        throw InvalidArgument("noise schedule: need 0 < beta_start < beta_end < 1");
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.assign(timesteps + 1, 0.0);
    s.alpha_bar.assign(timesteps + 1, 1.0);
    double acc = 1.0;
    for (int t = 1; t <= timesteps; ++t) {
        const double frac = timesteps == 1 ? 0.0 : static_cast<double>(t - 1) / (timesteps - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        acc *= 1.0 - s.beta[t];
        s.alpha_bar[t] = acc;
    }
    return s;
}

double NoiseSchedule::sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar_at(t)); }

double NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
    return std::sqrt(1.0 - alpha_bar_at(t));
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > timesteps)
        throw InvalidArgument("schedule: timestep " + std::to_string(t) + " out of [0, " +
                              std::to_string(timesteps) + "]");
    return alpha_bar[static_cast<std::size_t>(t)];
}

std::vector<int> ddim_timesteps(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw InvalidArgument("ddim_timesteps: invalid step count " + std::to_string(steps));
    std::vector<int> ts(static_cast<std::size_t>(steps) + 1);
    for (int k = steps; k >= 0; --k) {
        const double v = static_cast<double>(timesteps) * k / steps;
        ts[static_cast<std::size_t>(steps - k)] = static_cast<int>(std::lround(v));
    }
    return ts;  // descending, ts.front() == timesteps, ts.back() == 0
}

}  // namespace trce
