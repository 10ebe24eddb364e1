#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "trce/rng.hpp"
#include "trce/tensor.hpp"

namespace trce::test {

// Central finite-difference gradient of a scalar function of flat parameters.
// Evaluates the function from scratch for every perturbation, so it stays
// independent of the tape's backward pass.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max({den, std::abs(a[i]), std::abs(b[i])});
    }
    return num / std::max(den, 1e-8);
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    rng.fill_normal(t, stddev);
    return t;
}

// Random symmetric positive definite matrix G^T G + eps I.
inline Tensor random_spd(int n, Rng& rng, double eps = 1e-3) {
    Tensor g = random_tensor({n, n}, rng);
    Tensor s = matmul(transpose(g), g);
    for (int i = 0; i < n; ++i) s.at(i, i) += eps;
    return s;
}

}  // namespace trce::test
