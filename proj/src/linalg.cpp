#include "trce/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "trce/errors.hpp"

namespace trce {

namespace {

struct Lu {
    Tensor lu;             // packed factors
    std::vector<int> piv;  // row permutation
    bool singular = false;
};

Lu lu_factor(const Tensor& a) {
    const int n = a.rows();
    Lu f{a, std::vector<int>(n), false};
    std::iota(f.piv.begin(), f.piv.end(), 0);
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(f.lu.at(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(f.lu.at(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) {
            f.singular = true;
            continue;
        }
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(f.lu.at(k, j), f.lu.at(p, j));
            std::swap(f.piv[k], f.piv[p]);
        }
        const double pivot = f.lu.at(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double m = f.lu.at(i, k) / pivot;
            f.lu.at(i, k) = m;
            for (int j = k + 1; j < n; ++j) f.lu.at(i, j) -= m * f.lu.at(k, j);
        }
    }
    return f;
}

// Solves A y = rhs in place given the factorization of A.
void lu_solve_vec(const Lu& f, std::vector<double>& y) {
    const int n = f.lu.rows();
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) b[i] = y[f.piv[i]];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) b[i] -= f.lu.at(i, j) * b[j];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) b[i] -= f.lu.at(i, j) * b[j];
        b[i] /= f.lu.at(i, i);
    }
    y = std::move(b);
}

double diag_condition_estimate(const Lu& f) {
    if (f.singular) return std::numeric_limits<double>::infinity();
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.lu.rows(); ++i) {
        const double v = std::abs(f.lu.at(i, i));
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    if (mn == 0.0) return std::numeric_limits<double>::infinity();
    return mx / mn;
}

}  // namespace

SolveResult solve_right(const Tensor& a, const Tensor& b, const RidgePolicy& policy) {
    if (a.rank() != 2 || a.rows() != a.cols())
        throw InvalidArgument("solve_right: A must be square, got " + shape_str(a.shape));
    if (b.rank() != 2 || b.cols() != a.rows())
        throw InvalidArgument("solve_right: B must be k x d with d = " + std::to_string(a.rows()) +
                              ", got " + shape_str(b.shape));
    const int d = a.rows();

    // X A = B  <=>  A^T X^T = B^T
    Tensor at = transpose(a);
    Lu f = lu_factor(at);
    double cond = diag_condition_estimate(f);
    bool ridged = false;
    if (!(cond <= policy.condition_limit)) {
        double trace = 0.0;
        for (int i = 0; i < d; ++i) trace += a.at(i, i);
        const double delta = policy.scale * trace / d;
        Tensor at_ridge = at;
        for (int i = 0; i < d; ++i) at_ridge.at(i, i) += delta;
        f = lu_factor(at_ridge);
        cond = diag_condition_estimate(f);
        ridged = true;
        if (!(cond <= policy.condition_limit))
            throw SingularSystemError("solve_right: system singular after ridge fallback", cond);
    }

    Tensor x({b.rows(), d});
    std::vector<double> col(d);
    for (int r = 0; r < b.rows(); ++r) {
        for (int j = 0; j < d; ++j) col[j] = b.at(r, j);
        lu_solve_vec(f, col);
        for (int j = 0; j < d; ++j) x.at(r, j) = col[j];
    }
    return SolveResult{std::move(x), cond, ridged};
}

void sym_eig(const Tensor& s, Tensor& values, Tensor& vectors) {
    if (s.rank() != 2 || s.rows() != s.cols())
        throw InvalidArgument("sym_eig: matrix must be square");
    const int n = s.rows();
    Tensor a = s;
    Tensor v = Tensor::identity(n);

    // cyclic Jacobi sweeps; deterministic rotation order
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - sn * akq;
                    a.at(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - sn * aqk;
                    a.at(q, k) = sn * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - sn * vkq;
                    v.at(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a.at(i, i) < a.at(j, j); });
    values = Tensor({n});
    vectors = Tensor({n, n});
    for (int j = 0; j < n; ++j) {
        values.data[j] = a.at(order[j], order[j]);
        for (int i = 0; i < n; ++i) vectors.at(i, j) = v.at(i, order[j]);
    }
}

Tensor sym_psd_sqrt(const Tensor& s, double sym_tol) {
    if (s.rank() != 2 || s.rows() != s.cols())
        throw InvalidArgument("sym_psd_sqrt: matrix must be square");
    const int n = s.rows();
    double asym = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) asym = std::max(asym, std::abs(s.at(i, j) - s.at(j, i)));
    const double scale = std::max(1.0, max_abs(s));
    if (asym > sym_tol * scale)
        throw InvalidArgument("sym_psd_sqrt: matrix asymmetric beyond tolerance (max |S-S^T| = " +
                              std::to_string(asym) + ")");

    // symmetrize before decomposing so the tolerance is not compounded
    Tensor sym({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) sym.at(i, j) = 0.5 * (s.at(i, j) + s.at(j, i));

    Tensor values, vectors;
    sym_eig(sym, values, vectors);
    for (int i = 0; i < n; ++i) values.data[i] = std::sqrt(std::max(0.0, values.data[i]));

    Tensor r({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += vectors.at(i, k) * values.data[k] * vectors.at(j, k);
            r.at(i, j) = acc;
            r.at(j, i) = acc;
        }
    return r;
}

}  // namespace trce
