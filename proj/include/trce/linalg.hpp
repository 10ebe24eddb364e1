#pragma once

#include "trce/tensor.hpp"

namespace trce {

struct SolveResult {
    Tensor x;
    double condition_estimate = 0.0;
    bool ridge_applied = false;
};

struct RidgePolicy {
    double condition_limit = 1e12;
    // delta = scale * trace(A) / d added to the diagonal on fallback
    double scale = 1e-8;
};

// Solves X * A = B for X (A square d x d, B k x d) via LU factorization of
// A^T with partial pivoting. If the condition estimate exceeds the limit a
// ridge term is added once and the solve is retried; a system that is still
// ill-conditioned raises SingularSystemError.
SolveResult solve_right(const Tensor& a, const Tensor& b, const RidgePolicy& policy = {});

// Symmetric eigendecomposition (cyclic Jacobi). Returns eigenvalues in
// `values` (ascending) and eigenvectors as columns of `vectors`.
void sym_eig(const Tensor& s, Tensor& values, Tensor& vectors);

// Symmetric PSD square root R with R * R = S. Eigenvalues below zero are
// clamped at zero; asymmetry beyond `sym_tol` is rejected.
Tensor sym_psd_sqrt(const Tensor& s, double sym_tol = 1e-10);

}  // namespace trce
