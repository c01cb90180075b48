#pragma once

#include <cstddef>
#include <vector>

#include "radm/matrix.hpp"

namespace radm {

/// Leading singular triplets: u (n x k) and v (d x k) have orthonormal
/// columns, sigma is non-increasing and non-negative.
struct SvdResult {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

/// Top-k singular triplets by block power iteration with Rayleigh-Ritz
/// extraction on the smaller Gram dimension. Deterministic start block.
/// Throws numeric_error (with iteration count and residual) if the singular
/// value estimates have not settled to `tol` relative change in `max_iter`
/// iterations.
SvdResult top_k_svd(const Matrix& m, std::size_t k, double tol = 1e-7,
                    std::size_t max_iter = 500);

/// Full SVD via one-sided Jacobi applied on the smaller dimension.
/// Returns min(rows, cols) triplets; zero singular directions get an
/// orthonormal basis completion so the column-orthonormality contract holds.
SvdResult full_svd(const Matrix& m);

/// Elementwise shrink-toward-zero by tau: r - tau if r > tau, r + tau if
/// r < -tau, 0 otherwise. The proximal operator of tau * |.|_1.
Matrix soft_threshold(const Matrix& r, double tau);

/// Singular value thresholding: u * diag(soft_threshold(sigma, tau)) * v^T.
/// The proximal operator of the trace norm.
Matrix svt(const Matrix& m, double tau);

struct MatrixNorms {
    double frobenius = 0.0;
    double l1 = 0.0;
    std::size_t l0 = 0;  // entries with |x| > 1e-12
    double trace = 0.0;  // sum of singular values
};

MatrixNorms norms(const Matrix& m);

double frobenius_norm(const Matrix& m);
double elementwise_l1(const Matrix& m);
std::size_t nonzero_count(const Matrix& m);

/// Solve A * X = B for symmetric positive definite A by Cholesky.
/// Throws numeric_error if the factorization hits a non-positive pivot.
Matrix solve_spd(const Matrix& a, const Matrix& b);

}  // namespace radm
