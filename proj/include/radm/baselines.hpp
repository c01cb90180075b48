#pragma once

#include <cstddef>
#include <vector>

#include "radm/matrix.hpp"
#include "radm/robust.hpp"

namespace radm {

/// Output of the matrix-decomposition baselines. Every method exposes the
/// same rowwise reconstruction-error scores; the signal/noise split and the
/// solver diagnostics ride along.
struct DecompositionResult {
    Matrix s;  // signal / reconstruction
    Matrix n;  // absorbed noise (zero for PCA and the autoencoders)
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = true;
    std::vector<double> scores;             // rowwise ||x - s||_2^2
    std::vector<double> row_noise_l1;       // rowwise ||n||_1 diagnostic
    std::vector<double> residual_history;   // convex RPCA feasibility trace
    std::vector<double> objective_history;  // factored RPCA / DRMF objective per update
};

/// Projection basis learned by PCA, usable on unseen rows.
struct PcaModel {
    std::vector<double> mean;  // column means
    Matrix basis;              // cols x k, orthonormal columns
};

PcaModel fit_pca(const Matrix& x, std::size_t k);
std::vector<double> pca_scores(const PcaModel& model, const Matrix& x);
Matrix pca_reconstruct(const PcaModel& model, const Matrix& x);

/// Truncated-SVD PCA on column-centered data: s = mean + Xc Uk Uk^T, n = 0.
DecompositionResult fit_pca_svd(const Matrix& x, std::size_t k);

/// The standard 1/sqrt(max(rows, cols)) default.
double default_rpca_lambda(const Matrix& x);

/// Convex robust PCA, min ||S||_* + lambda ||N||_1 s.t. X = S + N, solved by
/// inexact augmented Lagrange multipliers (SVT step for S, soft threshold for
/// N, penalty growth 1.5 from 1.25 / spectral norm). A run that exhausts
/// max_iter comes back flagged non-converged with its residual.
DecompositionResult fit_rpca_convex(const Matrix& x, double lambda, double tol = 1e-7,
                                    std::size_t max_iter = 500);

struct FactoredConfig {
    std::size_t max_iter = 200;
    double tol = 1e-8;
};

/// Factored robust PCA: min ||X - (WV + N)||_F^2 + (mu/2)(||W||^2 + ||V||^2)
/// + lambda ||N||_1 by exact alternating minimization (ridge solves for W
/// and V, soft threshold for N); the objective never increases.
DecompositionResult fit_rpca_factored(const Matrix& x, std::size_t k, double lambda, double mu,
                                      FactoredConfig config = {});

/// Direct robust matrix factorization: rank(S) <= k, ||N||_0 <= e. S by
/// truncated SVD of X - N, N by keeping the e largest-magnitude residuals
/// (ties broken toward the lowest linear index).
DecompositionResult fit_drmf(const Matrix& x, std::size_t k, std::size_t e, double tol = 1e-7,
                             std::size_t max_iter = 100);

/// Single-hidden-layer autoencoder with sigmoid decode on [0,1] inputs;
/// returns rowwise reconstruction-error scores.
std::vector<double> fit_plain_ae(const Matrix& x, std::size_t hidden, const RobustConfig& config);

}  // namespace radm
