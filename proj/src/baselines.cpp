#include "radm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "radm/errors.hpp"
#include "radm/linalg.hpp"

namespace radm {

namespace {

std::vector<double> rowwise_sq_error(const Matrix& x, const Matrix& s) {
    std::vector<double> scores(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double d = x(i, j) - s(i, j);
            acc += d * d;
        }
        scores[i] = acc;
    }
    return scores;
}

std::vector<double> rowwise_l1(const Matrix& n) {
    std::vector<double> out(n.rows(), 0.0);
    for (std::size_t i = 0; i < n.rows(); ++i)
        for (std::size_t j = 0; j < n.cols(); ++j) out[i] += std::fabs(n(i, j));
    return out;
}

}  // namespace

PcaModel fit_pca(const Matrix& x, std::size_t k) {
    if (k < 1 || k > x.cols())
        throw std::invalid_argument("fit_pca: k=" + std::to_string(k) + " out of range for " +
                                    x.shape_str());
    PcaModel model;
    model.mean.assign(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) model.mean[j] += x(i, j);
    for (double& m : model.mean) m /= double(x.rows());

    Matrix centered = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) centered(i, j) -= model.mean[j];

    // beyond min(rows, cols) directions the projection is already exact
    const std::size_t k_eff = std::min(k, std::min(x.rows(), x.cols()));
    model.basis = top_k_svd(centered, k_eff).v;
    return model;
}

Matrix pca_reconstruct(const PcaModel& model, const Matrix& x) {
    Matrix centered = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) centered(i, j) -= model.mean[j];
    Matrix recon = matmul(matmul(centered, model.basis), transpose(model.basis));
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) recon(i, j) += model.mean[j];
    return recon;
}

std::vector<double> pca_scores(const PcaModel& model, const Matrix& x) {
    return rowwise_sq_error(x, pca_reconstruct(model, x));
}

DecompositionResult fit_pca_svd(const Matrix& x, std::size_t k) {
    PcaModel model = fit_pca(x, k);
    DecompositionResult r;
    r.s = pca_reconstruct(model, x);
    r.n = Matrix(x.rows(), x.cols());
    r.scores = rowwise_sq_error(x, r.s);
    r.row_noise_l1.assign(x.rows(), 0.0);
    r.residual = frobenius_norm(sub(x, r.s));
    return r;
}

double default_rpca_lambda(const Matrix& x) {
    return 1.0 / std::sqrt(double(std::max(x.rows(), x.cols())));
}

DecompositionResult fit_rpca_convex(const Matrix& x, double lambda, double tol,
                                    std::size_t max_iter) {
    if (lambda <= 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("fit_rpca_convex: lambda must be positive and finite");
    if (tol <= 0.0) throw std::invalid_argument("fit_rpca_convex: tol must be positive");

    DecompositionResult r;
    const double norm_x = frobenius_norm(x);
    if (norm_x == 0.0) {
        r.s = Matrix(x.rows(), x.cols());
        r.n = Matrix(x.rows(), x.cols());
        r.scores.assign(x.rows(), 0.0);
        r.row_noise_l1.assign(x.rows(), 0.0);
        return r;
    }

    // Inexact ALM for principal component pursuit: dual ascent on
    // Y with closed-form S (singular value thresholding at 1/penalty) and
    // N (entrywise soft threshold at lambda/penalty) blocks.
    const double sigma1 = top_k_svd(x, 1, 1e-6, 2000).sigma[0];
    const double dual_scale = std::max(sigma1, max_abs(x) / lambda);
    Matrix y = scale(x, 1.0 / dual_scale);
    double penalty = 1.25 / sigma1;
    const double growth = 1.5;
    const double penalty_max = penalty * 1e7;

    Matrix s(x.rows(), x.cols());
    Matrix n(x.rows(), x.cols());
    r.converged = false;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // N block, then S block against the fresh N
        Matrix resid = add(sub(x, s), scale(y, 1.0 / penalty));
        n = soft_threshold(resid, lambda / penalty);
        Matrix target = add(sub(x, n), scale(y, 1.0 / penalty));
        s = svt(target, 1.0 / penalty);
        // dual ascent on the feasibility gap
        Matrix gap = sub(sub(x, s), n);
        y = add(y, scale(gap, penalty));
        penalty = std::min(penalty * growth, penalty_max);

        r.residual = frobenius_norm(gap) / norm_x;
        r.residual_history.push_back(r.residual);
        r.iterations = iter + 1;
        if (r.residual < tol) {
            r.converged = true;
            break;
        }
    }
    r.s = std::move(s);
    r.n = std::move(n);
    r.scores = rowwise_sq_error(x, r.s);
    r.row_noise_l1 = rowwise_l1(r.n);
    return r;
}

DecompositionResult fit_rpca_factored(const Matrix& x, std::size_t k, double lambda, double mu,
                                      FactoredConfig config) {
    if (k < 1 || k > std::min(x.rows(), x.cols()))
        throw std::invalid_argument("fit_rpca_factored: k=" + std::to_string(k) +
                                    " out of range for " + x.shape_str());
    if (lambda < 0.0 || mu < 0.0)
        throw std::invalid_argument("fit_rpca_factored: lambda and mu must be >= 0");

    double ridge = mu / 2.0;
    if (ridge == 0.0) {
        ridge = 1e-10;
        std::cerr << "fit_rpca_factored: mu = 0 ridge system may be singular, adding floor "
                  << ridge << "\n";
    }

    // warm start from the truncated SVD
    SvdResult init = top_k_svd(x, k, 1e-6, 2000);
    Matrix w = init.u;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < w.rows(); ++i) w(i, j) *= init.sigma[j];
    Matrix v = transpose(init.v);
    Matrix n(x.rows(), x.cols());

    auto objective = [&]() {
        const double data = frobenius_norm(sub(sub(x, matmul(w, v)), n));
        const double fw = frobenius_norm(w), fv = frobenius_norm(v);
        return data * data + 0.5 * mu * (fw * fw + fv * fv) + lambda * elementwise_l1(n);
    };

    DecompositionResult r;
    double prev = objective();
    r.converged = false;
    for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
        const Matrix target = sub(x, n);
        // W: (V V^T + ridge I) W^T = V (X - N)^T
        Matrix gram_v = matmul(v, transpose(v));
        for (std::size_t i = 0; i < k; ++i) gram_v(i, i) += ridge;
        w = transpose(solve_spd(gram_v, matmul(v, transpose(target))));
        r.objective_history.push_back(objective());
        // V: (W^T W + ridge I) V = W^T (X - N)
        Matrix gram_w = matmul(transpose(w), w);
        for (std::size_t i = 0; i < k; ++i) gram_w(i, i) += ridge;
        v = solve_spd(gram_w, matmul(transpose(w), target));
        r.objective_history.push_back(objective());
        // N: closed-form shrinkage
        n = soft_threshold(sub(x, matmul(w, v)), lambda / 2.0);
        r.objective_history.push_back(objective());

        const double obj = r.objective_history.back();
        r.iterations = iter + 1;
        const double change = std::fabs(prev - obj) / std::max(std::fabs(prev), 1e-12);
        prev = obj;
        if (change < config.tol) {
            r.converged = true;
            break;
        }
    }
    r.s = matmul(w, v);
    r.n = std::move(n);
    r.residual = prev;
    r.scores = rowwise_sq_error(x, r.s);
    r.row_noise_l1 = rowwise_l1(r.n);
    return r;
}

DecompositionResult fit_drmf(const Matrix& x, std::size_t k, std::size_t e, double tol,
                             std::size_t max_iter) {
    if (k < 1 || k > std::min(x.rows(), x.cols()))
        throw std::invalid_argument("fit_drmf: k=" + std::to_string(k) + " out of range for " +
                                    x.shape_str());
    if (e > x.size())
        throw std::invalid_argument("fit_drmf: e=" + std::to_string(e) +
                                    " exceeds the entry count " + std::to_string(x.size()));

    Matrix n(x.rows(), x.cols());
    Matrix s(x.rows(), x.cols());
    DecompositionResult r;
    double prev = 1e300;
    r.converged = false;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // S block: best rank-k approximation of X - N
        SvdResult svd = top_k_svd(sub(x, n), std::min(k, std::min(x.rows(), x.cols())), 1e-7,
                                  2000);
        Matrix us = svd.u;
        for (std::size_t j = 0; j < svd.sigma.size(); ++j)
            for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= svd.sigma[j];
        s = matmul(us, transpose(svd.v));

        // N block: keep the e largest-magnitude residuals, lowest index wins ties
        Matrix resid = sub(x, s);
        n = Matrix(x.rows(), x.cols());
        if (e > 0) {
            std::vector<std::size_t> idx(resid.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                const double fa = std::fabs(resid.data()[a]), fb = std::fabs(resid.data()[b]);
                if (fa != fb) return fa > fb;
                return a < b;
            });
            for (std::size_t t = 0; t < e; ++t) n.data()[idx[t]] = resid.data()[idx[t]];
        }

        const double resid_norm = frobenius_norm(sub(sub(x, n), s));
        const double obj = resid_norm * resid_norm;
        r.objective_history.push_back(obj);
        r.iterations = iter + 1;
        r.residual = resid_norm;
        if (std::fabs(prev - obj) / std::max(prev, 1e-12) < tol) {
            r.converged = true;
            break;
        }
        prev = obj;
    }
    r.s = std::move(s);
    r.n = std::move(n);
    r.scores = rowwise_sq_error(x, r.s);
    r.row_noise_l1 = rowwise_l1(r.n);
    return r;
}

std::vector<double> fit_plain_ae(const Matrix& x, std::size_t hidden, const RobustConfig& config) {
    if (hidden < 1) throw std::invalid_argument("fit_plain_ae: hidden must be >= 1");
    RobustConfig cfg = config;
    cfg.lambda = kLambdaInfinity;  // no noise matrix anywhere in this path
    std::vector<LayerSpec> specs{
        LayerSpec::dense(x.cols(), hidden), LayerSpec::activation(Activation::sigmoid),
        LayerSpec::dense(hidden, x.cols()), LayerSpec::activation(Activation::sigmoid)};
    RobustModel model = train_rcae(x, specs, Shape{x.cols(), 1, 1}, cfg);
    return score(model, x);
}

}  // namespace radm
