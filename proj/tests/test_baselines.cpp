#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radm/baselines.hpp"
#include "radm/linalg.hpp"
#include "radm/robust.hpp"

using namespace radm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

struct PlantedInstance {
    Matrix x;
    Matrix signal;
    std::vector<std::size_t> spike_support;
};

/// Low-rank signal plus sparse large-magnitude spikes with known support.
PlantedInstance planted_low_rank_sparse(std::size_t n, std::size_t d, std::size_t rank,
                                        double spike_fraction, double spike_magnitude,
                                        Rng& rng) {
    Matrix u = random_matrix(n, rank, rng), v = random_matrix(rank, d, rng);
    PlantedInstance inst;
    inst.signal = scale(matmul(u, v), 1.0 / std::sqrt(double(rank)));
    inst.x = inst.signal;
    const std::size_t n_spikes = std::size_t(spike_fraction * double(n * d));
    std::vector<std::size_t> all(n * d);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    for (std::size_t t = 0; t < n_spikes; ++t) {
        const std::size_t e = all[t];
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        inst.x.data()[e] += sign * spike_magnitude;
        inst.spike_support.push_back(e);
    }
    std::sort(inst.spike_support.begin(), inst.spike_support.end());
    return inst;
}

std::size_t argmax_index(const std::vector<double>& v) {
    return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("pca reproduces data that already lies in a low-rank subspace") {
    Rng rng(1);
    Matrix a = random_matrix(12, 1, rng), b = random_matrix(1, 6, rng);
    Matrix x = matmul(a, b);  // rank 1
    DecompositionResult r1 = fit_pca_svd(x, 1);
    CHECK(frobenius_norm(sub(r1.s, x)) < 1e-8);

    Matrix general = random_matrix(10, 5, rng);
    DecompositionResult rfull = fit_pca_svd(general, 5);
    CHECK(frobenius_norm(sub(rfull.s, general)) < 1e-8);
    CHECK(nonzero_count(rfull.n) == 0);

    CHECK_THROWS_AS(fit_pca_svd(general, 0), std::invalid_argument);
    CHECK_THROWS_AS(fit_pca_svd(general, 6), std::invalid_argument);
}

TEST_CASE("pca flags the one point off a line") {
    Rng rng(2);
    Matrix x(21, 2);
    for (std::size_t i = 0; i < 20; ++i) {
        const double t = rng.uniform(-1.0, 1.0);
        x(i, 0) = t;
        x(i, 1) = 2.0 * t + 0.5;  // collinear
    }
    x(20, 0) = 0.1;
    x(20, 1) = -3.0;  // off the line
    DecompositionResult r = fit_pca_svd(x, 1);
    CHECK(argmax_index(r.scores) == 20);
}

TEST_CASE("pca scores follow a row permutation of the input") {
    Rng rng(3);
    Matrix x = random_matrix(9, 4, rng);
    DecompositionResult base = fit_pca_svd(x, 2);
    std::vector<std::size_t> perm{4, 0, 8, 2, 6, 1, 7, 3, 5};
    DecompositionResult permuted = fit_pca_svd(take_rows(x, perm), 2);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(permuted.scores[i] == doctest::Approx(base.scores[perm[i]]).epsilon(1e-9));
}

TEST_CASE("pca model scores unseen rows against the learned subspace") {
    Rng rng(4);
    Matrix train(30, 3);
    for (std::size_t i = 0; i < 30; ++i) {
        const double t = rng.uniform(-1.0, 1.0);
        train(i, 0) = t;
        train(i, 1) = 0.5 * t;
        train(i, 2) = -t + 1.0;
    }
    PcaModel model = fit_pca(train, 1);
    Matrix test(2, 3);
    test(0, 0) = 0.4;
    test(0, 1) = 0.2;
    test(0, 2) = 0.6;  // on the line
    test(1, 0) = 0.0;
    test(1, 1) = 5.0;
    test(1, 2) = 1.0;  // far off
    std::vector<double> s = pca_scores(model, test);
    CHECK(s[0] < 1e-12);
    CHECK(s[1] > 1.0);
}

TEST_CASE("convex rpca: huge lambda keeps all points normal") {
    Rng rng(5);
    Matrix x = random_matrix(15, 10, rng);
    DecompositionResult r = fit_rpca_convex(x, 1e12, 1e-7, 300);
    CHECK(r.converged);
    CHECK(nonzero_count(r.n) == 0);
    CHECK(frobenius_norm(sub(r.s, x)) / frobenius_norm(x) < 1e-6);
}

TEST_CASE("convex rpca: vanishing lambda leaves no signal") {
    Rng rng(6);
    Matrix x = random_matrix(12, 8, rng);
    DecompositionResult r = fit_rpca_convex(x, 1e-8, 1e-7, 300);
    CHECK(frobenius_norm(r.s) < 1e-4 * frobenius_norm(x));
}

TEST_CASE("convex rpca recovers a planted low-rank plus sparse decomposition") {
    Rng rng(7);
    PlantedInstance inst = planted_low_rank_sparse(100, 100, 5, 0.05, 10.0, rng);
    DecompositionResult r = fit_rpca_convex(inst.x, 1.0 / std::sqrt(100.0), 1e-7, 300);
    CHECK(r.converged);
    const double rel = frobenius_norm(sub(r.s, inst.signal)) / frobenius_norm(inst.signal);
    CHECK(rel < 1e-3);
    // feasibility at convergence
    CHECK(frobenius_norm(sub(sub(inst.x, r.s), r.n)) / frobenius_norm(inst.x) < 1e-7);
    // the feasibility proxy decreases over the run
    CHECK(r.residual_history.back() < r.residual_history.front());
    std::size_t violations = 0;
    for (std::size_t i = 1; i < r.residual_history.size(); ++i)
        if (r.residual_history[i] > r.residual_history[i - 1]) ++violations;
    CHECK(violations * 5 <= r.residual_history.size());  // mostly monotone
}

TEST_CASE("convex rpca flags non-convergence instead of silently stopping") {
    Rng rng(8);
    Matrix x = random_matrix(10, 10, rng);
    DecompositionResult r = fit_rpca_convex(x, 0.1, 1e-12, 3);
    CHECK_FALSE(r.converged);
    CHECK(r.residual > 0.0);
    CHECK(r.iterations == 3);
}

TEST_CASE("factored rpca objective assembly and monotonicity") {
    Rng rng(9);
    Matrix x = random_matrix(20, 12, rng);
    DecompositionResult r = fit_rpca_factored(x, 3, 0.5, 0.0);
    // mu = 0: the recorded objective is exactly data + lambda * l1
    const double data = frobenius_norm(sub(sub(x, r.s), r.n));
    const double want = data * data + 0.5 * elementwise_l1(r.n);
    CHECK(r.objective_history.back() == doctest::Approx(want).epsilon(1e-10));
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-9);
}

TEST_CASE("factored rpca with huge lambda reduces to a ridge factorization") {
    Rng rng(10);
    Matrix x = random_matrix(15, 10, rng);
    DecompositionResult r = fit_rpca_factored(x, 4, 1e9, 0.2);
    CHECK(nonzero_count(r.n) == 0);
    CHECK(r.converged);
}

TEST_CASE("factored rpca finds the planted spike support on the convex instance") {
    Rng rng(7);  // same instance family as the convex recovery test
    PlantedInstance inst = planted_low_rank_sparse(100, 100, 5, 0.05, 10.0, rng);
    FactoredConfig fc;
    fc.max_iter = 400;
    DecompositionResult r = fit_rpca_factored(inst.x, 5, 0.1, 0.1, fc);
    std::size_t hits = 0;
    for (std::size_t e : inst.spike_support)
        if (std::fabs(r.n.data()[e]) > 1e-6) ++hits;
    CHECK(double(hits) >= 0.95 * double(inst.spike_support.size()));
}

TEST_CASE("drmf with no noise budget is exactly a truncated svd") {
    Rng rng(12);
    Matrix x = random_matrix(12, 8, rng);
    DecompositionResult r = fit_drmf(x, 3, 0);
    SvdResult svd = top_k_svd(x, 3);
    Matrix us = svd.u;
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= svd.sigma[j];
    Matrix want = matmul(us, transpose(svd.v));
    CHECK(frobenius_norm(sub(r.s, want)) < 1e-7);
    CHECK(nonzero_count(r.n) == 0);
}

TEST_CASE("drmf with a full budget absorbs everything") {
    Rng rng(13);
    Matrix x = random_matrix(6, 5, rng);
    DecompositionResult r = fit_drmf(x, 2, x.size());
    CHECK(r.residual < 1e-12);
    CHECK_THROWS_AS(fit_drmf(x, 2, x.size() + 1), std::invalid_argument);
    CHECK_THROWS_AS(fit_drmf(x, 0, 3), std::invalid_argument);
}

TEST_CASE("drmf recovers an exactly planted spike support") {
    Rng rng(14);
    const std::size_t e_budget = 12;
    Matrix u = random_matrix(40, 2, rng), v = random_matrix(2, 30, rng);
    Matrix x = matmul(u, v);
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    std::vector<std::size_t> support(all.begin(), all.begin() + e_budget);
    // distinct magnitudes keep the top-e selection unambiguous; spikes stay
    // below the signal's top singular values so the subspace is not bent
    for (std::size_t t = 0; t < e_budget; ++t)
        x.data()[support[t]] += (2.0 + 0.25 * double(t)) * (t % 2 == 0 ? 1.0 : -1.0);
    DecompositionResult r = fit_drmf(x, 2, e_budget);
    std::vector<std::size_t> got;
    for (std::size_t e = 0; e < x.size(); ++e)
        if (r.n.data()[e] != 0.0) got.push_back(e);
    std::sort(support.begin(), support.end());
    CHECK(got == support);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-9);
}

TEST_CASE("plain autoencoder drives training loss below one percent on easy data") {
    Rng rng(15);
    Matrix x(30, 8);
    for (std::size_t i = 0; i < 30; ++i) {
        const double s = rng.uniform(), t = rng.uniform();
        for (std::size_t j = 0; j < 8; ++j)
            x(i, j) = 0.5 + 0.3 * std::sin(2.1 * s + 0.8 * double(j)) *
                                std::cos(1.3 * t + 0.4 * double(j));
    }
    RobustConfig cfg;
    cfg.mu = 0.0;
    cfg.learning_rate = 0.05;
    cfg.epochs_per_theta_step = 150;
    cfg.max_alternations = 3;
    cfg.batch_size = 10;
    cfg.seed = 4;
    Rng init_rng(cfg.seed);
    Network probe = build_network(
        {LayerSpec::dense(8, 8), LayerSpec::activation(Activation::sigmoid), LayerSpec::dense(8, 8),
         LayerSpec::activation(Activation::sigmoid)},
        Shape{8, 1, 1}, init_rng);
    const double initial = mse_loss(reconstruct(probe, x), x).loss;

    std::vector<double> scores = fit_plain_ae(x, 8, cfg);
    const double final_loss = std::accumulate(scores.begin(), scores.end(), 0.0);
    CHECK(final_loss < 0.01 * initial);

    std::vector<double> again = fit_plain_ae(x, 8, cfg);
    CHECK(scores == again);  // same seed, same scores
}

TEST_CASE("every robust method ranks a single gross outlier row first") {
    Rng rng(16);
    Matrix u = random_matrix(25, 2, rng), v = random_matrix(2, 10, rng);
    Matrix x = matmul(u, v);
    for (std::size_t j = 0; j < 10; ++j) x(7, j) += (j % 2 == 0 ? 1.5 : -1.5);

    CHECK(argmax_index(fit_rpca_convex(x, default_rpca_lambda(x), 1e-7, 300).scores) == 7);
    CHECK(argmax_index(fit_rpca_factored(x, 2, 0.3, 0.1).scores) == 7);
    CHECK(argmax_index(fit_drmf(x, 2, 20).scores) == 7);

    // robust autoencoder on a normalized copy
    Matrix x01 = x;
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < x01.size(); ++i) {
        lo = std::min(lo, x01.data()[i]);
        hi = std::max(hi, x01.data()[i]);
    }
    for (std::size_t i = 0; i < x01.size(); ++i) x01.data()[i] = (x01.data()[i] - lo) / (hi - lo);
    RobustConfig cfg;
    cfg.lambda = 0.3;
    cfg.mu = 0.01;
    cfg.learning_rate = 0.02;
    cfg.epochs_per_theta_step = 30;
    cfg.max_alternations = 6;
    cfg.batch_size = 8;
    cfg.seed = 11;
    RobustModel model = train_rcae(
        x01,
        {LayerSpec::dense(10, 4), LayerSpec::activation(Activation::sigmoid),
         LayerSpec::dense(4, 10), LayerSpec::activation(Activation::sigmoid)},
        Shape{10, 1, 1}, cfg);
    CHECK(argmax_index(score(model, x01)) == 7);
}
