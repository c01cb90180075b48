#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "radm/errors.hpp"
#include "radm/linalg.hpp"
#include "radm/matrix.hpp"
#include "radm/rng.hpp"

using namespace radm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

double reconstruction_error(const Matrix& m, const SvdResult& s) {
    Matrix us = s.u;
    for (std::size_t j = 0; j < s.sigma.size(); ++j)
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= s.sigma[j];
    return frobenius_norm(sub(m, matmul(us, transpose(s.v))));
}

void check_orthonormal_columns(const Matrix& m, double tol) {
    Matrix g = matmul(transpose(m), m);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
            CHECK(std::fabs(g(i, j) - (i == j ? 1.0 : 0.0)) < tol);
}

}  // namespace

TEST_CASE("matrix construction validates data length and finiteness") {
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1.0, std::nan("")}), numeric_error);
    Matrix m(2, 3, 0.5);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 0.5);
}

TEST_CASE("matmul identity and hand example") {
    Rng rng(1);
    Matrix m = random_matrix(3, 5, rng);
    CHECK(matmul(Matrix::identity(3), m) == m);

    Matrix a(2, 2, {1, 2, 3, 4});
    Matrix b(2, 1, {0, 1});
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 2.0);
    CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(7);
    Matrix a = random_matrix(4, 3, rng);
    Matrix b = random_matrix(3, 5, rng);
    Matrix got = matmul(a, b);
    Matrix want = oracles::matmul_naive(a, b);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-14));
}

TEST_CASE("matmul dimension mismatch names both shapes") {
    Matrix a(2, 3), b(2, 2);
    try {
        matmul(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
}

TEST_CASE("rng is seed-deterministic and uniform draws stay in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(9);
    for (int i = 0; i < 1000; ++i) {
        double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    // shuffle must be a permutation
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    Rng d(3);
    d.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("soft_threshold branch examples") {
    Matrix pos(1, 1, {1.0});
    CHECK(soft_threshold(pos, 0.5)(0, 0) == 0.5);
    Matrix dead(1, 2, {0.3, -0.3});
    Matrix out = soft_threshold(dead, 0.5);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 0.0);
    Matrix neg(1, 1, {-2.0});
    CHECK(soft_threshold(neg, 0.5)(0, 0) == -1.5);
    CHECK_THROWS_AS(soft_threshold(pos, -0.1), std::invalid_argument);
}

TEST_CASE("soft_threshold matches per-entry grid-search prox oracle") {
    Rng rng(11);
    Matrix r = random_matrix(3, 3, rng, -2.0, 2.0);
    const double tau = 0.7;
    Matrix got = soft_threshold(r, tau);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double want = oracles::prox_grid_search(r.data()[i], tau);
        CHECK(std::fabs(got.data()[i] - want) <= 1e-4 + 1e-12);
    }
}

TEST_CASE("soft_threshold never grows magnitude and keeps sign") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix r = random_matrix(4, 4, rng, -3.0, 3.0);
        const double tau = rng.uniform(0.0, 2.0);
        Matrix out = soft_threshold(r, tau);
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(std::fabs(out.data()[i]) <= std::fabs(r.data()[i]) + 1e-15);
            if (out.data()[i] != 0.0)
                CHECK(std::signbit(out.data()[i]) == std::signbit(r.data()[i]));
        }
    }
}

TEST_CASE("top_k_svd on diagonal and identity matrices") {
    Matrix d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 1.0;
    SvdResult s = top_k_svd(d, 2);
    CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s.sigma[1] == doctest::Approx(2.0).epsilon(1e-9));

    SvdResult si = top_k_svd(Matrix::identity(4), 4);
    for (double sv : si.sigma) CHECK(sv == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("top_k_svd full-rank reconstruction and Gram eigenvalue oracle") {
    Rng rng(17);
    Matrix m = random_matrix(6, 4, rng);
    SvdResult s = top_k_svd(m, 4);
    CHECK(reconstruction_error(m, s) < 1e-8);
    check_orthonormal_columns(s.u, 1e-8);
    check_orthonormal_columns(s.v, 1e-8);
    for (std::size_t j = 0; j + 1 < s.sigma.size(); ++j) CHECK(s.sigma[j] >= s.sigma[j + 1]);

    std::vector<double> want = oracles::singular_values_via_gram(m);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(s.sigma[j] * s.sigma[j] == doctest::Approx(want[j] * want[j]).epsilon(1e-8));
}

TEST_CASE("top_k_svd residual never grows when k increases") {
    Rng rng(19);
    Matrix m = random_matrix(8, 5, rng);
    double prev = frobenius_norm(m);
    for (std::size_t k = 1; k <= 5; ++k) {
        const double res = reconstruction_error(m, top_k_svd(m, k));
        CHECK(res <= prev + 1e-9);
        prev = res;
    }
}

TEST_CASE("top_k_svd preconditions and wide matrices") {
    Matrix m(3, 5, 1.0);
    CHECK_THROWS_AS(top_k_svd(m, 0), std::invalid_argument);
    CHECK_THROWS_AS(top_k_svd(m, 4), std::invalid_argument);
    CHECK_THROWS_AS(top_k_svd(m, 1, -1.0), std::invalid_argument);

    // non-convergence carries the iteration count and residual
    Rng nc_rng(3);
    Matrix hard = random_matrix(6, 6, nc_rng);
    try {
        top_k_svd(hard, 2, 1e-16, 1);
        FAIL("expected non-convergence");
    } catch (const numeric_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("1 iteration") != std::string::npos);
        CHECK(msg.find("relative change") != std::string::npos);
    }

    Rng rng(23);
    Matrix wide = random_matrix(4, 7, rng);
    SvdResult s = top_k_svd(wide, 3);
    CHECK(s.u.rows() == 4);
    CHECK(s.v.rows() == 7);
    std::vector<double> want = oracles::singular_values_via_gram(wide);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(s.sigma[j] == doctest::Approx(want[j]).epsilon(1e-7));
}

TEST_CASE("full_svd handles rank deficiency with orthonormal completion") {
    Matrix m(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        m(i, 0) = static_cast<double>(i + 1);
        m(i, 1) = 2.0 * static_cast<double>(i + 1);  // dependent column
        m(i, 2) = (i == 0) ? 1.0 : 0.0;
    }
    SvdResult s = full_svd(m);
    check_orthonormal_columns(s.u, 1e-8);
    check_orthonormal_columns(s.v, 1e-8);
    CHECK(reconstruction_error(m, s) < 1e-8);
    CHECK(s.sigma.back() <= 1e-10);
}

TEST_CASE("svt diagonal shrinkage and zero threshold identity") {
    Matrix d(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    Matrix out = svt(d, 2.0);
    CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::fabs(out(1, 1)) < 1e-9);

    Rng rng(29);
    Matrix m = random_matrix(4, 4, rng);
    CHECK(frobenius_norm(sub(svt(m, 0.0), m)) < 1e-8);
    CHECK_THROWS_AS(svt(m, -1.0), std::invalid_argument);
}

TEST_CASE("svt trace norm matches shrunken singular values from oracle") {
    Rng rng(31);
    Matrix m = random_matrix(5, 5, rng);
    Matrix out = svt(m, 1.0);
    double want = 0.0;
    for (double sv : oracles::singular_values_via_gram(m)) want += std::max(sv - 1.0, 0.0);
    CHECK(norms(out).trace == doctest::Approx(want).epsilon(1e-7));
}

TEST_CASE("svt minimizes half squared distance plus tau trace norm on 2x2 grid perturbations") {
    // KKT audit: the svt output must beat nearby candidates.
    Rng rng(37);
    for (int rep = 0; rep < 5; ++rep) {
        Matrix m = random_matrix(2, 2, rng, -2.0, 2.0);
        const double tau = 0.8;
        Matrix s = svt(m, tau);
        auto objective = [&](const Matrix& cand) {
            double d = frobenius_norm(sub(cand, m));
            return 0.5 * d * d + tau * norms(cand).trace;
        };
        const double base = objective(s);
        for (double step : {1e-3, 1e-2, 0.1}) {
            for (std::size_t e = 0; e < 4; ++e) {
                for (double dir : {-1.0, 1.0}) {
                    Matrix cand = s;
                    cand.data()[e] += dir * step;
                    CHECK(objective(cand) >= base - 1e-9);
                }
            }
        }
    }
}

TEST_CASE("norms on zeros, a 3-4-5 row, and the Gram oracle trace") {
    MatrixNorms z = norms(Matrix(3, 3));
    CHECK(z.frobenius == 0.0);
    CHECK(z.l1 == 0.0);
    CHECK(z.l0 == 0);
    CHECK(std::fabs(z.trace) < 1e-12);

    MatrixNorms n = norms(Matrix(1, 2, {3.0, 4.0}));
    CHECK(n.frobenius == doctest::Approx(5.0));
    CHECK(n.l1 == doctest::Approx(7.0));
    CHECK(n.l0 == 2);

    Rng rng(41);
    Matrix m = random_matrix(4, 4, rng);
    double want = 0.0;
    for (double sv : oracles::singular_values_via_gram(m)) want += sv;
    CHECK(norms(m).trace == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("linalg operations are deterministic for identical inputs") {
    Rng rng(43);
    Matrix m = random_matrix(6, 4, rng);
    SvdResult a = top_k_svd(m, 3);
    SvdResult b = top_k_svd(m, 3);
    CHECK(a.u == b.u);
    CHECK(a.sigma == b.sigma);
    CHECK(a.v == b.v);
    CHECK(svt(m, 0.5) == svt(m, 0.5));
}

TEST_CASE("solve_spd solves a Cholesky-factorable system") {
    Rng rng(47);
    Matrix b = random_matrix(4, 4, rng);
    Matrix a = add(matmul(transpose(b), b), scale(Matrix::identity(4), 0.5));
    Matrix rhs = random_matrix(4, 2, rng);
    Matrix x = solve_spd(a, rhs);
    CHECK(frobenius_norm(sub(matmul(a, x), rhs)) < 1e-9);
    CHECK_THROWS_AS(solve_spd(Matrix(2, 2), rhs), std::invalid_argument);
}
