#include "radm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "radm/errors.hpp"
#include "radm/rng.hpp"

namespace radm {

namespace {

constexpr double kJacobiTol = 1e-14;
constexpr std::size_t kJacobiMaxSweeps = 64;

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, p) * m(i, q);
    return s;
}

/// Orthonormalize the still-empty columns listed in `missing` against the
/// filled ones, drawing from canonical basis vectors. Deterministic.
void complete_basis(Matrix& u, const std::vector<std::size_t>& missing) {
    if (missing.empty()) return;
    const std::size_t n = u.rows(), k = u.cols();
    std::vector<bool> filled(k, true);
    for (std::size_t j : missing) filled[j] = false;
    std::size_t cursor = 0;
    for (std::size_t j : missing) {
        for (; cursor < n; ++cursor) {
            std::vector<double> w(n, 0.0);
            w[cursor] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < k; ++c) {
                    if (!filled[c]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < n; ++i) proj += w[i] * u(i, c);
                    for (std::size_t i = 0; i < n; ++i) w[i] -= proj * u(i, c);
                }
            }
            double nrm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < n; ++i) u(i, j) = w[i] / nrm;
                filled[j] = true;
                ++cursor;
                break;
            }
        }
        if (!filled[j]) throw numeric_error("failed to complete orthonormal basis");
    }
}

/// Modified Gram-Schmidt with a re-orthogonalization pass. Columns that
/// collapse are replaced by fresh random directions so the block keeps
/// full column rank during subspace iteration.
void orthonormalize_columns(Matrix& v, Rng& rng) {
    const std::size_t n = v.rows(), k = v.cols();
    for (std::size_t j = 0; j < k; ++j) {
        for (int attempt = 0; attempt < 16; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < j; ++c) {
                    double proj = column_dot(v, j, c);
                    for (std::size_t i = 0; i < n; ++i) v(i, j) -= proj * v(i, c);
                }
            }
            double nrm = std::sqrt(column_dot(v, j, j));
            if (nrm > 1e-12) {
                for (std::size_t i = 0; i < n; ++i) v(i, j) /= nrm;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) v(i, j) = rng.uniform(-1.0, 1.0);
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
/// Returns eigenvalues in descending order with matching eigenvector columns.
void sym_eigen_desc(const Matrix& a, std::vector<double>& eigvals, Matrix& eigvecs) {
    const std::size_t n = a.rows();
    Matrix s = a;
    Matrix q = Matrix::identity(n);
    for (std::size_t sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apq = s(p, r);
                const double scale = std::sqrt(std::fabs(s(p, p) * s(r, r))) + std::fabs(apq);
                if (std::fabs(apq) <= kJacobiTol * std::max(scale, 1e-300)) continue;
                off = std::max(off, std::fabs(apq));
                const double zeta = (s(r, r) - s(p, p)) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double sip = s(i, p), sir = s(i, r);
                    s(i, p) = c * sip - sn * sir;
                    s(i, r) = sn * sip + c * sir;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double spi = s(p, i), sri = s(r, i);
                    s(p, i) = c * spi - sn * sri;
                    s(r, i) = sn * spi + c * sri;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double qip = q(i, p), qir = q(i, r);
                    q(i, p) = c * qip - sn * qir;
                    q(i, r) = sn * qip + c * qir;
                }
            }
        }
        if (off == 0.0) break;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return s(i, i) > s(j, j); });
    eigvals.resize(n);
    eigvecs = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        eigvals[j] = s(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) eigvecs(i, j) = q(i, order[j]);
    }
}

SvdResult svd_canonical_zero(const Matrix& m, std::size_t k) {
    SvdResult out;
    out.sigma.assign(k, 0.0);
    out.u = Matrix(m.rows(), k);
    out.v = Matrix(m.cols(), k);
    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), 0);
    complete_basis(out.u, all);
    complete_basis(out.v, all);
    return out;
}

}  // namespace

SvdResult full_svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("full_svd: empty matrix");
    const bool transposed = m.rows() < m.cols();
    // bt holds the working matrix transposed (d x n, d <= n): each of the d
    // directions being orthogonalized is a contiguous row.
    Matrix bt = transposed ? m : transpose(m);
    const std::size_t d = bt.rows(), n = bt.cols();
    if (max_abs(bt) == 0.0) return svd_canonical_zero(m, std::min(m.rows(), m.cols()));

    // One-sided Jacobi: rotate direction pairs until mutually orthogonal;
    // accumulated rotations form v, direction norms the singular values.
    Matrix v = Matrix::identity(d);
    bool converged = false;
    for (std::size_t sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                double* bp = bt.data() + p * n;
                double* bq = bt.data() + q * n;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    alpha += bp[i] * bp[i];
                    beta += bq[i] * bq[i];
                    gamma += bp[i] * bq[i];
                }
                if (std::fabs(gamma) <= kJacobiTol * std::sqrt(alpha * beta) || gamma == 0.0)
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = bp[i], xq = bq[i];
                    bp[i] = c * xp - s * xq;
                    bq[i] = s * xp + c * xq;
                }
                double* vp = v.data() + p * d;
                double* vq = v.data() + q * d;
                for (std::size_t i = 0; i < d; ++i) {
                    const double xp = vp[i], xq = vq[i];
                    vp[i] = c * xp - s * xq;
                    vq[i] = s * xp + c * xq;
                }
            }
        }
    }
    if (!converged) throw numeric_error("full_svd: one-sided Jacobi did not converge");

    std::vector<double> sigma(d);
    for (std::size_t j = 0; j < d; ++j) sigma[j] = std::sqrt(dot(bt.row(j), bt.row(j)));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult out;
    out.sigma.resize(d);
    out.u = Matrix(n, d);
    out.v = Matrix(d, d);
    const double zero_tol = sigma[order[0]] * 1e-13;
    std::vector<std::size_t> missing;
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t src = order[j];
        out.sigma[j] = sigma[src];
        for (std::size_t i = 0; i < d; ++i) out.v(i, j) = v(src, i);  // v rows accumulate V^T
        if (sigma[src] > zero_tol) {
            const double* brow = bt.data() + src * n;
            for (std::size_t i = 0; i < n; ++i) out.u(i, j) = brow[i] / sigma[src];
        } else {
            missing.push_back(j);
        }
    }
    complete_basis(out.u, missing);
    if (transposed) std::swap(out.u, out.v);
    return out;
}

SvdResult top_k_svd(const Matrix& m, std::size_t k, double tol, std::size_t max_iter) {
    const std::size_t min_dim = std::min(m.rows(), m.cols());
    if (k < 1 || k > min_dim) {
        throw std::invalid_argument("top_k_svd: k=" + std::to_string(k) +
                                    " out of range for " + m.shape_str());
    }
    if (tol <= 0.0) throw std::invalid_argument("top_k_svd: tol must be positive");
    if (m.rows() < m.cols()) {
        SvdResult r = top_k_svd(transpose(m), k, tol, max_iter);
        std::swap(r.u, r.v);
        return r;
    }
    if (max_abs(m) == 0.0) return svd_canonical_zero(m, k);

    const std::size_t d = m.cols();
    Rng rng(0x7261646Dull);  // fixed stream: identical inputs give identical output
    Matrix v(d, k);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-1.0, 1.0);
    orthonormalize_columns(v, rng);

    std::vector<double> est(k, 0.0), prev(k, 0.0);
    double last_change = 0.0;
    bool settled = false;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        Matrix w = matmul(m, v);  // n x k
        for (std::size_t j = 0; j < k; ++j) est[j] = std::sqrt(column_dot(w, j, j));
        const double top = *std::max_element(est.begin(), est.end());
        last_change = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            last_change = std::max(last_change, std::fabs(est[j] - prev[j]));
        last_change /= std::max(top, 1e-300);
        if (iter > 0 && last_change < tol) {
            settled = true;
            break;
        }
        prev = est;
        v = matmul(transpose(m), w);
        orthonormalize_columns(v, rng);
    }
    if (!settled) {
        throw numeric_error("top_k_svd did not converge after " + std::to_string(max_iter) +
                            " iterations (last relative change " +
                            std::to_string(last_change) + ")");
    }

    // Rayleigh-Ritz: rotate the converged block into singular vector form.
    Matrix w = matmul(m, v);
    Matrix t = matmul(transpose(w), w);
    std::vector<double> eigvals;
    Matrix q;
    sym_eigen_desc(t, eigvals, q);
    v = matmul(v, q);
    w = matmul(w, q);

    SvdResult out;
    out.sigma.resize(k);
    out.v = v;
    out.u = Matrix(m.rows(), k);
    double zero_tol = 0.0;
    for (double e : eigvals) zero_tol = std::max(zero_tol, std::sqrt(std::max(e, 0.0)));
    zero_tol *= 1e-13;
    std::vector<std::size_t> missing;
    for (std::size_t j = 0; j < k; ++j) {
        out.sigma[j] = std::sqrt(std::max(eigvals[j], 0.0));
        if (out.sigma[j] > zero_tol) {
            for (std::size_t i = 0; i < m.rows(); ++i) out.u(i, j) = w(i, j) / out.sigma[j];
        } else {
            missing.push_back(j);
        }
    }
    complete_basis(out.u, missing);
    return out;
}

Matrix soft_threshold(const Matrix& r, double tau) {
    if (tau < 0.0 || std::isnan(tau)) {
        throw std::invalid_argument("soft_threshold: tau must be non-negative");
    }
    Matrix out(r.rows(), r.cols());
    if (std::isinf(tau)) return out;  // dead zone covers everything
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = r.data()[i];
        if (x > tau)
            out.data()[i] = x - tau;
        else if (x < -tau)
            out.data()[i] = x + tau;
    }
    return out;
}

Matrix svt(const Matrix& m, double tau) {
    if (tau < 0.0 || std::isnan(tau)) throw std::invalid_argument("svt: tau must be non-negative");
    if (std::isinf(tau)) return Matrix(m.rows(), m.cols());
    SvdResult s = full_svd(m);
    Matrix us = s.u;  // scale columns by shrunken singular values
    for (std::size_t j = 0; j < s.sigma.size(); ++j) {
        const double shrunk = std::max(s.sigma[j] - tau, 0.0);
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= shrunk;
    }
    return matmul(us, transpose(s.v));
}

MatrixNorms norms(const Matrix& m) {
    MatrixNorms out;
    double sq = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double x = m.data()[i];
        sq += x * x;
        out.l1 += std::fabs(x);
        if (std::fabs(x) > 1e-12) ++out.l0;
    }
    out.frobenius = std::sqrt(sq);
    if (m.rows() > 0 && m.cols() > 0) {
        for (double s : full_svd(m).sigma) out.trace += s;
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double sq = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) sq += m.data()[i] * m.data()[i];
    return std::sqrt(sq);
}

double elementwise_l1(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += std::fabs(m.data()[i]);
    return s;
}

std::size_t nonzero_count(const Matrix& m) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (std::fabs(m.data()[i]) > 1e-12) ++c;
    return c;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols()) throw std::invalid_argument("solve_spd: matrix not square");
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("solve_spd shape mismatch: " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
            if (i == j) {
                if (s <= 0.0) throw numeric_error("solve_spd: non-positive pivot in Cholesky");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
            double s = x(i, c);
            for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * x(p, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
            double s = x(ii, c);
            for (std::size_t p = ii + 1; p < n; ++p) s -= l(p, ii) * x(p, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

}  // namespace radm
