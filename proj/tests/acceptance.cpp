// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgeted criteria also fail when they overrun their wall-clock
// allowance. Run via ctest (test name "acceptance") or directly.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "radm/baselines.hpp"
#include "radm/experiment.hpp"
#include "radm/linalg.hpp"
#include "radm/metrics.hpp"
#include "radm/robust.hpp"

using namespace radm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

fs::path g_workdir;

std::string work(const std::string& name) { return (g_workdir / name).string(); }

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<missing:" + path + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig digits_base(const std::string& out) {
    ExperimentConfig c;
    c.synthetic = "digits";
    c.n_normal = 220;
    c.n_anomaly = 11;
    c.seeds = {1, 2, 3, 4, 5};
    c.out_dir = out;
    return c;
}

ExperimentConfig manifold_base(const std::string& out) {
    ExperimentConfig c;
    c.synthetic = "manifold";
    c.n_normal = 50;
    c.n_anomaly = 5;
    c.dims = 20;
    c.arch = "dense";
    c.k = 8;
    c.lambda = 0.3;
    c.mu = 0.01;
    c.learning_rate = 0.02;
    c.epochs = 30;
    c.batch = 16;
    c.alternations = 10;
    c.objective_tol = 1e-5;
    c.seeds = {1, 2, 3, 4, 5};
    c.out_dir = out;
    return c;
}

// --------------------------------------------------------------------------

/// usps-style task. With real usps data (RADM_USPS_MANIFEST) the absolute
/// bars apply; on the documented synthetic digit-pair surrogate the
/// criterion is RCAE AUROC above plain-AE AUROC, both at their own
/// converged settings.
bool criterion_1(std::string& detail) {
    ExperimentConfig rcae = digits_base(work("c1_rcae"));
    rcae.method = Method::rcae;
    rcae.lambda = 0.4;
    rcae.mu = 0.01;
    rcae.learning_rate = 2e-3;
    rcae.epochs = 10;
    rcae.alternations = 6;
    rcae.batch = 32;
    rcae.objective_tol = 1e-6;

    const char* usps = std::getenv("RADM_USPS_MANIFEST");
    if (usps && *usps) {
        rcae.synthetic.clear();
        rcae.manifest = usps;
        ReportBundle rb = run_experiment(rcae);
        const double auroc_mean = rb.aggregate_mean("auroc");
        const double p10 = rb.aggregate_mean("p_at_k");
        std::ostringstream ss;
        ss << "usps RCAE auroc=" << auroc_mean << " p@10=" << p10
           << " (need >= 0.95 and >= 0.8)";
        detail = ss.str();
        return auroc_mean >= 0.95 && p10 >= 0.8;
    }

    ExperimentConfig ae = digits_base(work("c1_ae"));
    ae.method = Method::ae;
    ae.k = 64;
    ae.mu = 0.01;
    ae.learning_rate = 2e-3;
    ae.epochs = 600;  // train the plain autoencoder to its convergence plateau
    ae.alternations = 1;
    ae.batch = 32;

    ReportBundle rb = run_experiment(rcae);
    ReportBundle ab = run_experiment(ae);
    const double r = rb.aggregate_mean("auroc");
    const double a = ab.aggregate_mean("auroc");
    std::ostringstream ss;
    ss << "surrogate RCAE auroc=" << r << " vs AE auroc=" << a << " (RCAE must exceed)";
    detail = ss.str();
    return r > a;
}

bool criterion_2(std::string& detail) {
    ExperimentConfig c = digits_base(work("c2_rpca"));
    c.method = Method::rpca_convex;
    ReportBundle b = run_experiment(c);
    const double auroc_mean = b.aggregate_mean("auroc");
    std::ostringstream ss;
    ss << "convex RPCA auroc=" << auroc_mean << " (need >= 0.96)";
    detail = ss.str();
    return auroc_mean >= 0.96;
}

bool criterion_3(std::string& detail) {
    Rng rng(7);
    Matrix u = random_matrix(100, 5, rng), v = random_matrix(5, 100, rng);
    Matrix signal = scale(matmul(u, v), 1.0 / std::sqrt(5.0));
    Matrix x = signal;
    std::vector<std::size_t> cells(10000);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
    rng.shuffle(cells);
    for (std::size_t t = 0; t < 500; ++t)  // 5% spikes of +/-10
        x.data()[cells[t]] += rng.uniform() < 0.5 ? -10.0 : 10.0;

    DecompositionResult r = fit_rpca_convex(x, 1.0 / std::sqrt(100.0), 1e-7, 300);
    const double rel = frobenius_norm(sub(r.s, signal)) / frobenius_norm(signal);
    std::ostringstream ss;
    ss << "planted recovery rel error=" << rel << " (need < 1e-3), converged="
       << (r.converged ? "yes" : "no") << " in " << r.iterations << " iterations";
    detail = ss.str();
    return r.converged && rel < 1e-3;
}

bool criterion_4(std::string& detail) {
    Rng rng(11);
    std::size_t instances = 0;
    double worst = 0.0;
    for (int round = 0; round < 4; ++round) {
        {
            Network net = build_network({LayerSpec::dense(5, 3),
                                         LayerSpec::activation(Activation::sigmoid),
                                         LayerSpec::dense(3, 5)},
                                        Shape{5, 1, 1}, rng);
            Matrix x = random_matrix(4, 5, rng), t = random_matrix(4, 5, rng);
            worst = std::max(worst, gradcheck::max_relative_error(net, x, t));
            ++instances;
        }
        {
            Network net = build_network({LayerSpec::conv(2, 3, 3),
                                         LayerSpec::activation(Activation::relu),
                                         LayerSpec::conv(3, 2, 3)},
                                        Shape{2, 5, 5}, rng);
            Matrix x = random_matrix(3, 50, rng), t = random_matrix(3, 50, rng);
            worst = std::max(worst, gradcheck::max_relative_error(net, x, t));
            ++instances;
        }
        {
            Network net = build_network({LayerSpec::conv(1, 4, 3), LayerSpec::batchnorm(),
                                         LayerSpec::activation(Activation::elu),
                                         LayerSpec::conv(4, 1, 3)},
                                        Shape{1, 6, 6}, rng);
            Matrix x = random_matrix(3, 36, rng), t = random_matrix(3, 36, rng);
            worst = std::max(worst, gradcheck::max_relative_error(net, x, t));
            ++instances;
        }
        {
            Network net = build_network(
                {LayerSpec::conv(1, 3, 3), LayerSpec::activation(Activation::relu),
                 LayerSpec::maxpool(2), LayerSpec::upsample(2), LayerSpec::conv(3, 1, 3)},
                Shape{1, 6, 6}, rng);
            Matrix x = random_matrix(2, 36, rng), t = random_matrix(2, 36, rng);
            worst = std::max(worst, gradcheck::max_relative_error(net, x, t));
            ++instances;
        }
        {
            Network net = build_network({LayerSpec::dense(6, 4), LayerSpec::batchnorm(),
                                         LayerSpec::activation(Activation::elu),
                                         LayerSpec::dense(4, 6),
                                         LayerSpec::activation(Activation::sigmoid)},
                                        Shape{6, 1, 1}, rng);
            Matrix x = random_matrix(5, 6, rng), t = random_matrix(5, 6, rng);
            worst = std::max(worst, gradcheck::max_relative_error(net, x, t));
            ++instances;
        }
    }
    std::ostringstream ss;
    ss << instances << " instances over all layer kinds, worst relative error=" << worst
       << " (need < 1e-6)";
    detail = ss.str();
    return instances >= 20 && worst < 1e-6;
}

bool criterion_5(std::string& detail) {
    Rng rng(13);
    double worst_oracle_gap = 0.0;
    std::size_t perturbation_losses = 0;
    for (int rep = 0; rep < 50; ++rep) {
        Matrix x = random_matrix(6, 6, rng, -2.0, 2.0);
        Matrix x_hat = random_matrix(6, 6, rng, -2.0, 2.0);
        const double lambda = rng.uniform(0.1, 2.0);
        Matrix residual = sub(x, x_hat);
        Matrix n = n_step(x, x_hat, lambda);

        auto objective_over_n = [&](const Matrix& cand) {
            const double d = frobenius_norm(sub(residual, cand));
            return d * d + lambda * elementwise_l1(cand);
        };
        const double base = objective_over_n(n);
        for (int pert = 0; pert < 1000; ++pert) {
            Matrix cand = n;
            cand.data()[rng.below(cand.size())] += rng.uniform(-1.0, 1.0);
            if (objective_over_n(cand) < base - 1e-12) ++perturbation_losses;
        }
        for (std::size_t e = 0; e < n.size(); ++e) {
            const double want = oracles::prox_grid_search(residual.data()[e], lambda / 2.0);
            worst_oracle_gap = std::max(worst_oracle_gap, std::fabs(n.data()[e] - want));
        }
    }
    std::ostringstream ss;
    ss << "50 matrices x 1000 perturbations: " << perturbation_losses
       << " losses (need 0); worst grid-oracle gap=" << worst_oracle_gap << " (need <= 1e-4)";
    detail = ss.str();
    return perturbation_losses == 0 && worst_oracle_gap <= 1e-4 + 1e-12;
}

bool criterion_6(std::string& detail) {
    Rng rng(1);
    LabeledDataset d = make_synthetic_manifold(50, 5, 20, rng);
    RobustConfig rc;
    rc.lambda = 0.3;
    rc.mu = 0.01;
    rc.learning_rate = 0.02;
    rc.epochs_per_theta_step = 30;
    rc.max_alternations = 10;
    rc.batch_size = 16;
    rc.seed = 1;
    rc.objective_tol = 1e-5;
    RobustModel m = train_rcae(d.x, dense_autoencoder_specs(20, 8), Shape{20, 1, 1}, rc);

    bool monotone = true;
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
        if (m.objective_trace[i] > m.objective_trace[i - 1]) monotone = false;
    const double ratio = m.objective_trace.back() / m.initial_objective;
    std::ostringstream ss;
    ss << (monotone ? "trace non-increasing" : "TRACE INCREASED") << " over "
       << m.objective_trace.size() << " alternations; final/initial=" << ratio
       << " (need < 0.5)";
    detail = ss.str();
    return monotone && ratio < 0.5;
}

bool criterion_7(std::string& detail) {
    Rng rng(17);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 10 + rng.below(90);
        RankedEval e;
        const bool with_ties = rep % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = rng.uniform();
            if (with_ties && rng.uniform() < 0.35) s = std::floor(s * 4.0) / 4.0;
            e.scores.push_back(s);
            e.labels.push_back(rng.uniform() < 0.25 ? 1 : 0);
        }
        e.labels[0] = 1;
        e.labels[n - 1] = 0;
        const std::size_t k = 1 + rng.below(n);
        worst = std::max(worst,
                         std::fabs(auroc(e) - oracles::auroc_pair_count(e.scores, e.labels)));
        worst = std::max(worst,
                         std::fabs(auprc(e) - oracles::auprc_staircase(e.scores, e.labels)));
        worst = std::max(worst, std::fabs(precision_at_k(e, k) -
                                          oracles::p_at_k_sorted(e.scores, e.labels, k)));
    }
    std::ostringstream ss;
    ss << "200 instances with ties, worst oracle gap=" << worst << " (need <= 1e-12)";
    detail = ss.str();
    return worst <= 1e-12;
}

bool criterion_8(std::string& detail) {
    ExperimentConfig rcae = manifold_base(work("c8_rcae"));
    rcae.method = Method::rcae;
    ExperimentConfig cae = manifold_base(work("c8_cae"));
    cae.method = Method::cae;
    ExperimentConfig pca = manifold_base(work("c8_pca"));
    pca.method = Method::pca;
    pca.k = 5;

    const double r = run_experiment(rcae).aggregate_mean("auroc");
    const double c = run_experiment(cae).aggregate_mean("auroc");
    const double p = run_experiment(pca).aggregate_mean("auroc");
    std::ostringstream ss;
    ss << "RCAE=" << r << " CAE=" << c << " PCA=" << p << " (RCAE must be >= both)";
    detail = ss.str();
    return r >= c && r >= p;
}

bool criterion_9(std::string& detail) {
    ExperimentConfig c = manifold_base(work("c9_rcae"));
    c.mode = Mode::inductive;
    c.method = Method::rcae;
    c.n_normal = 550;
    c.n_anomaly = 5;
    c.test_normal = 50;
    c.test_anomaly = 5;
    c.epochs = 20;
    c.alternations = 6;
    ReportBundle b = run_experiment(c);
    const double mean = b.aggregate_mean("auroc");
    const double se = b.aggregate_stderr("auroc");

    const std::string cmd = std::string(RADM_CLI_PATH) +
                            " inductive --method rpca-convex --synthetic manifold --out_dir " +
                            work("c9_reject") + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

    std::ostringstream ss;
    ss << "inductive RCAE auroc=" << mean << " stderr=" << se << " (need > "
       << 0.5 + 3.0 * se << "); rpca-convex rejection exit=" << exit_code << " (need 2)";
    detail = ss.str();
    return mean > 0.5 + 3.0 * se && exit_code == 2;
}

bool criterion_10(std::string& detail) {
    ExperimentConfig rcae = manifold_base(work("c10_rcae"));
    rcae.mode = Mode::denoise;
    rcae.method = Method::rcae;
    rcae.n_normal = 60;
    rcae.n_anomaly = 0;
    rcae.noise_rate = 0.10;
    rcae.alternations = 8;
    ExperimentConfig cae = rcae;
    cae.method = Method::cae;
    cae.out_dir = work("c10_cae");

    ReportBundle rb = run_experiment(rcae);
    ReportBundle cb = run_experiment(cae);

    auto metric_of = [](const SeedResult& s, const std::string& name) {
        for (const auto& [k, v] : s.metrics)
            if (k == name) return v;
        return -1.0;
    };
    std::size_t beat_noisy = 0, beat_cae = 0;
    for (std::size_t i = 0; i < rb.seeds.size(); ++i) {
        const double model = metric_of(rb.seeds[i], "mse_model");
        if (model < metric_of(rb.seeds[i], "mse_noisy")) ++beat_noisy;
        if (model <= metric_of(cb.seeds[i], "mse_model")) ++beat_cae;
    }
    std::ostringstream ss;
    ss << "RCAE mse=" << rb.aggregate_mean("mse_model") << " vs noisy "
       << rb.aggregate_mean("mse_noisy") << " (beat on " << beat_noisy << "/5); vs CAE "
       << cb.aggregate_mean("mse_model") << " (<= on " << beat_cae << "/5, need >= 4)";
    detail = ss.str();
    return beat_noisy == rb.seeds.size() && beat_cae >= 4;
}

bool criterion_11(std::string& detail) {
    ExperimentConfig a = manifold_base(work("c11_a"));
    a.seeds = {1, 2};
    a.method = Method::rcae;
    ExperimentConfig b = a;
    b.out_dir = work("c11_b");
    run_experiment(a);
    run_experiment(b);

    std::size_t compared = 0, mismatched = 0;
    for (const std::string name : {"report.csv", "scores_seed1.csv", "scores_seed2.csv",
                                   "top_indices.csv", "trace_seed1.csv", "trace_seed2.csv"}) {
        ++compared;
        if (read_file(work("c11_a/" + name)) != read_file(work("c11_b/" + name))) ++mismatched;
    }

    // binary outputs: PGM dumps from a digits run
    ExperimentConfig pa = digits_base(work("c11_pa"));
    pa.method = Method::pca;
    pa.k = 16;
    pa.seeds = {3};
    pa.top_k = 4;
    pa.dump_pgm = true;
    ExperimentConfig pb = pa;
    pb.out_dir = work("c11_pb");
    ReportBundle bundle_a = run_experiment(pa);
    run_experiment(pb);
    for (const auto& file : bundle_a.written_files) {
        const fs::path p(file);
        if (p.extension() != ".pgm") continue;
        ++compared;
        if (read_file(file) != read_file(work("c11_pb/" + p.filename().string()))) ++mismatched;
    }

    std::ostringstream ss;
    ss << compared << " report files compared byte-for-byte, " << mismatched << " mismatched";
    detail = ss.str();
    return compared >= 7 && mismatched == 0;
}

struct CriterionSpec {
    int id;
    const char* name;
    double budget_seconds;  // 0 = no budget
    std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
    g_workdir = fs::temp_directory_path() / "radm_acceptance";
    fs::remove_all(g_workdir);
    fs::create_directories(g_workdir);

    const std::vector<CriterionSpec> criteria = {
        {1, "usps-style detection, RCAE vs plain AE", 600.0, criterion_1},
        {2, "convex RPCA on the usps-style task", 120.0, criterion_2},
        {3, "convex RPCA planted recovery", 30.0, criterion_3},
        {4, "gradient correctness for every layer kind", 0.0, criterion_4},
        {5, "noise-step optimality", 0.0, criterion_5},
        {6, "objective monotonicity over a full run", 0.0, criterion_6},
        {7, "ranking metrics against brute-force oracles", 0.0, criterion_7},
        {8, "robustness separation on the planted manifold", 0.0, criterion_8},
        {9, "inductive scoring and transductive rejection", 0.0, criterion_9},
        {10, "salt-and-pepper denoising", 0.0, criterion_10},
        {11, "bit-level determinism of experiment reruns", 0.0, criterion_11},
    };

    int failures = 0;
    for (const CriterionSpec& spec : criteria) {
        const auto t0 = Clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = spec.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (spec.budget_seconds > 0.0 && seconds > spec.budget_seconds) {
            ok = false;
            detail += " [OVER BUDGET " + std::to_string(spec.budget_seconds) + "s]";
        }
        std::printf("%s criterion %2d (%s): %s [%.1fs]\n", ok ? "PASS" : "FAIL", spec.id,
                    spec.name, detail.c_str(), seconds);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures) std::printf("%d of %zu criteria FAILED\n", failures, criteria.size());
    else std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
