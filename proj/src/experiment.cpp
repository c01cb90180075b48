#include "radm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "radm/baselines.hpp"
#include "radm/errors.hpp"
#include "radm/fsutil.hpp"
#include "radm/linalg.hpp"
#include "radm/robust.hpp"

namespace radm {

namespace fs = std::filesystem;

Method method_from_string(const std::string& name) {
    if (name == "pca") return Method::pca;
    if (name == "ae") return Method::ae;
    if (name == "cae") return Method::cae;
    if (name == "rcae") return Method::rcae;
    if (name == "rpca-convex") return Method::rpca_convex;
    if (name == "rpca-factored") return Method::rpca_factored;
    if (name == "drmf") return Method::drmf;
    throw config_error("unknown method '" + name +
                       "' (expected pca|ae|cae|rcae|rpca-convex|rpca-factored|drmf)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::pca: return "pca";
        case Method::ae: return "ae";
        case Method::cae: return "cae";
        case Method::rcae: return "rcae";
        case Method::rpca_convex: return "rpca-convex";
        case Method::rpca_factored: return "rpca-factored";
        case Method::drmf: return "drmf";
    }
    return "?";
}

Mode mode_from_string(const std::string& name) {
    if (name == "detect") return Mode::detect;
    if (name == "inductive") return Mode::inductive;
    if (name == "denoise") return Mode::denoise;
    throw config_error("unknown mode '" + name + "' (expected detect|inductive|denoise)");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::detect: return "detect";
        case Mode::inductive: return "inductive";
        case Mode::denoise: return "denoise";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

namespace {

double parse_double(const std::string& key, const std::string& value) {
    if (value == "inf" || value == "+inf" || value == "infinity") return kLambdaInfinity;
    double v = 0.0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw config_error("config key '" + key + "': malformed number '" + value + "'");
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw config_error("config key '" + key + "': malformed count '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw config_error("config key '" + key + "': expected 0|1, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ','); ) {
        if (item.empty()) continue;
        seeds.push_back(parse_count("seeds", item));
    }
    if (seeds.empty()) throw config_error("config key 'seeds': empty list");
    return seeds;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line); ) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(line_no) + ": expected key=value");
        entries.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return entries;
}

ExperimentConfig parse_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    ExperimentConfig c;
    std::uint64_t seed_base = 1;
    std::size_t seed_count = 5;
    bool explicit_seeds = false;
    for (const auto& [key, value] : entries) {
        if (key == "method") c.method = method_from_string(value);
        else if (key == "mode") c.mode = mode_from_string(value);
        else if (key == "manifest") c.manifest = value;
        else if (key == "synthetic") c.synthetic = value;
        else if (key == "n_normal") c.n_normal = parse_count(key, value);
        else if (key == "n_anomaly") c.n_anomaly = parse_count(key, value);
        else if (key == "dims") c.dims = parse_count(key, value);
        else if (key == "lambda") c.lambda = parse_double(key, value);
        else if (key == "rpca_lambda") c.rpca_lambda = parse_double(key, value);
        else if (key == "mu") c.mu = parse_double(key, value);
        else if (key == "k") c.k = parse_count(key, value);
        else if (key == "lr") c.learning_rate = parse_double(key, value);
        else if (key == "epochs") c.epochs = parse_count(key, value);
        else if (key == "batch") c.batch = parse_count(key, value);
        else if (key == "alternations") c.alternations = parse_count(key, value);
        else if (key == "objective_tol") c.objective_tol = parse_double(key, value);
        else if (key == "drmf_e") c.drmf_e = parse_count(key, value);
        else if (key == "arch") c.arch = value;
        else if (key == "unscaled_init") c.unscaled_init = parse_bool(key, value);
        else if (key == "seeds") { c.seeds = parse_seed_list(value); explicit_seeds = true; }
        else if (key == "seed_base") { seed_base = parse_count(key, value); explicit_seeds = false; }
        else if (key == "seed_count") { seed_count = parse_count(key, value); explicit_seeds = false; }
        else if (key == "out_dir") c.out_dir = value;
        else if (key == "test_normal") c.test_normal = parse_count(key, value);
        else if (key == "test_anomaly") c.test_anomaly = parse_count(key, value);
        else if (key == "noise_rate") c.noise_rate = parse_double(key, value);
        else if (key == "top_k") c.top_k = parse_count(key, value);
        else if (key == "dump_pgm") c.dump_pgm = parse_bool(key, value);
        else throw config_error("unknown config key '" + key + "'");
    }
    if (!explicit_seeds) {
        c.seeds.clear();
        for (std::size_t i = 0; i < seed_count; ++i) c.seeds.push_back(seed_base + i);
    }
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (manifest.empty() == synthetic.empty())
        throw config_error("exactly one of manifest= or synthetic= must be set");
    if (!synthetic.empty() && synthetic != "manifold" && synthetic != "digits")
        throw config_error("synthetic must be manifold|digits, got '" + synthetic + "'");
    if (arch != "auto" && arch != "dense" && arch != "conv" && arch != "convbn")
        throw config_error("arch must be auto|dense|conv|convbn, got '" + arch + "'");
    if (mode == Mode::inductive &&
        (method == Method::rpca_convex || method == Method::rpca_factored ||
         method == Method::drmf))
        throw config_error(method_name(method) +
                           " is inapplicable in inductive mode: the decomposition is bound to "
                           "the training rows and cannot score unseen data");
    if (lambda < 0.0 || std::isnan(lambda)) throw config_error("lambda must be >= 0");
    if (rpca_lambda < 0.0 || !std::isfinite(rpca_lambda))
        throw config_error("rpca_lambda must be >= 0 and finite");
    if (mu < 0.0 || !std::isfinite(mu)) throw config_error("mu must be >= 0");
    if (k == 0) throw config_error("k must be >= 1");
    if (epochs == 0 || batch == 0 || alternations == 0)
        throw config_error("epochs, batch and alternations must be >= 1");
    if (objective_tol <= 0.0) throw config_error("objective_tol must be > 0");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw config_error("lr must be >= 0");
    if (noise_rate < 0.0 || noise_rate > 1.0) throw config_error("noise_rate must be in [0,1]");
    if (seeds.empty()) throw config_error("at least one seed is required");
    if (out_dir.empty()) throw config_error("out_dir must be set");
    if (top_k == 0) throw config_error("top_k must be >= 1");
    if (!synthetic.empty() && synthetic == "manifold" && dims < 3)
        throw config_error("manifold dims must be >= 3");
}

// ---------------------------------------------------------------------------
// Architectures
// ---------------------------------------------------------------------------

std::vector<LayerSpec> dense_autoencoder_specs(std::size_t dim, std::size_t hidden) {
    return {LayerSpec::dense(dim, hidden), LayerSpec::activation(Activation::sigmoid),
            LayerSpec::dense(hidden, dim), LayerSpec::activation(Activation::sigmoid)};
}

std::vector<LayerSpec> conv_autoencoder_specs(const Shape& input, std::size_t filters) {
    const std::size_t c = input.channels;
    return {
        LayerSpec::conv(c, filters, 3), LayerSpec::activation(Activation::relu),
        LayerSpec::maxpool(2),
        LayerSpec::conv(filters, filters, 3), LayerSpec::activation(Activation::relu),
        LayerSpec::maxpool(2),
        LayerSpec::upsample(2),
        LayerSpec::conv(filters, filters, 3), LayerSpec::activation(Activation::relu),
        LayerSpec::upsample(2),
        LayerSpec::conv(filters, c, 3),
    };
}

std::vector<LayerSpec> conv_bn_autoencoder_specs(const Shape& input, std::size_t filters) {
    const std::size_t c = input.channels;
    return {
        LayerSpec::conv(c, filters, 3), LayerSpec::batchnorm(),
        LayerSpec::activation(Activation::elu), LayerSpec::maxpool(2),
        LayerSpec::conv(filters, filters, 3), LayerSpec::batchnorm(),
        LayerSpec::activation(Activation::elu), LayerSpec::maxpool(2),
        LayerSpec::upsample(2),
        LayerSpec::conv(filters, filters, 3), LayerSpec::batchnorm(),
        LayerSpec::activation(Activation::elu),
        LayerSpec::upsample(2),
        LayerSpec::conv(filters, c, 3),
    };
}

// ---------------------------------------------------------------------------
// Per-seed execution
// ---------------------------------------------------------------------------

namespace {

struct FitOutcome {
    std::vector<double> scores;
    std::vector<int> labels;
    Matrix reconstruction;             // denoise mode
    bool has_model = false;
    RobustModel model;                 // ae/cae/rcae
    double noise_nnz = 0.0;
};

LabeledDataset make_synthetic_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    if (cfg.synthetic == "digits") return make_synthetic_digits(cfg.n_normal, cfg.n_anomaly, rng);
    return make_synthetic_manifold(cfg.n_normal, cfg.n_anomaly, cfg.dims, rng);
}

std::string resolve_arch(const ExperimentConfig& cfg, const LabeledDataset& data) {
    if (cfg.arch != "auto") return cfg.arch;
    if (data.image_shape && data.image_shape->height % 4 == 0 &&
        data.image_shape->width % 4 == 0)
        return "conv";
    return "dense";
}

std::vector<LayerSpec> specs_for(const ExperimentConfig& cfg, const std::string& arch,
                                 const LabeledDataset& data, Shape& input_shape) {
    if (arch == "conv" || arch == "convbn") {
        if (!data.image_shape)
            throw config_error("arch=" + arch + " requires a dataset with an image_shape");
        input_shape = *data.image_shape;
        return arch == "conv" ? conv_autoencoder_specs(input_shape, 32)
                              : conv_bn_autoencoder_specs(input_shape, 16);
    }
    input_shape = Shape{data.x.cols(), 1, 1};
    return dense_autoencoder_specs(data.x.cols(), cfg.k);
}

RobustConfig robust_config_for(const ExperimentConfig& cfg, std::uint64_t seed, double lambda) {
    RobustConfig rc;
    rc.lambda = lambda;
    rc.mu = cfg.mu;
    rc.epochs_per_theta_step = cfg.epochs;
    rc.max_alternations = cfg.alternations;
    rc.objective_tol = cfg.objective_tol;
    rc.batch_size = cfg.batch;
    rc.learning_rate = cfg.learning_rate;
    rc.seed = seed;
    rc.unscaled_init = cfg.unscaled_init;
    return rc;
}

RobustModel train_network_method(const ExperimentConfig& cfg, const LabeledDataset& train,
                                 std::uint64_t seed) {
    const bool robust = cfg.method == Method::rcae;
    const std::string arch = cfg.method == Method::ae ? "dense" : resolve_arch(cfg, train);
    Shape input_shape;
    std::vector<LayerSpec> specs = specs_for(cfg, arch, train, input_shape);
    RobustConfig rc = robust_config_for(cfg, seed, robust ? cfg.lambda : kLambdaInfinity);
    return train_rcae(train.x, specs, input_shape, rc);
}

/// Transductive fit plus scores over the given rows.
FitOutcome fit_detect(const ExperimentConfig& cfg, const LabeledDataset& data,
                      std::uint64_t seed) {
    FitOutcome out;
    out.labels = data.labels;
    switch (cfg.method) {
        case Method::pca: {
            out.scores = fit_pca_svd(data.x, std::min(cfg.k, data.x.cols())).scores;
            break;
        }
        case Method::rpca_convex: {
            const double lam =
                cfg.rpca_lambda > 0.0 ? cfg.rpca_lambda : default_rpca_lambda(data.x);
            out.scores = fit_rpca_convex(data.x, lam).scores;
            break;
        }
        case Method::rpca_factored: {
            const std::size_t k = std::min(cfg.k, std::min(data.x.rows(), data.x.cols()));
            out.scores = fit_rpca_factored(data.x, k, cfg.lambda, cfg.mu).scores;
            break;
        }
        case Method::drmf: {
            const std::size_t k = std::min(cfg.k, std::min(data.x.rows(), data.x.cols()));
            const std::size_t e =
                cfg.drmf_e > 0 ? cfg.drmf_e : std::max<std::size_t>(1, data.x.size() / 100);
            out.scores = fit_drmf(data.x, k, e).scores;
            break;
        }
        case Method::ae:
        case Method::cae:
        case Method::rcae: {
            out.model = train_network_method(cfg, data, seed);
            out.has_model = true;
            out.scores = score(out.model, data.x);
            out.noise_nnz = double(nonzero_count(out.model.noise));
            break;
        }
    }
    return out;
}

FitOutcome fit_inductive(const ExperimentConfig& cfg, const LabeledDataset& train,
                         const LabeledDataset& test, std::uint64_t seed) {
    FitOutcome out;
    out.labels = test.labels;
    if (cfg.method == Method::pca) {
        PcaModel model = fit_pca(train.x, std::min(cfg.k, train.x.cols()));
        out.scores = pca_scores(model, test.x);
        return out;
    }
    out.model = train_network_method(cfg, train, seed);
    out.has_model = true;
    out.scores = score(out.model, test.x);
    out.noise_nnz = double(nonzero_count(out.model.noise));
    return out;
}

/// Reconstruction of noisy rows for the denoising protocol.
FitOutcome fit_denoise(const ExperimentConfig& cfg, const LabeledDataset& noisy,
                       std::uint64_t seed) {
    FitOutcome out;
    out.labels.assign(noisy.x.rows(), 0);
    switch (cfg.method) {
        case Method::pca: {
            PcaModel model = fit_pca(noisy.x, std::min(cfg.k, noisy.x.cols()));
            out.reconstruction = pca_reconstruct(model, noisy.x);
            break;
        }
        case Method::rpca_convex: {
            const double lam =
                cfg.rpca_lambda > 0.0 ? cfg.rpca_lambda : default_rpca_lambda(noisy.x);
            out.reconstruction = fit_rpca_convex(noisy.x, lam).s;
            break;
        }
        case Method::rpca_factored: {
            const std::size_t k = std::min(cfg.k, std::min(noisy.x.rows(), noisy.x.cols()));
            out.reconstruction = fit_rpca_factored(noisy.x, k, cfg.lambda, cfg.mu).s;
            break;
        }
        case Method::drmf: {
            const std::size_t k = std::min(cfg.k, std::min(noisy.x.rows(), noisy.x.cols()));
            const std::size_t e =
                cfg.drmf_e > 0 ? cfg.drmf_e : std::max<std::size_t>(1, noisy.x.size() / 100);
            out.reconstruction = fit_drmf(noisy.x, k, e).s;
            break;
        }
        case Method::ae:
        case Method::cae:
        case Method::rcae: {
            out.model = train_network_method(cfg, noisy, seed);
            out.has_model = true;
            out.reconstruction = reconstruct(out.model.network, noisy.x);
            out.noise_nnz = double(nonzero_count(out.model.noise));
            break;
        }
    }
    for (std::size_t i = 0; i < noisy.x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < noisy.x.cols(); ++j) {
            const double d = noisy.x(i, j) - out.reconstruction(i, j);
            s += d * d;
        }
        out.scores.push_back(s);
    }
    return out;
}

double masked_mse(const Matrix& a, const Matrix& b, const Matrix& mask) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (mask.data()[i] == 0.0) continue;
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
        ++count;
    }
    return count == 0 ? 0.0 : acc / double(count);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_scores_csv(const std::string& path, const std::vector<double>& scores,
                      const std::vector<int>& labels) {
    std::ostringstream out;
    out << "index,score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
        out << i << ',' << format_double(scores[i]) << ',' << labels[i] << '\n';
    write_text_atomic(path, out.str());
}

void write_pgm(const std::string& path, std::span<const double> row, const Shape& shape) {
    std::ostringstream out;
    out << "P5\n" << shape.width << " " << shape.height << "\n255\n";
    for (std::size_t p = 0; p < shape.height * shape.width; ++p) {
        const double v = std::clamp(row[p], 0.0, 1.0);
        out.put(char(std::lround(v * 255.0)));
    }
    write_text_atomic(path, out.str());
}

}  // namespace

double ReportBundle::aggregate_mean(const std::string& metric) const {
    for (const auto& [name, agg] : aggregates)
        if (name == metric) return agg.mean;
    throw std::invalid_argument("ReportBundle: no aggregate named '" + metric + "'");
}

double ReportBundle::aggregate_stderr(const std::string& metric) const {
    for (const auto& [name, agg] : aggregates)
        if (name == metric) return agg.stderr_of_mean;
    throw std::invalid_argument("ReportBundle: no aggregate named '" + metric + "'");
}

ReportBundle run_experiment(const ExperimentConfig& config) {
    config.validate();
    // fixed datasets load once, before any computation; path problems
    // surface as data errors rather than per-seed failures
    std::optional<LabeledDataset> fixed_data;
    if (!config.manifest.empty()) fixed_data = load_manifest(config.manifest);
    fs::create_directories(config.out_dir);
    ReportBundle bundle;

    for (const std::uint64_t seed : config.seeds) {
        SeedResult result;
        result.seed = seed;
        try {
            LabeledDataset data =
                fixed_data ? *fixed_data : make_synthetic_dataset(config, seed);
            auto [normalized, scaling] = normalize01(data.x);
            data.x = std::move(normalized);

            FitOutcome outcome;
            if (config.mode == Mode::detect) {
                outcome = fit_detect(config, data, seed);
                RankedEval eval{outcome.scores, outcome.labels};
                result.metrics = {
                    {"auprc", auprc(eval)},
                    {"auroc", auroc(eval)},
                    {"p_at_k",
                     precision_at_k(eval, std::min(config.top_k, outcome.scores.size()))}};
            } else if (config.mode == Mode::inductive) {
                Rng split_rng(seed ^ 0x5BD1E995ull);
                auto [train, test] =
                    split_inductive(data, config.test_normal, config.test_anomaly, split_rng);
                outcome = fit_inductive(config, train, test, seed);
                RankedEval eval{outcome.scores, outcome.labels};
                result.metrics = {
                    {"auprc", auprc(eval)},
                    {"auroc", auroc(eval)},
                    {"p_at_k",
                     precision_at_k(eval, std::min(config.top_k, outcome.scores.size()))}};
            } else {
                // denoise: train on corrupted normals, compare masked entries
                std::vector<std::size_t> normal_rows;
                for (std::size_t i = 0; i < data.labels.size(); ++i)
                    if (data.labels[i] == 0) normal_rows.push_back(i);
                LabeledDataset clean;
                clean.x = take_rows(data.x, normal_rows);
                clean.labels.assign(normal_rows.size(), 0);
                clean.image_shape = data.image_shape;
                clean.source = data.source;

                Rng noise_rng(seed ^ 0xC2B2AE35ull);
                auto [noisy_x, mask] = inject_salt_pepper(clean.x, config.noise_rate, noise_rng);
                LabeledDataset noisy = clean;
                noisy.x = std::move(noisy_x);

                outcome = fit_denoise(config, noisy, seed);
                result.metrics = {
                    {"mse_noisy", masked_mse(noisy.x, clean.x, mask)},
                    {"mse_model", masked_mse(outcome.reconstruction, clean.x, mask)}};
                data = std::move(noisy);
            }

            result.scores = outcome.scores;
            result.labels = outcome.labels;
            if (outcome.has_model)
                result.metrics.emplace_back("noise_nnz", outcome.noise_nnz);

            RankedEval ranking{result.scores, result.labels};
            const std::vector<std::size_t> order = ranked_order(ranking);
            for (std::size_t i = 0; i < std::min(config.top_k, order.size()); ++i)
                result.top_indices.push_back(order[i]);

            const std::string seed_tag = "seed" + std::to_string(seed);
            const std::string scores_path =
                (fs::path(config.out_dir) / ("scores_" + seed_tag + ".csv")).string();
            write_scores_csv(scores_path, result.scores, result.labels);
            bundle.written_files.push_back(scores_path);

            if (outcome.has_model) {
                const std::string trace_path =
                    (fs::path(config.out_dir) / ("trace_" + seed_tag + ".csv")).string();
                write_training_trace_csv(outcome.model, trace_path);
                bundle.written_files.push_back(trace_path);
            }
            if (config.dump_pgm && data.image_shape && data.image_shape->channels == 1) {
                for (std::size_t rank = 0; rank < result.top_indices.size(); ++rank) {
                    const std::size_t row = result.top_indices[rank];
                    const std::string pgm_path =
                        (fs::path(config.out_dir) /
                         ("top_" + seed_tag + "_rank" + std::to_string(rank + 1) + "_row" +
                          std::to_string(row) + ".pgm"))
                            .string();
                    write_pgm(pgm_path, data.x.row(row), *data.image_shape);
                    bundle.written_files.push_back(pgm_path);
                }
            }
        } catch (const std::exception& e) {
            result.failed = true;
            result.diagnostic = e.what();
        }
        bundle.seeds.push_back(std::move(result));
    }

    // aggregate over the seeds that survived
    std::vector<const SeedResult*> ok;
    for (const SeedResult& s : bundle.seeds)
        if (!s.failed) ok.push_back(&s);
    if (ok.empty()) {
        std::string detail;
        for (const SeedResult& s : bundle.seeds)
            detail += "\n  seed " + std::to_string(s.seed) + ": " + s.diagnostic;
        throw numeric_error("run_experiment: every seed failed:" + detail);
    }
    for (std::size_t mi = 0; mi < ok.front()->metrics.size(); ++mi) {
        const std::string& name = ok.front()->metrics[mi].first;
        std::vector<double> values;
        for (const SeedResult* s : ok) values.push_back(s->metrics[mi].second);
        Aggregate agg;
        if (values.size() == 1) {
            agg.mean = values[0];
            agg.stderr_of_mean = 0.0;
        } else {
            agg = aggregate_runs(values);
        }
        bundle.aggregates.emplace_back(name, agg);
    }

    std::ostringstream report;
    report << "method,mode,metric,mean,stderr\n";
    for (const auto& [name, agg] : bundle.aggregates)
        report << method_name(config.method) << ',' << mode_name(config.mode) << ',' << name
               << ',' << format_double(agg.mean) << ',' << format_double(agg.stderr_of_mean)
               << '\n';
    const std::string report_path = (fs::path(config.out_dir) / "report.csv").string();
    write_text_atomic(report_path, report.str());
    bundle.written_files.push_back(report_path);

    std::ostringstream top;
    top << "seed,rank,row_index,score,label\n";
    for (const SeedResult& s : bundle.seeds) {
        if (s.failed) continue;
        for (std::size_t rank = 0; rank < s.top_indices.size(); ++rank) {
            const std::size_t row = s.top_indices[rank];
            top << s.seed << ',' << rank + 1 << ',' << row << ','
                << format_double(s.scores[row]) << ',' << s.labels[row] << '\n';
        }
    }
    const std::string top_path = (fs::path(config.out_dir) / "top_indices.csv").string();
    write_text_atomic(top_path, top.str());
    bundle.written_files.push_back(top_path);

    return bundle;
}

SweepResult run_sweep(const ExperimentConfig& config, const std::string& parameter,
                      const std::vector<double>& grid) {
    if (parameter != "lambda" && parameter != "k")
        throw config_error("sweep parameter must be lambda|k, got '" + parameter + "'");
    if (grid.empty()) throw config_error("sweep grid must not be empty");
    config.validate();

    SweepResult sweep;
    sweep.parameter = parameter;
    for (double value : grid) {
        ExperimentConfig point = config;
        if (parameter == "lambda") {
            point.lambda = value;
        } else {
            if (value < 1.0) throw config_error("sweep over k needs values >= 1");
            point.k = std::size_t(value);
        }
        char tag[32];
        std::snprintf(tag, sizeof tag, "%g", value);
        point.out_dir = (fs::path(config.out_dir) / (parameter + "_" + tag)).string();
        ReportBundle bundle = run_experiment(point);

        SweepRow row;
        row.value = value;
        row.aggregates = bundle.aggregates;
        std::vector<double> nnz;
        for (const SeedResult& s : bundle.seeds)
            if (!s.failed)
                for (const auto& [name, v] : s.metrics)
                    if (name == "noise_nnz") nnz.push_back(v);
        if (!nnz.empty()) {
            double sum = 0.0;
            for (double v : nnz) sum += v;
            row.mean_noise_nnz = sum / double(nnz.size());
        }
        sweep.rows.push_back(std::move(row));
    }

    std::ostringstream out;
    out << parameter;
    for (const auto& [name, agg] : sweep.rows.front().aggregates)
        out << ',' << name << "_mean," << name << "_stderr";
    out << ",noise_nnz\n";
    for (const SweepRow& row : sweep.rows) {
        out << format_double(row.value);
        for (const auto& [name, agg] : row.aggregates)
            out << ',' << format_double(agg.mean) << ',' << format_double(agg.stderr_of_mean);
        out << ',' << format_double(row.mean_noise_nnz) << '\n';
    }
    fs::create_directories(config.out_dir);
    sweep.csv_path = (fs::path(config.out_dir) / "sweep.csv").string();
    write_text_atomic(sweep.csv_path, out.str());
    return sweep;
}

}  // namespace radm
