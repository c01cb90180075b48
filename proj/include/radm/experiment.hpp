#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radm/data.hpp"
#include "radm/metrics.hpp"

namespace radm {

enum class Method { pca, ae, cae, rcae, rpca_convex, rpca_factored, drmf };
enum class Mode { detect, inductive, denoise };

Method method_from_string(const std::string& name);
std::string method_name(Method m);
Mode mode_from_string(const std::string& name);
std::string mode_name(Mode m);

/// Fully validated run description. Built from a flat key=value config file
/// plus command-line overrides; unknown keys are rejected up front.
struct ExperimentConfig {
    Method method = Method::rcae;
    Mode mode = Mode::detect;

    std::string manifest;             // fixed dataset, or
    std::string synthetic;            // "manifold" | "digits", regenerated per seed
    std::size_t n_normal = 220;
    std::size_t n_anomaly = 11;
    std::size_t dims = 20;

    double lambda = 1.0;              // "inf" accepted in config text
    double rpca_lambda = 0.0;         // 0 means 1/sqrt(max(rows, cols))
    double mu = 0.05;
    std::size_t k = 64;               // PCA/RPCA rank, autoencoder hidden width
    double learning_rate = 2e-3;
    std::size_t epochs = 20;
    std::size_t batch = 32;
    std::size_t alternations = 10;
    double objective_tol = 1e-4;
    std::size_t drmf_e = 0;           // 0 means 1% of the entries
    std::string arch = "auto";        // auto | dense | conv | convbn
    bool unscaled_init = false;          // literal [-1, 1] weight initialization

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir;

    std::size_t test_normal = 50;     // inductive mode
    std::size_t test_anomaly = 5;
    double noise_rate = 0.1;          // denoise mode
    std::size_t top_k = 10;
    bool dump_pgm = false;

    void validate() const;
};

/// Parse key=value lines (config file order first, then overrides; later
/// wins). Throws config_error on unknown keys or malformed values.
ExperimentConfig parse_config(const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

struct SeedResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string diagnostic;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::size_t> top_indices;
    std::vector<double> scores;
    std::vector<int> labels;
};

struct ReportBundle {
    std::vector<SeedResult> seeds;
    std::vector<std::pair<std::string, Aggregate>> aggregates;
    std::vector<std::string> written_files;

    double aggregate_mean(const std::string& metric) const;
    double aggregate_stderr(const std::string& metric) const;
};

/// Per seed: build the task, fit the configured method, score, evaluate;
/// then write per-seed score CSVs, the aggregate report, ranked top-k
/// indices, and (for the trainer methods) the training trace. Individual
/// seed failures are recorded; the run throws only if every seed fails.
ReportBundle run_experiment(const ExperimentConfig& config);

struct SweepRow {
    double value = 0.0;
    std::vector<std::pair<std::string, Aggregate>> aggregates;
    double mean_noise_nnz = 0.0;
};

struct SweepResult {
    std::string parameter;
    std::vector<SweepRow> rows;
    std::string csv_path;
};

/// Grid over lambda or k; one metrics row per grid point, with the final
/// noise-matrix nonzero count recorded per point.
SweepResult run_sweep(const ExperimentConfig& config, const std::string& parameter,
                      const std::vector<double>& grid);

/// The usps-style stack: two (conv 3x3 stride 1, relu, 2x2 maxpool) encoder
/// stages with `filters` maps, mirrored by nearest-neighbour upsampling, and
/// a sigmoid output.
std::vector<LayerSpec> conv_autoencoder_specs(const Shape& input, std::size_t filters);

/// Conv-batchnorm-elu variant of the same stack.
std::vector<LayerSpec> conv_bn_autoencoder_specs(const Shape& input, std::size_t filters);

std::vector<LayerSpec> dense_autoencoder_specs(std::size_t dim, std::size_t hidden);

}  // namespace radm
