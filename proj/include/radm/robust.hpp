#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "radm/matrix.hpp"
#include "radm/network.hpp"
#include "radm/rng.hpp"

namespace radm {

/// Tuning knobs for the alternating robust-autoencoder fit. lambda may be
/// +infinity, which pins the noise matrix at zero and reduces the trainer to
/// a plain (convolutional) autoencoder.
struct RobustConfig {
    double lambda = 1.0;
    double mu = 0.05;
    std::size_t epochs_per_theta_step = 50;
    std::size_t max_alternations = 30;
    double objective_tol = 1e-4;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool unscaled_init = false;  // literal [-1, 1] weight init instead of fan-in scaled

    void validate() const;
};

struct AlternationStats {
    double objective = 0.0;
    double data_term = 0.0;
    double l1_term = 0.0;
    double omega_term = 0.0;
    std::size_t noise_nnz = 0;
};

struct RobustModel {
    Network network;
    Matrix noise;                         // N for the training matrix
    std::vector<double> objective_trace;  // objective after each N-step
    std::vector<AlternationStats> stats;
    double initial_objective = 0.0;
};

/// ||x - (xhat + n)||_F^2 + (mu/2) * Omega(theta) + lambda * ||n||_1 with
/// Omega the squared dense/conv weights (biases and batchnorm excluded).
/// An infinite lambda contributes zero when n is identically zero.
double objective_value(const Matrix& x, const Network& net, const Matrix& noise, double lambda,
                       double mu);

/// Same objective from a precomputed reconstruction.
double objective_value_given(const Matrix& x, const Matrix& x_hat, const Matrix& noise,
                             double omega, double lambda, double mu);

/// Closed-form noise update: soft_threshold(x - x_hat, lambda / 2). The
/// global minimizer of the objective over n at fixed parameters.
Matrix n_step(const Matrix& x, const Matrix& x_hat, double lambda);

/// Minibatch Adam epochs on ||(x - n) - xhat(theta)||_F^2 + (mu/2) Omega,
/// with a seeded shuffle each epoch. Returns the best end-of-epoch iterate
/// by that objective (the entry parameters count as a candidate), so the
/// step never increases it. Throws numeric_error with epoch/batch/loss on a
/// non-finite loss.
void theta_step(Network& net, const Matrix& x_minus_n, const RobustConfig& config,
                AdamState& adam, Rng& rng);

/// Alternates theta_step and n_step from n = 0 until the relative objective
/// change drops below objective_tol or max_alternations is hit. Throws
/// numeric_error with the trace if the objective grows past 10x its minimum.
RobustModel train_rcae(const Matrix& x, const std::vector<LayerSpec>& specs, Shape input_shape,
                       const RobustConfig& config);

/// Rowwise squared reconstruction error of unseen rows; n plays no part.
std::vector<double> score(const RobustModel& model, const Matrix& x_new);

/// Diagnostic CSV: alternation, objective, data term, l1 term, omega term,
/// noise nonzeros.
void write_training_trace_csv(const RobustModel& model, const std::string& path);

constexpr double kLambdaInfinity = std::numeric_limits<double>::infinity();

}  // namespace radm
