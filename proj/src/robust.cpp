#include "radm/robust.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "radm/errors.hpp"
#include "radm/fsutil.hpp"
#include "radm/linalg.hpp"

namespace radm {

void RobustConfig::validate() const {
    if (lambda < 0.0 || std::isnan(lambda))
        throw std::invalid_argument("RobustConfig: lambda must be >= 0");
    if (mu < 0.0 || !std::isfinite(mu)) throw std::invalid_argument("RobustConfig: mu must be >= 0");
    if (objective_tol <= 0.0) throw std::invalid_argument("RobustConfig: objective_tol must be > 0");
    if (batch_size == 0) throw std::invalid_argument("RobustConfig: batch_size must be >= 1");
    if (max_alternations == 0)
        throw std::invalid_argument("RobustConfig: max_alternations must be >= 1");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw std::invalid_argument("RobustConfig: learning_rate must be >= 0");
}

double objective_value_given(const Matrix& x, const Matrix& x_hat, const Matrix& noise,
                             double omega, double lambda, double mu) {
    if (!x.same_shape(x_hat) || !x.same_shape(noise))
        throw std::invalid_argument("objective_value shape mismatch: x " + x.shape_str() +
                                    ", x_hat " + x_hat.shape_str() + ", noise " +
                                    noise.shape_str());
    double data = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - x_hat.data()[i] - noise.data()[i];
        data += d * d;
    }
    const double l1 = elementwise_l1(noise);
    double penalty = 0.0;
    if (std::isinf(lambda)) {
        penalty = l1 == 0.0 ? 0.0 : kLambdaInfinity;
    } else {
        penalty = lambda * l1;
    }
    return data + 0.5 * mu * omega + penalty;
}

double objective_value(const Matrix& x, const Network& net, const Matrix& noise, double lambda,
                       double mu) {
    return objective_value_given(x, reconstruct(net, x), noise, weight_squared_norm(net), lambda,
                                 mu);
}

Matrix n_step(const Matrix& x, const Matrix& x_hat, double lambda) {
    if (!x.same_shape(x_hat))
        throw std::invalid_argument("n_step shape mismatch: " + x.shape_str() + " vs " +
                                    x_hat.shape_str());
    if (lambda < 0.0 || std::isnan(lambda))
        throw std::invalid_argument("n_step: lambda must be >= 0");
    return soft_threshold(sub(x, x_hat), lambda / 2.0);
}

namespace {

struct ThetaSnapshot {
    std::vector<Layer> layers;
    AdamState adam;
};

double theta_objective(const Network& net, const Matrix& target, double mu) {
    const Matrix x_hat = reconstruct(net, target);
    double data = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target.data()[i] - x_hat.data()[i];
        data += d * d;
    }
    return data + 0.5 * mu * weight_squared_norm(net);
}

}  // namespace

void theta_step(Network& net, const Matrix& x_minus_n, const RobustConfig& config,
                AdamState& adam, Rng& rng) {
    config.validate();
    if (x_minus_n.cols() != net.input_shape.flat())
        throw std::invalid_argument("theta_step: data has " + std::to_string(x_minus_n.cols()) +
                                    " columns, network expects " +
                                    std::to_string(net.input_shape.flat()));
    const std::size_t total_rows = x_minus_n.rows();
    const double mu = config.mu;

    double best = theta_objective(net, x_minus_n, mu);
    ThetaSnapshot best_state{net.layers, adam};

    std::vector<std::size_t> order(total_rows);
    for (std::size_t i = 0; i < total_rows; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs_per_theta_step; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0, batch_idx = 0; start < total_rows;
             start += config.batch_size, ++batch_idx) {
            const std::size_t count = std::min(config.batch_size, total_rows - start);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + start + count);
            Matrix target = take_rows(x_minus_n, batch);
            ForwardCache cache;
            Matrix out = forward(net, target, RunMode::train, &cache);
            LossResult loss = mse_loss(out, target);
            if (!std::isfinite(loss.loss)) {
                throw numeric_error("theta_step: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_idx) + " (loss " +
                                    std::to_string(loss.loss) + ")");
            }
            Gradients grads = backward(net, cache, loss.grad);
            if (mu > 0.0) {
                // spread the full-epoch regulariser gradient over the batches
                const double frac = double(count) / double(total_rows);
                for (std::size_t li = 0; li < net.layers.size(); ++li) {
                    const Layer& layer = net.layers[li];
                    if (layer.spec.kind != LayerKind::dense &&
                        layer.spec.kind != LayerKind::conv2d)
                        continue;
                    Matrix& gw = grads.layers[li].w;
                    for (std::size_t i = 0; i < gw.size(); ++i)
                        gw.data()[i] += mu * frac * layer.w.data()[i];
                }
            }
            adam_step(adam, net, grads);
        }
        const double obj = theta_objective(net, x_minus_n, mu);
        if (obj < best) {
            best = obj;
            best_state.layers = net.layers;
            best_state.adam = adam;
        }
    }
    net.layers = std::move(best_state.layers);
    adam = std::move(best_state.adam);
    ++net.version;
}

RobustModel train_rcae(const Matrix& x, const std::vector<LayerSpec>& specs, Shape input_shape,
                       const RobustConfig& config) {
    config.validate();
    if (x.rows() == 0) throw std::invalid_argument("train_rcae: empty training matrix");

    Rng rng(config.seed);
    RobustModel model;
    model.network = build_network(specs, input_shape, rng, 1.0, !config.unscaled_init);
    if (model.network.output_shape != model.network.input_shape)
        throw std::invalid_argument("train_rcae: layer stack is not a reconstruction map (" +
                                    model.network.input_shape.str() + " -> " +
                                    model.network.output_shape.str() + ")");
    model.noise = Matrix(x.rows(), x.cols());
    model.initial_objective = objective_value(x, model.network, model.noise, config.lambda,
                                              config.mu);

    AdamState adam = make_adam(model.network, config.learning_rate);
    double best_seen = model.initial_objective;
    for (std::size_t alt = 0; alt < config.max_alternations; ++alt) {
        Matrix x_minus_n = sub(x, model.noise);
        theta_step(model.network, x_minus_n, config, adam, rng);

        Matrix x_hat = reconstruct(model.network, x);
        model.noise = n_step(x, x_hat, config.lambda);

        AlternationStats st;
        const double omega = weight_squared_norm(model.network);
        st.objective = objective_value_given(x, x_hat, model.noise, omega, config.lambda,
                                             config.mu);
        st.omega_term = 0.5 * config.mu * omega;
        st.l1_term = std::isinf(config.lambda) ? 0.0 : config.lambda * elementwise_l1(model.noise);
        st.data_term = st.objective - st.omega_term - st.l1_term;
        st.noise_nnz = nonzero_count(model.noise);
        model.stats.push_back(st);
        model.objective_trace.push_back(st.objective);

        best_seen = std::min(best_seen, st.objective);
        if (st.objective > 10.0 * best_seen && st.objective > 1e-9) {
            std::ostringstream trace;
            for (double v : model.objective_trace) trace << " " << v;
            throw numeric_error("train_rcae: objective diverged (" + std::to_string(st.objective) +
                                " vs best " + std::to_string(best_seen) + "); trace:" +
                                trace.str());
        }
        if (model.objective_trace.size() >= 2) {
            const double prev = model.objective_trace[model.objective_trace.size() - 2];
            const double change = std::fabs(prev - st.objective) / std::max(std::fabs(prev), 1e-12);
            if (change < config.objective_tol) break;
        }
    }
    return model;
}

std::vector<double> score(const RobustModel& model, const Matrix& x_new) {
    if (x_new.cols() != model.network.input_shape.flat())
        throw std::invalid_argument("score: row width " + std::to_string(x_new.cols()) +
                                    " does not match training width " +
                                    std::to_string(model.network.input_shape.flat()));
    const Matrix x_hat = reconstruct(model.network, x_new);
    std::vector<double> scores(x_new.rows(), 0.0);
    for (std::size_t i = 0; i < x_new.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x_new.cols(); ++j) {
            const double d = x_new(i, j) - x_hat(i, j);
            s += d * d;
        }
        scores[i] = s;
    }
    return scores;
}

void write_training_trace_csv(const RobustModel& model, const std::string& path) {
    std::ostringstream out;
    out << "alternation,objective,data_term,l1_term,omega_term,noise_nnz\n";
    out.precision(17);
    for (std::size_t i = 0; i < model.stats.size(); ++i) {
        const AlternationStats& st = model.stats[i];
        out << i + 1 << "," << st.objective << "," << st.data_term << "," << st.l1_term << ","
            << st.omega_term << "," << st.noise_nnz << "\n";
    }
    write_text_atomic(path, out.str());
}

}  // namespace radm
