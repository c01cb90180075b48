#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radm/matrix.hpp"
#include "radm/rng.hpp"

namespace radm {

/// Data layout of one activation row: channel-major (c, y, x) flattened.
struct Shape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t flat() const { return channels * height * width; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

enum class LayerKind : std::uint8_t {
    dense = 0,
    conv2d = 1,
    batchnorm = 2,
    activation = 3,
    maxpool2d = 4,
    upsample2d = 5,
};

enum class Activation : std::uint8_t { linear = 0, sigmoid = 1, relu = 2, elu = 3 };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in_dim = 0, out_dim = 0;                   // dense
    std::size_t in_channels = 0, out_channels = 0;         // conv2d
    std::size_t filter_size = 0, stride = 1, padding = 0;  // conv2d
    Activation act = Activation::linear;                   // activation
    std::size_t window = 2;                                // maxpool2d / upsample2d

    static LayerSpec dense(std::size_t in_dim, std::size_t out_dim);
    /// Zero padding (f-1)/2 preserves spatial size at stride 1 ("same").
    static LayerSpec conv(std::size_t in_channels, std::size_t out_channels,
                          std::size_t filter_size, std::size_t stride = 1, bool same = true);
    static LayerSpec batchnorm();
    static LayerSpec activation(Activation act);
    static LayerSpec maxpool(std::size_t window);
    static LayerSpec upsample(std::size_t window);

    std::string describe() const;
};

/// A built layer: spec plus parameter blocks. Dense weights are in x out,
/// conv weights out_channels x (in_channels * f * f), biases 1 x out.
struct Layer {
    LayerSpec spec;
    Shape in_shape, out_shape;
    Matrix w, b;
    Matrix gamma, beta;
    Matrix running_mean, running_var;  // batchnorm inference statistics
};

struct Network {
    Shape input_shape, output_shape;
    std::vector<Layer> layers;
    std::uint64_t version = 0;  // bumped on every parameter update
};

/// Validates the shape chain and initializes parameters: weights uniform in
/// [-init_scale*s, init_scale*s] with s = 1/sqrt(fan_in) (or s = 1 when
/// fan_in_scaled is off, reproducing a raw [-1, 1] style init), biases zero,
/// batchnorm scale one / shift zero.
Network build_network(const std::vector<LayerSpec>& specs, Shape input, Rng& rng,
                      double init_scale = 1.0, bool fan_in_scaled = true);

enum class RunMode { train, infer };

struct LayerCache {
    Matrix input;
    Matrix xhat;                        // batchnorm normalized input
    std::vector<double> inv_std;        // batchnorm, per channel
    std::vector<std::uint32_t> argmax;  // maxpool winner index per (sample, out element)
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    std::size_t batch = 0;
    bool train_mode = false;
    const Network* net = nullptr;
    std::uint64_t net_version = 0;
};

/// Runs the network on a batch (one sample per row). Train mode caches
/// per-layer state for backward and updates batchnorm running statistics;
/// infer mode is a pure function of the parameters.
Matrix forward(Network& net, const Matrix& x, RunMode mode, ForwardCache* cache = nullptr);

/// Infer-mode forward without mutation or caching.
Matrix reconstruct(const Network& net, const Matrix& x);

struct LayerGrads {
    Matrix w, b, gamma, beta;
};

struct Gradients {
    std::vector<LayerGrads> layers;
};

/// Exact reverse-mode gradients for every parameter block. The cache must
/// come from a train-mode forward on this network with no parameter update
/// in between.
Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& grad_output);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<LayerGrads> m, v;  // moment accumulators, shapes mirror parameters
};

AdamState make_adam(const Network& net, double learning_rate);

/// Standard Adam update with bias correction; one step-counter increment per call.
void adam_step(AdamState& state, Network& net, const Gradients& grads);

struct LossResult {
    double loss = 0.0;
    Matrix grad;
};

/// Squared Frobenius reconstruction loss: ||x_hat - target||_F^2, gradient
/// 2 (x_hat - target).
LossResult mse_loss(const Matrix& x_hat, const Matrix& target);

/// Sum of squared dense/conv weight entries; biases and batchnorm
/// parameters are excluded.
double weight_squared_norm(const Network& net);

/// Binary model file, bitwise round-trip (layout in docs/formats.md).
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace radm
