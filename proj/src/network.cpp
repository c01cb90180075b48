#include "radm/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "radm/binio.hpp"
#include "radm/errors.hpp"

namespace radm {

namespace {

constexpr double kBatchnormEps = 1e-5;
constexpr double kBatchnormMomentum = 0.9;
constexpr double kEluAlpha = 1.0;

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
    }
    return "?";
}

}  // namespace

std::string Shape::str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

LayerSpec LayerSpec::dense(std::size_t in_dim, std::size_t out_dim) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_dim = in_dim;
    s.out_dim = out_dim;
    return s;
}

LayerSpec LayerSpec::conv(std::size_t in_channels, std::size_t out_channels,
                          std::size_t filter_size, std::size_t stride, bool same) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.filter_size = filter_size;
    s.stride = stride;
    s.padding = same ? (filter_size - 1) / 2 : 0;
    return s;
}

LayerSpec LayerSpec::batchnorm() {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    return s;
}

LayerSpec LayerSpec::activation(Activation act) {
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.act = act;
    return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window) {
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.window = window;
    return s;
}

LayerSpec LayerSpec::upsample(std::size_t window) {
    LayerSpec s;
    s.kind = LayerKind::upsample2d;
    s.window = window;
    return s;
}

std::string LayerSpec::describe() const {
    switch (kind) {
        case LayerKind::dense:
            return "dense " + std::to_string(in_dim) + "->" + std::to_string(out_dim);
        case LayerKind::conv2d:
            return "conv2d " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                   " f" + std::to_string(filter_size) + " s" + std::to_string(stride) + " p" +
                   std::to_string(padding);
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::activation: return "activation " + activation_name(act);
        case LayerKind::maxpool2d: return "maxpool2d " + std::to_string(window);
        case LayerKind::upsample2d: return "upsample2d " + std::to_string(window);
    }
    return "?";
}

namespace {

Shape chain_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("layer " + std::to_string(index) + " (" + spec.describe() +
                                    "): " + why + " (incoming shape " + in.str() + ")");
    };
    switch (spec.kind) {
        case LayerKind::dense:
            if (spec.in_dim == 0 || spec.out_dim == 0) fail("zero dimension");
            if (in.flat() != spec.in_dim)
                fail("expects input dim " + std::to_string(spec.in_dim) + " but gets " +
                     std::to_string(in.flat()));
            return Shape{spec.out_dim, 1, 1};
        case LayerKind::conv2d: {
            if (spec.filter_size == 0 || spec.stride == 0) fail("zero filter size or stride");
            if (in.channels != spec.in_channels)
                fail("expects " + std::to_string(spec.in_channels) + " input channels");
            const std::size_t padded_h = in.height + 2 * spec.padding;
            const std::size_t padded_w = in.width + 2 * spec.padding;
            if (padded_h < spec.filter_size || padded_w < spec.filter_size)
                fail("filter larger than padded input");
            if ((padded_h - spec.filter_size) % spec.stride != 0 ||
                (padded_w - spec.filter_size) % spec.stride != 0)
                fail("stride does not divide the padded extent");
            return Shape{spec.out_channels, (padded_h - spec.filter_size) / spec.stride + 1,
                         (padded_w - spec.filter_size) / spec.stride + 1};
        }
        case LayerKind::batchnorm:
        case LayerKind::activation: return in;
        case LayerKind::maxpool2d:
            if (spec.window == 0) fail("zero window");
            if (in.height % spec.window != 0 || in.width % spec.window != 0)
                fail("window does not divide spatial size");
            return Shape{in.channels, in.height / spec.window, in.width / spec.window};
        case LayerKind::upsample2d:
            if (spec.window == 0) fail("zero window");
            return Shape{in.channels, in.height * spec.window, in.width * spec.window};
    }
    fail("unknown layer kind");
    return in;
}

void init_uniform(Matrix& m, Rng& rng, double bound) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

}  // namespace

Network build_network(const std::vector<LayerSpec>& specs, Shape input, Rng& rng,
                      double init_scale, bool fan_in_scaled) {
    if (specs.empty()) throw std::invalid_argument("build_network: no layers");
    if (init_scale <= 0.0) throw std::invalid_argument("build_network: init_scale must be > 0");
    Network net;
    net.input_shape = input;
    Shape current = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Layer layer;
        layer.spec = specs[i];
        layer.in_shape = current;
        layer.out_shape = chain_shape(specs[i], current, i);
        switch (specs[i].kind) {
            case LayerKind::dense: {
                const double s = fan_in_scaled ? 1.0 / std::sqrt(double(specs[i].in_dim)) : 1.0;
                layer.w = Matrix(specs[i].in_dim, specs[i].out_dim);
                init_uniform(layer.w, rng, init_scale * s);
                layer.b = Matrix(1, specs[i].out_dim);
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t fan_in =
                    specs[i].in_channels * specs[i].filter_size * specs[i].filter_size;
                const double s = fan_in_scaled ? 1.0 / std::sqrt(double(fan_in)) : 1.0;
                layer.w = Matrix(specs[i].out_channels, fan_in);
                init_uniform(layer.w, rng, init_scale * s);
                layer.b = Matrix(1, specs[i].out_channels);
                break;
            }
            case LayerKind::batchnorm: {
                const std::size_t c = current.channels;
                layer.gamma = Matrix(1, c, 1.0);
                layer.beta = Matrix(1, c);
                layer.running_mean = Matrix(1, c);
                layer.running_var = Matrix(1, c, 1.0);
                break;
            }
            default: break;
        }
        current = layer.out_shape;
        net.layers.push_back(std::move(layer));
    }
    net.output_shape = current;
    return net;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

/// Gather conv patches of one sample into rows of `cols`
/// (out_h*out_w rows, in_channels*f*f columns). Out-of-bounds taps are zero.
void im2col(std::span<const double> x, const Shape& in, const LayerSpec& spec,
            const Shape& out, Matrix& cols) {
    const std::size_t f = spec.filter_size;
    const long pad = static_cast<long>(spec.padding);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            double* row = cols.data() + (oy * out.width + ox) * cols.cols();
            std::size_t col = 0;
            for (std::size_t c = 0; c < in.channels; ++c) {
                for (std::size_t fy = 0; fy < f; ++fy) {
                    const long iy = static_cast<long>(oy * spec.stride + fy) - pad;
                    for (std::size_t fx = 0; fx < f; ++fx, ++col) {
                        const long ix = static_cast<long>(ox * spec.stride + fx) - pad;
                        row[col] = (iy >= 0 && iy < static_cast<long>(in.height) && ix >= 0 &&
                                    ix < static_cast<long>(in.width))
                                       ? x[(c * in.height + iy) * in.width + ix]
                                       : 0.0;
                    }
                }
            }
        }
    }
}

/// Scatter-add of patch gradients back onto one input sample.
void col2im_add(const Matrix& cols, const Shape& in, const LayerSpec& spec, const Shape& out,
                std::span<double> dx) {
    const std::size_t f = spec.filter_size;
    const long pad = static_cast<long>(spec.padding);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            const double* row = cols.data() + (oy * out.width + ox) * cols.cols();
            std::size_t col = 0;
            for (std::size_t c = 0; c < in.channels; ++c) {
                for (std::size_t fy = 0; fy < f; ++fy) {
                    const long iy = static_cast<long>(oy * spec.stride + fy) - pad;
                    for (std::size_t fx = 0; fx < f; ++fx, ++col) {
                        const long ix = static_cast<long>(ox * spec.stride + fx) - pad;
                        if (iy >= 0 && iy < static_cast<long>(in.height) && ix >= 0 &&
                            ix < static_cast<long>(in.width))
                            dx[(c * in.height + iy) * in.width + ix] += row[col];
                    }
                }
            }
        }
    }
}

Matrix forward_dense(const Layer& layer, const Matrix& x) {
    Matrix out = matmul(x, layer.w);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.data() + i * out.cols();
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] += layer.b(0, j);
    }
    return out;
}

Matrix forward_conv(const Layer& layer, const Matrix& x) {
    const Shape& in = layer.in_shape;
    const Shape& out_shape = layer.out_shape;
    const std::size_t out_hw = out_shape.height * out_shape.width;
    Matrix out(x.rows(), out_shape.flat());
    Matrix wt = transpose(layer.w);  // (in_ch*f*f) x out_ch
    Matrix cols(out_hw, layer.w.cols());
    for (std::size_t s = 0; s < x.rows(); ++s) {
        im2col(x.row(s), in, layer.spec, out_shape, cols);
        Matrix block = matmul(cols, wt);  // out_hw x out_ch
        double* orow = out.data() + s * out.cols();
        for (std::size_t o = 0; o < out_shape.channels; ++o) {
            const double bias = layer.b(0, o);
            for (std::size_t p = 0; p < out_hw; ++p) orow[o * out_hw + p] = block(p, o) + bias;
        }
    }
    return out;
}

Matrix forward_batchnorm(Layer& layer, const Matrix& x, RunMode mode, LayerCache* cache,
                         bool allow_stat_update) {
    const Shape& in = layer.in_shape;
    const std::size_t hw = in.height * in.width;
    const std::size_t c_count = in.channels;
    Matrix out(x.rows(), x.cols());
    if (mode == RunMode::infer) {
        for (std::size_t c = 0; c < c_count; ++c) {
            const double inv = 1.0 / std::sqrt(layer.running_var(0, c) + kBatchnormEps);
            const double g = layer.gamma(0, c), mean = layer.running_mean(0, c),
                         shift = layer.beta(0, c);
            for (std::size_t s = 0; s < x.rows(); ++s) {
                const double* xr = x.data() + s * x.cols() + c * hw;
                double* yr = out.data() + s * out.cols() + c * hw;
                for (std::size_t p = 0; p < hw; ++p) yr[p] = g * (xr[p] - mean) * inv + shift;
            }
        }
        return out;
    }
    const double m = static_cast<double>(x.rows() * hw);
    Matrix xhat(x.rows(), x.cols());
    std::vector<double> inv_std(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < x.rows(); ++s) {
            const double* xr = x.data() + s * x.cols() + c * hw;
            for (std::size_t p = 0; p < hw; ++p) sum += xr[p];
        }
        const double mean = sum / m;
        double ss = 0.0;
        for (std::size_t s = 0; s < x.rows(); ++s) {
            const double* xr = x.data() + s * x.cols() + c * hw;
            for (std::size_t p = 0; p < hw; ++p) ss += (xr[p] - mean) * (xr[p] - mean);
        }
        const double var = ss / m;
        const double inv = 1.0 / std::sqrt(var + kBatchnormEps);
        inv_std[c] = inv;
        const double g = layer.gamma(0, c), shift = layer.beta(0, c);
        for (std::size_t s = 0; s < x.rows(); ++s) {
            const double* xr = x.data() + s * x.cols() + c * hw;
            double* hr = xhat.data() + s * xhat.cols() + c * hw;
            double* yr = out.data() + s * out.cols() + c * hw;
            for (std::size_t p = 0; p < hw; ++p) {
                hr[p] = (xr[p] - mean) * inv;
                yr[p] = g * hr[p] + shift;
            }
        }
        if (allow_stat_update) {
            layer.running_mean(0, c) =
                kBatchnormMomentum * layer.running_mean(0, c) + (1.0 - kBatchnormMomentum) * mean;
            layer.running_var(0, c) =
                kBatchnormMomentum * layer.running_var(0, c) + (1.0 - kBatchnormMomentum) * var;
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Matrix forward_activation(const LayerSpec& spec, const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    switch (spec.act) {
        case Activation::linear: out = x; break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < x.size(); ++i)
                out.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < x.size(); ++i)
                out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
            break;
        case Activation::elu:
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double a = x.data()[i];
                out.data()[i] = a >= 0.0 ? a : kEluAlpha * (std::exp(a) - 1.0);
            }
            break;
    }
    return out;
}

Matrix forward_maxpool(const Layer& layer, const Matrix& x, LayerCache* cache) {
    const Shape& in = layer.in_shape;
    const Shape& out_shape = layer.out_shape;
    const std::size_t w = layer.spec.window;
    Matrix out(x.rows(), out_shape.flat());
    std::vector<std::uint32_t> argmax;
    if (cache) argmax.assign(x.rows() * out_shape.flat(), 0);
    for (std::size_t s = 0; s < x.rows(); ++s) {
        const double* xr = x.data() + s * x.cols();
        double* yr = out.data() + s * out.cols();
        for (std::size_t c = 0; c < in.channels; ++c) {
            for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
                for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
                    double best = -1e308;
                    std::size_t best_idx = 0;
                    for (std::size_t fy = 0; fy < w; ++fy) {
                        for (std::size_t fx = 0; fx < w; ++fx) {
                            const std::size_t idx =
                                (c * in.height + oy * w + fy) * in.width + ox * w + fx;
                            if (xr[idx] > best) {  // first winner kept on ties
                                best = xr[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t oidx =
                        (c * out_shape.height + oy) * out_shape.width + ox;
                    yr[oidx] = best;
                    if (cache) argmax[s * out_shape.flat() + oidx] =
                        static_cast<std::uint32_t>(best_idx);
                }
            }
        }
    }
    if (cache) cache->argmax = std::move(argmax);
    return out;
}

Matrix forward_upsample(const Layer& layer, const Matrix& x) {
    const Shape& in = layer.in_shape;
    const Shape& out_shape = layer.out_shape;
    const std::size_t w = layer.spec.window;
    Matrix out(x.rows(), out_shape.flat());
    for (std::size_t s = 0; s < x.rows(); ++s) {
        const double* xr = x.data() + s * x.cols();
        double* yr = out.data() + s * out.cols();
        for (std::size_t c = 0; c < in.channels; ++c)
            for (std::size_t y = 0; y < out_shape.height; ++y)
                for (std::size_t xx = 0; xx < out_shape.width; ++xx)
                    yr[(c * out_shape.height + y) * out_shape.width + xx] =
                        xr[(c * in.height + y / w) * in.width + xx / w];
    }
    return out;
}

Matrix forward_impl(Network& net, const Matrix& x, RunMode mode, ForwardCache* cache,
                    bool allow_stat_update) {
    if (x.cols() != net.input_shape.flat()) {
        throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                    " columns, network expects " +
                                    std::to_string(net.input_shape.flat()));
    }
    if (cache) {
        cache->layers.assign(net.layers.size(), LayerCache{});
        cache->batch = x.rows();
        cache->train_mode = mode == RunMode::train;
        cache->net = &net;
        cache->net_version = net.version;
    }
    Matrix current = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& layer = net.layers[i];
        LayerCache* lc = cache ? &cache->layers[i] : nullptr;
        Matrix next;
        switch (layer.spec.kind) {
            case LayerKind::dense: next = forward_dense(layer, current); break;
            case LayerKind::conv2d: next = forward_conv(layer, current); break;
            case LayerKind::batchnorm:
                next = forward_batchnorm(layer, current, mode, lc, allow_stat_update);
                break;
            case LayerKind::activation: next = forward_activation(layer.spec, current); break;
            case LayerKind::maxpool2d: next = forward_maxpool(layer, current, lc); break;
            case LayerKind::upsample2d: next = forward_upsample(layer, current); break;
        }
        if (lc) lc->input = std::move(current);
        current = std::move(next);
    }
    return current;
}

}  // namespace

Matrix forward(Network& net, const Matrix& x, RunMode mode, ForwardCache* cache) {
    return forward_impl(net, x, mode, cache, mode == RunMode::train);
}

Matrix reconstruct(const Network& net, const Matrix& x) {
    // Infer mode never mutates, so the cast stays safe.
    return forward_impl(const_cast<Network&>(net), x, RunMode::infer, nullptr, false);
}

namespace {

Matrix backward_dense(const Layer& layer, const LayerCache& lc, const Matrix& grad,
                      LayerGrads& out) {
    out.w = matmul(transpose(lc.input), grad);
    out.b = Matrix(1, grad.cols());
    for (std::size_t i = 0; i < grad.rows(); ++i)
        for (std::size_t j = 0; j < grad.cols(); ++j) out.b(0, j) += grad(i, j);
    return matmul(grad, transpose(layer.w));
}

Matrix backward_conv(const Layer& layer, const LayerCache& lc, const Matrix& grad,
                     LayerGrads& out) {
    const Shape& in = layer.in_shape;
    const Shape& out_shape = layer.out_shape;
    const std::size_t out_hw = out_shape.height * out_shape.width;
    out.w = Matrix(layer.w.rows(), layer.w.cols());
    out.b = Matrix(1, out_shape.channels);
    Matrix dx(grad.rows(), in.flat());
    Matrix cols(out_hw, layer.w.cols());
    Matrix gblock(out_hw, out_shape.channels);
    for (std::size_t s = 0; s < grad.rows(); ++s) {
        const double* grow = grad.data() + s * grad.cols();
        for (std::size_t o = 0; o < out_shape.channels; ++o) {
            double bsum = 0.0;
            for (std::size_t p = 0; p < out_hw; ++p) {
                const double g = grow[o * out_hw + p];
                gblock(p, o) = g;
                bsum += g;
            }
            out.b(0, o) += bsum;
        }
        im2col(lc.input.row(s), in, layer.spec, out_shape, cols);
        Matrix dw = matmul(transpose(gblock), cols);  // out_ch x (in_ch*f*f)
        for (std::size_t i = 0; i < dw.size(); ++i) out.w.data()[i] += dw.data()[i];
        Matrix dcols = matmul(gblock, layer.w);  // out_hw x (in_ch*f*f)
        col2im_add(dcols, in, layer.spec, out_shape, dx.row(s));
    }
    return dx;
}

Matrix backward_batchnorm(const Layer& layer, const LayerCache& lc, const Matrix& grad,
                          LayerGrads& out) {
    const Shape& in = layer.in_shape;
    const std::size_t hw = in.height * in.width;
    const std::size_t c_count = in.channels;
    const double m = static_cast<double>(grad.rows() * hw);
    out.gamma = Matrix(1, c_count);
    out.beta = Matrix(1, c_count);
    Matrix dx(grad.rows(), grad.cols());
    for (std::size_t c = 0; c < c_count; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t s = 0; s < grad.rows(); ++s) {
            const double* gr = grad.data() + s * grad.cols() + c * hw;
            const double* hr = lc.xhat.data() + s * lc.xhat.cols() + c * hw;
            for (std::size_t p = 0; p < hw; ++p) {
                sum_dy += gr[p];
                sum_dy_xhat += gr[p] * hr[p];
            }
        }
        out.gamma(0, c) = sum_dy_xhat;
        out.beta(0, c) = sum_dy;
        const double scale = layer.gamma(0, c) * lc.inv_std[c];
        for (std::size_t s = 0; s < grad.rows(); ++s) {
            const double* gr = grad.data() + s * grad.cols() + c * hw;
            const double* hr = lc.xhat.data() + s * lc.xhat.cols() + c * hw;
            double* dr = dx.data() + s * dx.cols() + c * hw;
            for (std::size_t p = 0; p < hw; ++p)
                dr[p] = scale * (gr[p] - sum_dy / m - hr[p] * sum_dy_xhat / m);
        }
    }
    return dx;
}

Matrix backward_activation(const LayerSpec& spec, const LayerCache& lc, const Matrix& grad) {
    Matrix dx(grad.rows(), grad.cols());
    switch (spec.act) {
        case Activation::linear: dx = grad; break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i) {
                const double y = 1.0 / (1.0 + std::exp(-lc.input.data()[i]));
                dx.data()[i] = grad.data()[i] * y * (1.0 - y);
            }
            break;
        case Activation::relu:
            // subgradient 0 at the kink
            for (std::size_t i = 0; i < grad.size(); ++i)
                dx.data()[i] = lc.input.data()[i] > 0.0 ? grad.data()[i] : 0.0;
            break;
        case Activation::elu:
            for (std::size_t i = 0; i < grad.size(); ++i) {
                const double a = lc.input.data()[i];
                dx.data()[i] =
                    grad.data()[i] * (a > 0.0 ? 1.0 : kEluAlpha * std::exp(a));
            }
            break;
    }
    return dx;
}

Matrix backward_maxpool(const Layer& layer, const LayerCache& lc, const Matrix& grad) {
    Matrix dx(grad.rows(), layer.in_shape.flat());
    const std::size_t out_flat = layer.out_shape.flat();
    for (std::size_t s = 0; s < grad.rows(); ++s) {
        const double* gr = grad.data() + s * grad.cols();
        double* dr = dx.data() + s * dx.cols();
        for (std::size_t p = 0; p < out_flat; ++p) dr[lc.argmax[s * out_flat + p]] += gr[p];
    }
    return dx;
}

Matrix backward_upsample(const Layer& layer, const Matrix& grad) {
    const Shape& in = layer.in_shape;
    const Shape& out_shape = layer.out_shape;
    const std::size_t w = layer.spec.window;
    Matrix dx(grad.rows(), in.flat());
    for (std::size_t s = 0; s < grad.rows(); ++s) {
        const double* gr = grad.data() + s * grad.cols();
        double* dr = dx.data() + s * dx.cols();
        for (std::size_t c = 0; c < in.channels; ++c)
            for (std::size_t y = 0; y < out_shape.height; ++y)
                for (std::size_t xx = 0; xx < out_shape.width; ++xx)
                    dr[(c * in.height + y / w) * in.width + xx / w] +=
                        gr[(c * out_shape.height + y) * out_shape.width + xx];
    }
    return dx;
}

}  // namespace

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& grad_output) {
    if (cache.net != &net || cache.net_version != net.version)
        throw std::invalid_argument("backward: stale or mismatched forward cache");
    if (!cache.train_mode)
        throw std::invalid_argument("backward: cache must come from a train-mode forward");
    if (grad_output.rows() != cache.batch || grad_output.cols() != net.output_shape.flat())
        throw std::invalid_argument("backward: grad_output shape mismatch");

    Gradients grads;
    grads.layers.assign(net.layers.size(), LayerGrads{});
    Matrix grad = grad_output;
    for (std::size_t idx = net.layers.size(); idx-- > 0;) {
        const Layer& layer = net.layers[idx];
        const LayerCache& lc = cache.layers[idx];
        LayerGrads& lg = grads.layers[idx];
        switch (layer.spec.kind) {
            case LayerKind::dense: grad = backward_dense(layer, lc, grad, lg); break;
            case LayerKind::conv2d: grad = backward_conv(layer, lc, grad, lg); break;
            case LayerKind::batchnorm: grad = backward_batchnorm(layer, lc, grad, lg); break;
            case LayerKind::activation: grad = backward_activation(layer.spec, lc, grad); break;
            case LayerKind::maxpool2d: grad = backward_maxpool(layer, lc, grad); break;
            case LayerKind::upsample2d: grad = backward_upsample(layer, grad); break;
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

namespace {

LayerGrads zeros_like_params(const Layer& layer) {
    LayerGrads g;
    g.w = Matrix(layer.w.rows(), layer.w.cols());
    g.b = Matrix(layer.b.rows(), layer.b.cols());
    g.gamma = Matrix(layer.gamma.rows(), layer.gamma.cols());
    g.beta = Matrix(layer.beta.rows(), layer.beta.cols());
    return g;
}

void adam_update_block(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                       const AdamState& st, double bias1, double bias2) {
    if (param.empty()) return;
    if (!param.same_shape(grad) || !param.same_shape(m))
        throw std::invalid_argument("adam_step: gradient shape does not mirror parameter shape");
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data()[i];
        m.data()[i] = st.beta1 * m.data()[i] + (1.0 - st.beta1) * g;
        v.data()[i] = st.beta2 * v.data()[i] + (1.0 - st.beta2) * g * g;
        const double mhat = m.data()[i] / bias1;
        const double vhat = v.data()[i] / bias2;
        param.data()[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
    }
}

}  // namespace

AdamState make_adam(const Network& net, double learning_rate) {
    AdamState st;
    st.learning_rate = learning_rate;
    for (const Layer& layer : net.layers) {
        st.m.push_back(zeros_like_params(layer));
        st.v.push_back(zeros_like_params(layer));
    }
    return st;
}

void adam_step(AdamState& state, Network& net, const Gradients& grads) {
    if (state.m.size() != net.layers.size() || grads.layers.size() != net.layers.size())
        throw std::invalid_argument("adam_step: state/gradients do not match network layout");
    ++state.step;
    const double bias1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bias2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& layer = net.layers[i];
        const LayerGrads& g = grads.layers[i];
        adam_update_block(layer.w, g.w, state.m[i].w, state.v[i].w, state, bias1, bias2);
        adam_update_block(layer.b, g.b, state.m[i].b, state.v[i].b, state, bias1, bias2);
        adam_update_block(layer.gamma, g.gamma, state.m[i].gamma, state.v[i].gamma, state, bias1,
                          bias2);
        adam_update_block(layer.beta, g.beta, state.m[i].beta, state.v[i].beta, state, bias1,
                          bias2);
        layer.w.require_finite("adam_step");
        layer.b.require_finite("adam_step");
        layer.gamma.require_finite("adam_step");
        layer.beta.require_finite("adam_step");
    }
    ++net.version;
}

LossResult mse_loss(const Matrix& x_hat, const Matrix& target) {
    if (!x_hat.same_shape(target))
        throw std::invalid_argument("mse_loss shape mismatch: " + x_hat.shape_str() + " vs " +
                                    target.shape_str());
    LossResult r;
    r.grad = Matrix(x_hat.rows(), x_hat.cols());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        const double d = x_hat.data()[i] - target.data()[i];
        r.loss += d * d;
        r.grad.data()[i] = 2.0 * d;
    }
    return r;
}

double weight_squared_norm(const Network& net) {
    double s = 0.0;
    for (const Layer& layer : net.layers) {
        if (layer.spec.kind != LayerKind::dense && layer.spec.kind != LayerKind::conv2d) continue;
        for (std::size_t i = 0; i < layer.w.size(); ++i) s += layer.w.data()[i] * layer.w.data()[i];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Persistence (layout in docs/formats.md)
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'A', 'D', 'M'};
constexpr std::uint16_t kFormatVersion = 1;

void write_block(std::ostream& out, const Matrix& m) {
    binio::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    binio::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) binio::write_f64(out, m.data()[i]);
}

Matrix read_block(std::istream& in) {
    const std::uint32_t rows = binio::read_u32(in, "parameter block rows");
    const std::uint32_t cols = binio::read_u32(in, "parameter block cols");
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = binio::read_f64(in, "parameter value");
    return Matrix(rows, cols, std::move(data));
}

std::vector<const Matrix*> param_blocks(const Layer& layer) {
    switch (layer.spec.kind) {
        case LayerKind::dense:
        case LayerKind::conv2d: return {&layer.w, &layer.b};
        case LayerKind::batchnorm:
            return {&layer.gamma, &layer.beta, &layer.running_mean, &layer.running_var};
        default: return {};
    }
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open model file for writing: " + path);
    binio::write_bytes(out, kMagic, 4);
    binio::write_u16(out, kFormatVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(net.input_shape.channels));
    binio::write_u32(out, static_cast<std::uint32_t>(net.input_shape.height));
    binio::write_u32(out, static_cast<std::uint32_t>(net.input_shape.width));
    binio::write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const Layer& layer : net.layers) {
        const LayerSpec& s = layer.spec;
        out.put(static_cast<char>(s.kind));
        out.put(static_cast<char>(s.act));
        for (std::size_t field : {s.in_dim, s.out_dim, s.in_channels, s.out_channels,
                                  s.filter_size, s.stride, s.padding, s.window})
            binio::write_u32(out, static_cast<std::uint32_t>(field));
        const auto blocks = param_blocks(layer);
        binio::write_u32(out, static_cast<std::uint32_t>(blocks.size()));
        for (const Matrix* block : blocks) write_block(out, *block);
    }
    if (!out) throw data_error("write failed for model file: " + path);
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw data_error("model file magic mismatch: " + path);
    const std::uint16_t version = binio::read_u16(in, "format version");
    if (version != kFormatVersion)
        throw data_error("unsupported model format version " + std::to_string(version));
    Shape input;
    input.channels = binio::read_u32(in, "input channels");
    input.height = binio::read_u32(in, "input height");
    input.width = binio::read_u32(in, "input width");
    const std::uint32_t layer_count = binio::read_u32(in, "layer count");

    std::vector<LayerSpec> specs;
    std::vector<std::vector<Matrix>> blocks;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        LayerSpec s;
        int kind = in.get(), act = in.get();
        if (kind < 0 || act < 0) throw data_error("unexpected end of file in layer header");
        if (kind > static_cast<int>(LayerKind::upsample2d))
            throw data_error("unknown layer kind " + std::to_string(kind));
        if (act > static_cast<int>(Activation::elu))
            throw data_error("unknown activation " + std::to_string(act));
        s.kind = static_cast<LayerKind>(kind);
        s.act = static_cast<Activation>(act);
        std::size_t* fields[] = {&s.in_dim, &s.out_dim, &s.in_channels, &s.out_channels,
                                 &s.filter_size, &s.stride, &s.padding, &s.window};
        for (std::size_t* f : fields) *f = binio::read_u32(in, "layer field");
        const std::uint32_t n_blocks = binio::read_u32(in, "block count");
        std::vector<Matrix> layer_blocks;
        for (std::uint32_t bi = 0; bi < n_blocks; ++bi) layer_blocks.push_back(read_block(in));
        specs.push_back(s);
        blocks.push_back(std::move(layer_blocks));
    }

    // Rebuild through the validator, then overwrite parameters bit-for-bit.
    Rng rng(0);
    Network net = build_network(specs, input, rng);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& layer = net.layers[i];
        std::vector<Matrix*> dst;
        switch (layer.spec.kind) {
            case LayerKind::dense:
            case LayerKind::conv2d: dst = {&layer.w, &layer.b}; break;
            case LayerKind::batchnorm:
                dst = {&layer.gamma, &layer.beta, &layer.running_mean, &layer.running_var};
                break;
            default: break;
        }
        if (dst.size() != blocks[i].size())
            throw data_error("model file layer " + std::to_string(i) +
                             " has wrong parameter block count");
        for (std::size_t bi = 0; bi < dst.size(); ++bi) {
            if (!dst[bi]->same_shape(blocks[i][bi]))
                throw data_error("model file layer " + std::to_string(i) +
                                 " parameter block shape mismatch");
            *dst[bi] = std::move(blocks[i][bi]);
        }
    }
    return net;
}

}  // namespace radm
