#include "hsir/nn.hpp"

#include <algorithm>
#include <cmath>

#include "hsir/errors.hpp"

namespace hsir::nn {

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

} // namespace

void init_uniform_fan_in(std::span<double> values, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (auto& v : values) v = uniform(rng);
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t s, ParamAllocator& alloc)
    : in_ch(in), out_ch(out), kernel(k), stride(s) {
    if (k % 2 == 0 || (s != 1 && s != 2)) throw ContractError("Conv2d: odd kernel and stride 1/2 required");
    weight_offset = alloc.allocate(weight_count());
    bias_offset = alloc.allocate(out_ch);
}

void Conv2d::init(std::span<double> params, Rng& rng) const {
    const std::size_t fan_in = in_ch * kernel * kernel;
    init_uniform_fan_in(params.subspan(weight_offset, weight_count()), fan_in, rng);
    init_uniform_fan_in(params.subspan(bias_offset, out_ch), fan_in, rng);
}

FeatureMap Conv2d::forward(Params params, const FeatureMap& x, Cache* cache) const {
    if (x.channels != in_ch) throw ContractError("Conv2d: channel mismatch");
    const std::size_t out_rows = out_size(x.rows);
    const std::size_t out_cols = out_size(x.cols);
    const std::size_t pixels = out_rows * out_cols;
    const std::size_t taps = in_ch * kernel * kernel;
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);

    Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(idx(pixels), idx(taps));
    for (std::size_t c = 0; c < in_ch; ++c) {
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                double* column = patches.col(idx((c * kernel + ky) * kernel + kx)).data();
                for (std::size_t oq = 0; oq < out_cols; ++oq) {
                    const auto sq = static_cast<std::ptrdiff_t>(oq * stride + kx) - pad;
                    if (sq < 0 || sq >= static_cast<std::ptrdiff_t>(x.cols)) continue;
                    for (std::size_t orow = 0; orow < out_rows; ++orow) {
                        const auto sr = static_cast<std::ptrdiff_t>(orow * stride + ky) - pad;
                        if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(x.rows)) continue;
                        column[oq * out_rows + orow] = x.at(c, static_cast<std::size_t>(sr), static_cast<std::size_t>(sq));
                    }
                }
            }
        }
    }

    FeatureMap y(out_ch, out_rows, out_cols);
    MatMap out(y.data.data(), idx(pixels), idx(out_ch));
    ConstMatMap weights(params.data() + weight_offset, idx(taps), idx(out_ch));
    out.noalias() = patches * weights;
    for (std::size_t o = 0; o < out_ch; ++o) out.col(idx(o)).array() += params[bias_offset + o];

    if (cache) {
        cache->patches = std::move(patches);
        cache->in_rows = x.rows;
        cache->in_cols = x.cols;
    }
    return y;
}

FeatureMap Conv2d::backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads,
                            bool want_input_grad) const {
    const std::size_t pixels = dy.plane();
    const std::size_t taps = in_ch * kernel * kernel;
    ConstMatMap dout(dy.data.data(), idx(pixels), idx(out_ch));

    MatMap dweights(grads.data() + weight_offset, idx(taps), idx(out_ch));
    dweights.noalias() += cache.patches.transpose() * dout;
    for (std::size_t o = 0; o < out_ch; ++o) grads[bias_offset + o] += dout.col(idx(o)).sum();

    if (!want_input_grad) return {};

    ConstMatMap weights(params.data() + weight_offset, idx(taps), idx(out_ch));
    const Eigen::MatrixXd dpatches = dout * weights.transpose();
    FeatureMap dx(in_ch, cache.in_rows, cache.in_cols);
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
    for (std::size_t c = 0; c < in_ch; ++c) {
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                const double* column = dpatches.col(idx((c * kernel + ky) * kernel + kx)).data();
                for (std::size_t oq = 0; oq < dy.cols; ++oq) {
                    const auto sq = static_cast<std::ptrdiff_t>(oq * stride + kx) - pad;
                    if (sq < 0 || sq >= static_cast<std::ptrdiff_t>(dx.cols)) continue;
                    for (std::size_t orow = 0; orow < dy.rows; ++orow) {
                        const auto sr = static_cast<std::ptrdiff_t>(orow * stride + ky) - pad;
                        if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(dx.rows)) continue;
                        dx.at(c, static_cast<std::size_t>(sr), static_cast<std::size_t>(sq)) += column[oq * dy.rows + orow];
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

InstanceNorm::InstanceNorm(std::size_t c, ParamAllocator& alloc) : channels(c) {
    gamma_offset = alloc.allocate(c);
    beta_offset = alloc.allocate(c);
}

void InstanceNorm::init(std::span<double> params) const {
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(gamma_offset), channels, 1.0);
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(beta_offset), channels, 0.0);
}

FeatureMap InstanceNorm::forward(Params params, const FeatureMap& x, Cache* cache) const {
    const std::size_t plane = x.plane();
    FeatureMap normalized(x.channels, x.rows, x.cols);
    FeatureMap y(x.channels, x.rows, x.cols);
    std::vector<double> inv_std(x.channels);
    for (std::size_t c = 0; c < x.channels; ++c) {
        const double* src = x.data.data() + c * plane;
        double mean = 0.0;
        for (std::size_t p = 0; p < plane; ++p) mean += src[p];
        mean /= static_cast<double>(plane);
        double var = 0.0;
        for (std::size_t p = 0; p < plane; ++p) var += (src[p] - mean) * (src[p] - mean);
        var /= static_cast<double>(plane);
        inv_std[c] = 1.0 / std::sqrt(var + eps);
        const double gamma = params[gamma_offset + c];
        const double beta = params[beta_offset + c];
        double* xn = normalized.data.data() + c * plane;
        double* out = y.data.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            xn[p] = (src[p] - mean) * inv_std[c];
            out[p] = gamma * xn[p] + beta;
        }
    }
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

FeatureMap InstanceNorm::backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads) const {
    const std::size_t plane = dy.plane();
    const auto n = static_cast<double>(plane);
    FeatureMap dx(dy.channels, dy.rows, dy.cols);
    for (std::size_t c = 0; c < dy.channels; ++c) {
        const double* g = dy.data.data() + c * plane;
        const double* xn = cache.normalized.data.data() + c * plane;
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            sum_g += g[p];
            sum_gx += g[p] * xn[p];
        }
        grads[gamma_offset + c] += sum_gx;
        grads[beta_offset + c] += sum_g;
        const double gamma = params[gamma_offset + c];
        const double scale = gamma * cache.inv_std[c];
        double* out = dx.data.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            out[p] = scale * (g[p] - sum_g / n - xn[p] * sum_gx / n);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

double leaky_relu(double v, double slope) { return v >= 0.0 ? v : slope * v; }

void leaky_relu_inplace(std::span<double> values, double slope) {
    for (auto& v : values) v = leaky_relu(v, slope);
}

void leaky_relu_backward(std::span<const double> activated, std::span<double> dy, double slope) {
    for (std::size_t n = 0; n < dy.size(); ++n) {
        if (activated[n] < 0.0) dy[n] *= slope;
    }
}

// ---------------------------------------------------------------------------

Dense::Dense(std::size_t i, std::size_t o, ParamAllocator& alloc) : in(i), out(o) {
    weight_offset = alloc.allocate(in * out);
    bias_offset = alloc.allocate(out);
}

void Dense::init(std::span<double> params, Rng& rng) const {
    init_uniform_fan_in(params.subspan(weight_offset, in * out), in, rng);
    init_uniform_fan_in(params.subspan(bias_offset, out), in, rng);
}

std::vector<double> Dense::forward(Params params, std::span<const double> x) const {
    if (x.size() != in) throw ContractError("Dense: input size mismatch");
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double* w = params.data() + weight_offset + o * in;
        double acc = params[bias_offset + o];
        for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
        y[o] = acc;
    }
    return y;
}

std::vector<double> Dense::backward(Params params, std::span<const double> x, std::span<const double> dy,
                                    Grads grads) const {
    std::vector<double> dx(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        const double* w = params.data() + weight_offset + o * in;
        double* dw = grads.data() + weight_offset + o * in;
        for (std::size_t i = 0; i < in; ++i) {
            dw[i] += dy[o] * x[i];
            dx[i] += w[i] * dy[o];
        }
        grads[bias_offset + o] += dy[o];
    }
    return dx;
}

// ---------------------------------------------------------------------------

ChannelAttention::ChannelAttention(std::size_t c, std::size_t reduction, double leaky_slope, ParamAllocator& alloc)
    : channels(c), hidden(std::max<std::size_t>(1, c / std::max<std::size_t>(reduction, 1))),
      reduce(c, hidden, alloc), expand(hidden, c, alloc), slope(leaky_slope) {}

void ChannelAttention::init(std::span<double> params, Rng& rng) const {
    reduce.init(params, rng);
    expand.init(params, rng);
}

FeatureMap ChannelAttention::forward(Params params, const FeatureMap& x, Cache* cache) const {
    const std::size_t plane = x.plane();
    std::vector<double> squeezed(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = x.data.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) squeezed[c] += src[p];
        squeezed[c] /= static_cast<double>(plane);
    }
    auto hid = reduce.forward(params, squeezed);
    leaky_relu_inplace(hid, slope);
    auto gate = expand.forward(params, hid);
    for (auto& g : gate) g = g >= 0.0 ? 1.0 / (1.0 + std::exp(-g)) : std::exp(g) / (1.0 + std::exp(g));

    FeatureMap y(x.channels, x.rows, x.cols);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) y.data[c * plane + p] = x.data[c * plane + p] * gate[c];
    }
    if (cache) {
        cache->input = x;
        cache->squeezed = std::move(squeezed);
        cache->hidden = std::move(hid);
        cache->gate = std::move(gate);
    }
    return y;
}

FeatureMap ChannelAttention::backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads) const {
    const std::size_t plane = dy.plane();
    std::vector<double> dz2(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double dg = 0.0;
        for (std::size_t p = 0; p < plane; ++p) dg += dy.data[c * plane + p] * cache.input.data[c * plane + p];
        const double g = cache.gate[c];
        dz2[c] = dg * g * (1.0 - g);
    }
    auto dh = expand.backward(params, cache.hidden, dz2, grads);
    leaky_relu_backward(cache.hidden, dh, slope);
    const auto ds = reduce.backward(params, cache.squeezed, dh, grads);

    FeatureMap dx(dy.channels, dy.rows, dy.cols);
    for (std::size_t c = 0; c < channels; ++c) {
        const double from_squeeze = ds[c] / static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            dx.data[c * plane + p] = dy.data[c * plane + p] * cache.gate[c] + from_squeeze;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

FeatureMap upsample_nearest(const FeatureMap& x, std::size_t rows, std::size_t cols) {
    if (rows > 2 * x.rows || cols > 2 * x.cols || rows == 0 || cols == 0) {
        throw ContractError("upsample_nearest: target larger than 2x input");
    }
    FeatureMap y(x.channels, rows, cols);
    for (std::size_t c = 0; c < x.channels; ++c) {
        for (std::size_t q = 0; q < cols; ++q) {
            for (std::size_t r = 0; r < rows; ++r) y.at(c, r, q) = x.at(c, r / 2, q / 2);
        }
    }
    return y;
}

FeatureMap upsample_nearest_backward(const FeatureMap& dy, std::size_t rows, std::size_t cols) {
    FeatureMap dx(dy.channels, rows, cols);
    for (std::size_t c = 0; c < dy.channels; ++c) {
        for (std::size_t q = 0; q < dy.cols; ++q) {
            for (std::size_t r = 0; r < dy.rows; ++r) dx.at(c, r / 2, q / 2) += dy.at(c, r, q);
        }
    }
    return dx;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ContractError("concat_channels: spatial size mismatch");
    FeatureMap y(a.channels + b.channels, a.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return y;
}

std::pair<FeatureMap, FeatureMap> split_channels(const FeatureMap& d, std::size_t first_channels) {
    FeatureMap a(first_channels, d.rows, d.cols);
    FeatureMap b(d.channels - first_channels, d.rows, d.cols);
    const auto cut = static_cast<std::ptrdiff_t>(a.data.size());
    std::copy(d.data.begin(), d.data.begin() + cut, a.data.begin());
    std::copy(d.data.begin() + cut, d.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

} // namespace hsir::nn
