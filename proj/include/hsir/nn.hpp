#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hsir/rng.hpp"

// Minimal layers with explicit forward/backward passes. Parameters live in a
// flat array owned by the network; each layer records the offsets of its
// slices, so networks stay plain copyable values.
namespace hsir::nn {

// C feature planes of rows x cols, column-major within a plane, planes
// outermost (the same order as a cube's vec layout).
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t r, std::size_t q) : channels(c), rows(r), cols(q), data(c * r * q, 0.0) {}

    std::size_t plane() const { return rows * cols; }
    double& at(std::size_t c, std::size_t r, std::size_t q) { return data[(c * cols + q) * rows + r]; }
    double at(std::size_t c, std::size_t r, std::size_t q) const { return data[(c * cols + q) * rows + r]; }
};

class ParamAllocator {
public:
    std::size_t allocate(std::size_t count) {
        const std::size_t offset = total_;
        total_ += count;
        return offset;
    }
    std::size_t total() const { return total_; }

private:
    std::size_t total_ = 0;
};

using Params = std::span<const double>;
using Grads = std::span<double>;

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(std::span<double> values, std::size_t fan_in, Rng& rng);

// Square kernel, zero padding kernel/2, stride 1 or 2.
struct Conv2d {
    struct Cache {
        Eigen::MatrixXd patches; // output pixels x (in_ch * k * k)
        std::size_t in_rows = 0;
        std::size_t in_cols = 0;
    };

    std::size_t in_ch = 0, out_ch = 0, kernel = 3, stride = 1;
    std::size_t weight_offset = 0, bias_offset = 0;

    Conv2d() = default;
    Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t s, ParamAllocator& alloc);

    std::size_t out_size(std::size_t in) const { return (in + 2 * (kernel / 2) - kernel) / stride + 1; }
    std::size_t weight_count() const { return out_ch * in_ch * kernel * kernel; }

    void init(std::span<double> params, Rng& rng) const;
    FeatureMap forward(Params params, const FeatureMap& x, Cache* cache) const;
    // Accumulates parameter gradients; returns dL/dx when want_input_grad.
    FeatureMap backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads,
                        bool want_input_grad) const;
};

// Per-channel normalization over the spatial plane with affine gamma/beta.
struct InstanceNorm {
    struct Cache {
        FeatureMap normalized;
        std::vector<double> inv_std;
    };

    std::size_t channels = 0;
    std::size_t gamma_offset = 0, beta_offset = 0;
    double eps = 1e-5;

    InstanceNorm() = default;
    InstanceNorm(std::size_t c, ParamAllocator& alloc);

    void init(std::span<double> params) const;
    FeatureMap forward(Params params, const FeatureMap& x, Cache* cache) const;
    FeatureMap backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads) const;
};

double leaky_relu(double v, double slope);
void leaky_relu_inplace(std::span<double> values, double slope);
// dy scaled by the activation slope wherever the activation output is negative.
void leaky_relu_backward(std::span<const double> activated, std::span<double> dy, double slope);

struct Dense {
    std::size_t in = 0, out = 0;
    std::size_t weight_offset = 0, bias_offset = 0;

    Dense() = default;
    Dense(std::size_t i, std::size_t o, ParamAllocator& alloc);

    void init(std::span<double> params, Rng& rng) const;
    std::vector<double> forward(Params params, std::span<const double> x) const;
    std::vector<double> backward(Params params, std::span<const double> x, std::span<const double> dy,
                                 Grads grads) const;
};

// Squeeze (global average) -> dense -> leaky -> dense -> sigmoid gate that
// rescales each channel.
struct ChannelAttention {
    struct Cache {
        FeatureMap input;
        std::vector<double> squeezed, hidden, gate;
    };

    std::size_t channels = 0, hidden = 0;
    Dense reduce, expand;
    double slope = 0.2;

    ChannelAttention() = default;
    ChannelAttention(std::size_t c, std::size_t reduction, double leaky_slope, ParamAllocator& alloc);

    void init(std::span<double> params, Rng& rng) const;
    FeatureMap forward(Params params, const FeatureMap& x, Cache* cache) const;
    FeatureMap backward(Params params, const Cache& cache, const FeatureMap& dy, Grads grads) const;
};

// Nearest-neighbour x2 upsampling cropped to (rows, cols).
FeatureMap upsample_nearest(const FeatureMap& x, std::size_t rows, std::size_t cols);
FeatureMap upsample_nearest_backward(const FeatureMap& dy, std::size_t rows, std::size_t cols);

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);
// Splits a gradient over concatenated channels back into (first, second).
std::pair<FeatureMap, FeatureMap> split_channels(const FeatureMap& d, std::size_t first_channels);

} // namespace hsir::nn
