#include "hsir/generators.hpp"

#include "hsir/errors.hpp"

namespace hsir {

using nn::FeatureMap;

struct SpatialGenerator::Tape {
    std::vector<nn::Conv2d::Cache> down_conv;
    std::vector<nn::InstanceNorm::Cache> down_norm;
    std::vector<FeatureMap> encoded; // activated encoder outputs
    std::vector<nn::Conv2d::Cache> up_conv;
    std::vector<nn::InstanceNorm::Cache> up_norm;
    std::vector<nn::ChannelAttention::Cache> attention;
    std::vector<std::size_t> upsampled_channels;
    std::vector<std::pair<std::size_t, std::size_t>> prev_size;
    nn::Conv2d::Cache head;
};

SpatialGenerator::SpatialGenerator(std::size_t rows, std::size_t cols, SpatialArchitecture arch, Rng& weight_rng,
                                   Rng& latent_rng)
    : rows_(rows), cols_(cols), arch_(std::move(arch)) {
    if (rows_ == 0 || cols_ == 0) throw ContractError("SpatialGenerator: empty map");
    if (arch_.widths.empty() || arch_.latent_channels == 0) throw ContractError("SpatialGenerator: bad architecture");

    nn::ParamAllocator alloc;
    const std::size_t levels = arch_.widths.size();
    std::size_t in = arch_.latent_channels;
    for (std::size_t d = 0; d < levels; ++d) {
        down_.emplace_back(in, arch_.widths[d], 3, 2, alloc);
        down_norm_.emplace_back(arch_.widths[d], alloc);
        in = arch_.widths[d];
    }
    // Decoder stage s consumes the skip at encoder level levels-2-s; the final
    // stage has no encoder feature at its scale and optionally takes the latent.
    std::size_t prev = arch_.widths[levels - 1];
    for (std::size_t s = 0; s < levels; ++s) {
        const bool to_latent = s + 1 == levels;
        const std::size_t skip =
            to_latent ? (arch_.input_skip ? arch_.latent_channels : 0) : arch_.widths[levels - 2 - s];
        const std::size_t out = to_latent ? arch_.widths[0] : arch_.widths[levels - 2 - s];
        up_.emplace_back(prev + skip, out, 3, 1, alloc);
        up_norm_.emplace_back(out, alloc);
        attention_.emplace_back(out, arch_.attention_reduction, arch_.leaky_slope, alloc);
        prev = out;
    }
    head_ = nn::Conv2d(prev, 1, 1, 1, alloc);

    params_.assign(alloc.total(), 0.0);
    for (std::size_t d = 0; d < levels; ++d) {
        down_[d].init(params_, weight_rng);
        down_norm_[d].init(params_);
    }
    for (std::size_t s = 0; s < levels; ++s) {
        up_[s].init(params_, weight_rng);
        up_norm_[s].init(params_);
        attention_[s].init(params_, weight_rng);
    }
    head_.init(params_, weight_rng);

    latent_ = FeatureMap(arch_.latent_channels, rows_, cols_);
    std::uniform_real_distribution<double> uniform(0.0, 0.1);
    for (auto& v : latent_.data) v = uniform(latent_rng);
}

std::pair<std::size_t, std::size_t> SpatialGenerator::head_range() const {
    return {head_.weight_offset, head_.bias_offset + head_.out_ch};
}

std::vector<double> SpatialGenerator::run(Tape* tape) const {
    const std::size_t levels = arch_.widths.size();
    const double slope = arch_.leaky_slope;
    if (tape) {
        tape->down_conv.resize(levels);
        tape->down_norm.resize(levels);
        tape->up_conv.resize(levels);
        tape->up_norm.resize(levels);
        tape->attention.resize(levels);
        tape->upsampled_channels.resize(levels);
        tape->prev_size.resize(levels);
    }

    std::vector<FeatureMap> encoded;
    encoded.reserve(levels);
    const FeatureMap* x = &latent_;
    for (std::size_t d = 0; d < levels; ++d) {
        auto h = down_[d].forward(params_, *x, tape ? &tape->down_conv[d] : nullptr);
        h = down_norm_[d].forward(params_, h, tape ? &tape->down_norm[d] : nullptr);
        nn::leaky_relu_inplace(h.data, slope);
        encoded.push_back(std::move(h));
        x = &encoded.back();
    }

    FeatureMap prev = encoded.back();
    for (std::size_t s = 0; s < levels; ++s) {
        const bool to_latent = s + 1 == levels;
        const FeatureMap& skip = to_latent ? latent_ : encoded[levels - 2 - s];
        if (tape) {
            tape->upsampled_channels[s] = prev.channels;
            tape->prev_size[s] = {prev.rows, prev.cols};
        }
        auto h = nn::upsample_nearest(prev, skip.rows, skip.cols);
        if (!to_latent || arch_.input_skip) h = nn::concat_channels(h, skip);
        h = up_[s].forward(params_, h, tape ? &tape->up_conv[s] : nullptr);
        h = up_norm_[s].forward(params_, h, tape ? &tape->up_norm[s] : nullptr);
        nn::leaky_relu_inplace(h.data, slope);
        prev = attention_[s].forward(params_, h, tape ? &tape->attention[s] : nullptr);
    }
    auto out = head_.forward(params_, prev, tape ? &tape->head : nullptr);
    if (tape) tape->encoded = std::move(encoded);
    return std::move(out.data);
}

std::vector<double> SpatialGenerator::eval() const { return run(nullptr); }

SpatialGenerator::Recorded SpatialGenerator::record() const {
    auto tape = std::make_shared<Tape>();
    auto output = run(tape.get());
    return {std::move(output), std::move(tape)};
}

void SpatialGenerator::accumulate_gradient(std::span<const double> d_output, std::span<double> grads) const {
    backward(record(), d_output, grads);
}

void SpatialGenerator::backward(const Recorded& pass, std::span<const double> d_output, std::span<double> grads) const {
    if (d_output.size() != rows_ * cols_) throw ContractError("SpatialGenerator: gradient size mismatch");
    if (grads.size() != params_.size()) throw ContractError("SpatialGenerator: parameter gradient size mismatch");
    if (!pass.tape) throw ContractError("SpatialGenerator: backward needs a recorded pass");
    const Tape& tape = *pass.tape;

    const std::size_t levels = arch_.widths.size();
    const double slope = arch_.leaky_slope;

    FeatureMap dy(1, rows_, cols_);
    std::copy(d_output.begin(), d_output.end(), dy.data.begin());
    FeatureMap d = head_.backward(params_, tape.head, dy, grads, true);

    // Gradients flowing into each encoder output through decoder skips.
    std::vector<FeatureMap> d_encoded(levels);
    for (std::size_t s = levels; s-- > 0;) {
        const bool to_latent = s + 1 == levels;
        d = attention_[s].backward(params_, tape.attention[s], d, grads);
        nn::leaky_relu_backward(tape.attention[s].input.data, d.data, slope);
        d = up_norm_[s].backward(params_, tape.up_norm[s], d, grads);
        d = up_[s].backward(params_, tape.up_conv[s], d, grads, true);
        FeatureMap d_up;
        if (to_latent && !arch_.input_skip) {
            d_up = std::move(d);
        } else {
            auto [up_part, d_skip] = nn::split_channels(d, tape.upsampled_channels[s]);
            d_up = std::move(up_part);
            if (!to_latent) d_encoded[levels - 2 - s] = std::move(d_skip);
        }
        d = nn::upsample_nearest_backward(d_up, tape.prev_size[s].first, tape.prev_size[s].second);
    }
    // d now holds the gradient w.r.t. the deepest encoder output.
    for (std::size_t lvl = levels; lvl-- > 0;) {
        if (lvl + 1 < levels) {
            // add skip contribution to the gradient coming from the deeper stage
            for (std::size_t n = 0; n < d.data.size(); ++n) d.data[n] += d_encoded[lvl].data[n];
        }
        nn::leaky_relu_backward(tape.encoded[lvl].data, d.data, slope);
        d = down_norm_[lvl].backward(params_, tape.down_norm[lvl], d, grads);
        d = down_[lvl].backward(params_, tape.down_conv[lvl], d, grads, lvl > 0);
    }
}

// ---------------------------------------------------------------------------

SpectralGenerator::SpectralGenerator(std::size_t bands, SpectralArchitecture arch, Rng& weight_rng, Rng& latent_rng)
    : bands_(bands), arch_(std::move(arch)) {
    if (bands_ == 0 || arch_.latent_size == 0) throw ContractError("SpectralGenerator: empty layer");
    nn::ParamAllocator alloc;
    std::size_t in = arch_.latent_size;
    for (const auto width : arch_.hidden) {
        layers_.emplace_back(in, width, alloc);
        in = width;
    }
    layers_.emplace_back(in, bands_, alloc);
    params_.assign(alloc.total(), 0.0);
    for (const auto& layer : layers_) layer.init(params_, weight_rng);

    latent_.resize(arch_.latent_size);
    fill_standard_normal(latent_rng, latent_);
}

std::vector<double> SpectralGenerator::run(std::vector<std::vector<double>>* activations) const {
    std::vector<double> h = latent_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (activations) activations->push_back(h);
        h = layers_[l].forward(params_, h);
        if (l + 1 < layers_.size()) nn::leaky_relu_inplace(h, arch_.leaky_slope);
    }
    return h;
}

std::vector<double> SpectralGenerator::eval() const { return run(nullptr); }

void SpectralGenerator::accumulate_gradient(std::span<const double> d_output, std::span<double> grads) const {
    if (d_output.size() != bands_) throw ContractError("SpectralGenerator: gradient size mismatch");
    if (grads.size() != params_.size()) throw ContractError("SpectralGenerator: parameter gradient size mismatch");
    std::vector<std::vector<double>> inputs;
    run(&inputs);
    std::vector<double> d(d_output.begin(), d_output.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        d = layers_[l].backward(params_, inputs[l], d, grads);
        // inputs[l] is the activated output of layer l-1
        if (l > 0) nn::leaky_relu_backward(inputs[l], d, arch_.leaky_slope);
    }
}

} // namespace hsir
