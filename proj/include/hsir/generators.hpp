#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hsir/nn.hpp"
#include "hsir/rng.hpp"

namespace hsir {

struct SpatialArchitecture {
    std::size_t latent_channels = 8;
    std::vector<std::size_t> widths{16, 32, 64}; // one stride-2 encoder stage per entry
    std::size_t attention_reduction = 4;
    double leaky_slope = 0.2;
    // Concatenate the latent into the full-resolution decoder stage.
    bool input_skip = false;
};

struct SpectralArchitecture {
    std::size_t latent_size = 32;
    std::vector<std::size_t> hidden{64, 64};
    double leaky_slope = 0.2;
};

// Hourglass network mapping a fixed latent (C0 x I x J) to an I x J
// abundance map.
//
//   encoder  per stage: conv3x3/s2 -> instance norm -> leaky
//   decoder  per stage: nearest x2 upsample, concat skip, conv3x3 -> norm ->
//            leaky -> channel attention; the full-resolution stage takes
//            the latent as its skip only when input_skip is set
//   head     conv1x1 to one channel, linear
class SpatialGenerator {
public:
    SpatialGenerator(std::size_t rows, std::size_t cols, SpatialArchitecture arch, Rng& weight_rng, Rng& latent_rng);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    const SpatialArchitecture& architecture() const { return arch_; }

    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    const nn::FeatureMap& latent() const { return latent_; }
    // Offsets of the 1x1 output head (weights then bias).
    std::pair<std::size_t, std::size_t> head_range() const;

    struct Tape;
    // Forward pass that keeps the intermediates needed by backward().
    struct Recorded {
        std::vector<double> output;
        std::shared_ptr<const Tape> tape;
    };

    // I x J map in column-major (vec) order.
    std::vector<double> eval() const;
    Recorded record() const;
    // Adds d(loss)/d(params) into grads given d(loss)/d(output map).
    void backward(const Recorded& pass, std::span<const double> d_output, std::span<double> grads) const;
    void accumulate_gradient(std::span<const double> d_output, std::span<double> grads) const;

private:
    std::vector<double> run(Tape* tape) const;

    std::size_t rows_, cols_;
    SpatialArchitecture arch_;
    std::vector<nn::Conv2d> down_;
    std::vector<nn::InstanceNorm> down_norm_;
    std::vector<nn::Conv2d> up_;
    std::vector<nn::InstanceNorm> up_norm_;
    std::vector<nn::ChannelAttention> attention_;
    nn::Conv2d head_;
    std::vector<double> params_;
    nn::FeatureMap latent_;
};

// Fully connected network mapping a fixed latent w (N_s) to a K-band
// endmember spectrum. Hidden layers use leaky activations, output is linear.
class SpectralGenerator {
public:
    SpectralGenerator(std::size_t bands, SpectralArchitecture arch, Rng& weight_rng, Rng& latent_rng);

    std::size_t bands() const { return bands_; }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    std::span<const double> latent() const { return latent_; }

    std::vector<double> eval() const;
    void accumulate_gradient(std::span<const double> d_output, std::span<double> grads) const;

private:
    std::vector<double> run(std::vector<std::vector<double>>* activations) const;

    std::size_t bands_;
    SpectralArchitecture arch_;
    std::vector<nn::Dense> layers_;
    std::vector<double> params_;
    std::vector<double> latent_;
};

} // namespace hsir
