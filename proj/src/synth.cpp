#include "hsir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hsir/errors.hpp"
#include "hsir/rng.hpp"
#include "hsir/vs2m.hpp"

namespace hsir {

void SynthSpec::validate() const {
    if (rank < 1) throw ContractError("synth: rank must be >= 1");
    if (dims.rows == 0 || dims.cols == 0 || dims.bands == 0) throw ContractError("synth: dims must be positive");
    if (!(smoothness >= 0.0) || !(contrast >= 0.0)) throw ContractError("synth: smoothness and contrast must be >= 0");
}

namespace {

std::size_t mirror(std::ptrdiff_t v, std::size_t n) {
    const auto len = static_cast<std::ptrdiff_t>(n);
    if (len == 1) return 0;
    const std::ptrdiff_t period = 2 * (len - 1);
    v %= period;
    if (v < 0) v += period;
    return static_cast<std::size_t>(v < len ? v : period - v);
}

} // namespace

std::vector<double> gaussian_blur(const std::vector<double>& plane, std::size_t rows, std::size_t cols, double sigma) {
    if (sigma <= 0.0) return plane;
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        w[static_cast<std::size_t>(d + radius)] = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
        total += w[static_cast<std::size_t>(d + radius)];
    }
    for (auto& v : w) v /= total;

    std::vector<double> tmp(plane.size()), out(plane.size());
    for (std::size_t q = 0; q < cols; ++q) {
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
                acc += w[static_cast<std::size_t>(d + radius)] *
                       plane[q * rows + mirror(static_cast<std::ptrdiff_t>(r) + d, rows)];
            }
            tmp[q * rows + r] = acc;
        }
    }
    for (std::size_t q = 0; q < cols; ++q) {
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
                acc += w[static_cast<std::size_t>(d + radius)] *
                       tmp[mirror(static_cast<std::ptrdiff_t>(q) + d, cols) * rows + r];
            }
            out[q * rows + r] = acc;
        }
    }
    return out;
}

SyntheticScene make_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto& d = spec.dims;
    const std::size_t pixels = d.pixels();
    SyntheticScene scene;

    // Abundances: softmax across endmembers of smoothed, standardized noise.
    auto field_rng = make_rng(spec.seed, 0x6162756eULL);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<std::vector<double>> fields(spec.rank);
    for (auto& f : fields) {
        std::vector<double> noise(pixels);
        for (auto& v : noise) v = uniform(field_rng);
        f = gaussian_blur(noise, d.rows, d.cols, spec.smoothness);
        double mean = 0.0;
        for (const double v : f) mean += v;
        mean /= static_cast<double>(pixels);
        double var = 0.0;
        for (const double v : f) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(pixels));
        for (auto& v : f) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
    scene.abundances.assign(spec.rank, std::vector<double>(pixels));
    for (std::size_t p = 0; p < pixels; ++p) {
        double peak = -INFINITY;
        for (std::size_t r = 0; r < spec.rank; ++r) peak = std::max(peak, spec.contrast * fields[r][p]);
        double total = 0.0;
        for (std::size_t r = 0; r < spec.rank; ++r) {
            scene.abundances[r][p] = std::exp(spec.contrast * fields[r][p] - peak);
            total += scene.abundances[r][p];
        }
        for (std::size_t r = 0; r < spec.rank; ++r) scene.abundances[r][p] /= total;
    }

    // Endmembers: a few low-frequency cosines, jointly rescaled to [0,1].
    auto spectrum_rng = make_rng(spec.seed, 0x656e646dULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double span = static_cast<double>(std::max<std::size_t>(d.bands - 1, 1));
    scene.endmembers.assign(spec.rank, std::vector<double>(d.bands));
    for (auto& c : scene.endmembers) {
        double amp[3], phase[3];
        for (int h = 0; h < 3; ++h) {
            amp[h] = normal(spectrum_rng) / (h + 1);
            phase[h] = 2.0 * std::numbers::pi * uniform(spectrum_rng);
        }
        for (std::size_t k = 0; k < d.bands; ++k) {
            double v = 0.0;
            for (int h = 0; h < 3; ++h) v += amp[h] * std::cos(std::numbers::pi * (h + 1) * static_cast<double>(k) / span + phase[h]);
            c[k] = v;
        }
    }
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : scene.endmembers) {
        for (const double v : c) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    for (auto& c : scene.endmembers) {
        for (auto& v : c) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    }

    auto cube = outer_sum(d, scene.abundances, scene.endmembers);
    for (auto& v : cube) v = std::clamp(v, 0.0, 1.0);
    scene.cube = HSICube::from_doubles(d, RangeTag::unit01, cube);
    return scene;
}

} // namespace hsir
