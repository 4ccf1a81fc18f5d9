#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hsir/cube.hpp"

namespace hsir {

struct SynthSpec {
    CubeDims dims{32, 32, 8};
    std::size_t rank = 3;
    double smoothness = 3.0;  // Gaussian blur std (pixels) of the abundance fields
    double contrast = 3.0;    // softmax sharpness across endmembers
    std::uint64_t seed = 0;

    void validate() const;
};

// Linear-mixture ground truth: cube = sum_r S_r o c_r with per-pixel
// abundances on the simplex and spectra in [0,1].
struct SyntheticScene {
    HSICube cube;                                // unit01
    std::vector<std::vector<double>> abundances; // R maps, I*J column-major
    std::vector<std::vector<double>> endmembers; // R spectra, length K
};

SyntheticScene make_synthetic(const SynthSpec& spec);

// Separable Gaussian blur with mirrored borders (column-major plane).
std::vector<double> gaussian_blur(const std::vector<double>& plane, std::size_t rows, std::size_t cols, double sigma);

} // namespace hsir
