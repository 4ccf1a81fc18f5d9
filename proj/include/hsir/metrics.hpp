#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsir/cube.hpp"

namespace hsir {

// 10 log10(peak^2 / MSE); +infinity when MSE = 0.
double psnr_band(std::span<const double> ref, std::span<const double> est, double peak = 1.0);

// Mean SSIM over all valid 11x11 windows (Gaussian weights, sigma 1.5),
// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Bands are rows x cols,
// column-major; both sides must be >= 11.
double ssim_band(std::span<const double> ref, std::span<const double> est, std::size_t rows, std::size_t cols,
                 double peak = 1.0);

// Normalized 11-tap Gaussian, sigma 1.5.
std::vector<double> ssim_window();

struct MetricReport {
    double mpsnr = 0.0;
    double mssim = 0.0;
    std::vector<double> band_psnr;
    std::vector<double> band_ssim;
};

// Band-wise PSNR/SSIM and their arithmetic means. Infinite band PSNRs are
// left out of the mean; mpsnr is +infinity only when every band is.
MetricReport evaluate(const HSICube& ref, const HSICube& est);

// Single PSNR from the MSE over all voxels.
double psnr_cube(const HSICube& ref, const HSICube& est);

} // namespace hsir
