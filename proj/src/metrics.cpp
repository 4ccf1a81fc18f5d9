#include "hsir/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hsir/errors.hpp"

namespace hsir {

double psnr_band(std::span<const double> ref, std::span<const double> est, double peak) {
    if (ref.size() != est.size() || ref.empty()) throw ContractError("psnr_band: shape mismatch");
    double sum = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) sum += (ref[n] - est[n]) * (ref[n] - est[n]);
    const double mse = sum / static_cast<double>(ref.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> ssim_window() {
    constexpr int radius = 5;
    constexpr double sigma = 1.5;
    std::vector<double> w(2 * radius + 1);
    double total = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        w[d + radius] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        total += w[d + radius];
    }
    for (auto& v : w) v /= total;
    return w;
}

namespace {

// 'valid' separable filtering of a column-major rows x cols plane.
std::vector<double> filter_valid(std::span<const double> plane, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& w) {
    const std::size_t taps = w.size();
    const std::size_t out_rows = rows - taps + 1;
    const std::size_t out_cols = cols - taps + 1;
    std::vector<double> along_rows(out_rows * cols, 0.0);
    for (std::size_t q = 0; q < cols; ++q) {
        for (std::size_t r = 0; r < out_rows; ++r) {
            double acc = 0.0;
            for (std::size_t t = 0; t < taps; ++t) acc += w[t] * plane[q * rows + r + t];
            along_rows[q * out_rows + r] = acc;
        }
    }
    std::vector<double> out(out_rows * out_cols, 0.0);
    for (std::size_t q = 0; q < out_cols; ++q) {
        for (std::size_t r = 0; r < out_rows; ++r) {
            double acc = 0.0;
            for (std::size_t t = 0; t < taps; ++t) acc += w[t] * along_rows[(q + t) * out_rows + r];
            out[q * out_rows + r] = acc;
        }
    }
    return out;
}

} // namespace

double ssim_band(std::span<const double> ref, std::span<const double> est, std::size_t rows, std::size_t cols,
                 double peak) {
    if (ref.size() != est.size() || ref.size() != rows * cols) throw ContractError("ssim_band: shape mismatch");
    const auto w = ssim_window();
    if (rows < w.size() || cols < w.size()) {
        throw ContractError("ssim_band: image " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " smaller than the 11x11 window");
    }
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    std::vector<double> xx(ref.size()), yy(ref.size()), xy(ref.size());
    for (std::size_t n = 0; n < ref.size(); ++n) {
        xx[n] = ref[n] * ref[n];
        yy[n] = est[n] * est[n];
        xy[n] = ref[n] * est[n];
    }
    const auto mu_x = filter_valid(ref, rows, cols, w);
    const auto mu_y = filter_valid(est, rows, cols, w);
    const auto e_xx = filter_valid(xx, rows, cols, w);
    const auto e_yy = filter_valid(yy, rows, cols, w);
    const auto e_xy = filter_valid(xy, rows, cols, w);

    double total = 0.0;
    for (std::size_t n = 0; n < mu_x.size(); ++n) {
        const double mx = mu_x[n], my = mu_y[n];
        const double vx = e_xx[n] - mx * mx;
        const double vy = e_yy[n] - my * my;
        const double cov = e_xy[n] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mu_x.size());
}

MetricReport evaluate(const HSICube& ref, const HSICube& est) {
    if (ref.dims() != est.dims()) {
        throw ContractError("evaluate: dims " + to_string(ref.dims()) + " vs " + to_string(est.dims()));
    }
    if (ref.range() != RangeTag::unit01 || est.range() != RangeTag::unit01) {
        throw ContractError("evaluate: both cubes must be unit01");
    }
    const auto& d = ref.dims();
    MetricReport report;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::size_t finite = 0;
    for (std::size_t k = 0; k < d.bands; ++k) {
        const auto rb = ref.band(k);
        const auto eb = est.band(k);
        const std::vector<double> r(rb.begin(), rb.end());
        const std::vector<double> e(eb.begin(), eb.end());
        const double p = psnr_band(r, e);
        const double s = ssim_band(r, e, d.rows, d.cols);
        report.band_psnr.push_back(p);
        report.band_ssim.push_back(s);
        if (std::isfinite(p)) {
            psnr_sum += p;
            ++finite;
        }
        ssim_sum += s;
    }
    report.mpsnr = finite == 0 ? std::numeric_limits<double>::infinity() : psnr_sum / static_cast<double>(finite);
    report.mssim = ssim_sum / static_cast<double>(d.bands);
    return report;
}

double psnr_cube(const HSICube& ref, const HSICube& est) {
    if (ref.dims() != est.dims()) throw ContractError("psnr_cube: dims mismatch");
    return psnr_band(ref.to_doubles(), est.to_doubles());
}

} // namespace hsir
