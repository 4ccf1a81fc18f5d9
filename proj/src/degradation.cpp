#include "hsir/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsir/errors.hpp"
#include "hsir/rng.hpp"

namespace hsir {

DegradationOperator DegradationOperator::denoise(CubeDims dims) {
    if (dims.size() == 0) throw ContractError("make_denoise: dimensions must be positive");
    DegradationOperator op(Kind::denoise, dims);
    op.m_ = dims.size();
    op.singulars_.assign(op.m_, 1.0);
    return op;
}

DegradationOperator DegradationOperator::completion(CubeDims dims, std::span<const std::uint8_t> mask) {
    if (dims.size() == 0) throw ContractError("make_completion: dimensions must be positive");
    if (mask.size() != dims.size()) {
        throw ContractError("make_completion: mask has " + std::to_string(mask.size()) + " entries, cube " +
                            std::to_string(dims.size()));
    }
    DegradationOperator op(Kind::completion, dims);
    op.order_.reserve(dims.size());
    for (std::size_t n = 0; n < mask.size(); ++n) {
        if (mask[n]) op.order_.push_back(n);
    }
    op.m_ = op.order_.size();
    if (op.m_ == 0) throw ContractError("make_completion: mask observes no voxel");
    for (std::size_t n = 0; n < mask.size(); ++n) {
        if (!mask[n]) op.order_.push_back(n);
    }
    op.singulars_.assign(dims.size(), 0.0);
    std::fill_n(op.singulars_.begin(), op.m_, 1.0);
    return op;
}

DegradationOperator DegradationOperator::sr_block(CubeDims dims, std::size_t scale) {
    if (scale != 2 && scale != 4 && scale != 8) {
        throw ContractError("make_sr_block: scale must be 2, 4 or 8, got " + std::to_string(scale));
    }
    if (dims.size() == 0 || dims.rows % scale != 0 || dims.cols % scale != 0) {
        throw ContractError("make_sr_block: " + to_string(dims) + " not divisible by scale " + std::to_string(scale));
    }
    DegradationOperator op(Kind::sr_block, dims);
    op.scale_ = scale;
    op.m_ = dims.size() / (scale * scale);
    op.singulars_.assign(dims.size(), 0.0);
    std::fill_n(op.singulars_.begin(), op.m_, 1.0 / static_cast<double>(scale));
    op.block_basis_ = make_block_basis(scale);
    return op;
}

CubeDims DegradationOperator::output_dims() const {
    switch (kind_) {
    case Kind::denoise: return dims_;
    case Kind::completion: return {m_, 1, 1};
    case Kind::sr_block: return {dims_.rows / scale_, dims_.cols / scale_, dims_.bands};
    }
    return dims_;
}

void DegradationOperator::check_input(std::span<const double> x, const char* who) const {
    if (x.size() != input_size()) {
        throw ContractError(std::string(who) + ": expected length " + std::to_string(input_size()) + ", got " +
                            std::to_string(x.size()));
    }
}

void DegradationOperator::check_output(std::span<const double> y, const char* who) const {
    if (y.size() != output_size()) {
        throw ContractError(std::string(who) + ": expected length " + std::to_string(output_size()) + ", got " +
                            std::to_string(y.size()));
    }
}

// Vec index of local pixel l = dj * p + di of output block `block`.
std::size_t DegradationOperator::block_pixel(std::size_t block, std::size_t local) const {
    const std::size_t p = scale_;
    const std::size_t low_rows = dims_.rows / p;
    const std::size_t low_pixels = low_rows * (dims_.cols / p);
    const std::size_t k = block / low_pixels;
    const std::size_t rem = block % low_pixels;
    const std::size_t bj = rem / low_rows;
    const std::size_t bi = rem % low_rows;
    const std::size_t dj = local / p;
    const std::size_t di = local % p;
    return k * dims_.pixels() + (bj * p + dj) * dims_.rows + (bi * p + di);
}

std::vector<double> DegradationOperator::apply(std::span<const double> x) const {
    check_input(x, "apply");
    switch (kind_) {
    case Kind::denoise: return {x.begin(), x.end()};
    case Kind::completion: {
        std::vector<double> y(m_);
        for (std::size_t r = 0; r < m_; ++r) y[r] = x[order_[r]];
        return y;
    }
    case Kind::sr_block: {
        const std::size_t area = scale_ * scale_;
        std::vector<double> y(m_);
        for (std::size_t o = 0; o < m_; ++o) {
            double sum = 0.0;
            for (std::size_t l = 0; l < area; ++l) sum += x[block_pixel(o, l)];
            y[o] = sum / static_cast<double>(area);
        }
        return y;
    }
    }
    return {};
}

std::vector<double> DegradationOperator::apply_transpose(std::span<const double> y) const {
    check_output(y, "apply_transpose");
    switch (kind_) {
    case Kind::denoise: return {y.begin(), y.end()};
    case Kind::completion: {
        std::vector<double> x(input_size(), 0.0);
        for (std::size_t r = 0; r < m_; ++r) x[order_[r]] = y[r];
        return x;
    }
    case Kind::sr_block: {
        const std::size_t area = scale_ * scale_;
        std::vector<double> x(input_size(), 0.0);
        for (std::size_t o = 0; o < m_; ++o) {
            const double v = y[o] / static_cast<double>(area);
            for (std::size_t l = 0; l < area; ++l) x[block_pixel(o, l)] = v;
        }
        return x;
    }
    }
    return {};
}

std::vector<double> DegradationOperator::v_transform(std::span<const double> x) const {
    check_input(x, "v_transform");
    switch (kind_) {
    case Kind::denoise: return {x.begin(), x.end()};
    case Kind::completion: {
        std::vector<double> xb(x.size());
        for (std::size_t i = 0; i < xb.size(); ++i) xb[i] = x[order_[i]];
        return xb;
    }
    case Kind::sr_block: {
        const std::size_t area = scale_ * scale_;
        std::vector<double> xb(x.size());
        std::vector<double> local(area);
        for (std::size_t o = 0; o < m_; ++o) {
            for (std::size_t l = 0; l < area; ++l) local[l] = x[block_pixel(o, l)];
            for (std::size_t q = 0; q < area; ++q) {
                double acc = 0.0;
                for (std::size_t l = 0; l < area; ++l) acc += block_basis_(q, l) * local[l];
                if (q == 0) xb[o] = acc;
                else xb[m_ + o * (area - 1) + (q - 1)] = acc;
            }
        }
        return xb;
    }
    }
    return {};
}

std::vector<double> DegradationOperator::v_inverse(std::span<const double> xb) const {
    check_input(xb, "v_inverse");
    switch (kind_) {
    case Kind::denoise: return {xb.begin(), xb.end()};
    case Kind::completion: {
        std::vector<double> x(xb.size());
        for (std::size_t i = 0; i < xb.size(); ++i) x[order_[i]] = xb[i];
        return x;
    }
    case Kind::sr_block: {
        const std::size_t area = scale_ * scale_;
        std::vector<double> x(xb.size(), 0.0);
        std::vector<double> coeff(area);
        for (std::size_t o = 0; o < m_; ++o) {
            coeff[0] = xb[o];
            for (std::size_t q = 1; q < area; ++q) coeff[q] = xb[m_ + o * (area - 1) + (q - 1)];
            for (std::size_t l = 0; l < area; ++l) {
                double acc = 0.0;
                for (std::size_t q = 0; q < area; ++q) acc += block_basis_(q, l) * coeff[q];
                x[block_pixel(o, l)] = acc;
            }
        }
        return x;
    }
    }
    return {};
}

std::vector<double> DegradationOperator::ut_transform(std::span<const double> y) const {
    check_output(y, "ut_transform");
    return {y.begin(), y.end()};
}

std::vector<double> DegradationOperator::u_apply(std::span<const double> yb) const {
    check_output(yb, "u_apply");
    return {yb.begin(), yb.end()};
}

std::vector<double> DegradationOperator::sigma_pinv_ut(std::span<const double> y) const {
    const auto yt = ut_transform(y);
    std::vector<double> out(input_size(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        if (singulars_[i] > 0.0) out[i] = yt[i] / singulars_[i];
    }
    return out;
}

Eigen::MatrixXd make_block_basis(std::size_t scale) {
    const auto area = static_cast<Eigen::Index>(scale * scale);
    Eigen::MatrixXd basis(area, area);
    basis.row(0).setConstant(1.0 / static_cast<double>(scale));
    Eigen::Index filled = 1;
    for (Eigen::Index e = 0; e < area && filled < area; ++e) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(area, e);
        // Two passes of modified Gram-Schmidt keep the basis orthonormal to
        // machine precision.
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index q = 0; q < filled; ++q) v -= basis.row(q).dot(v) * basis.row(q).transpose();
        }
        const double norm = v.norm();
        if (norm < 1e-8) continue;
        basis.row(filled++) = (v / norm).transpose();
    }
    return basis;
}

std::vector<double> add_noise(std::span<const double> y, const NoiseSpec& spec) {
    if (!(spec.sigma_y >= 0.0)) throw ContractError("add_noise: sigma_y must be >= 0");
    std::vector<double> out(y.begin(), y.end());
    if (spec.sigma_y == 0.0) return out;
    auto rng = make_rng(spec.seed, 0x6e6f697365ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : out) v += spec.sigma_y * normal(rng);
    return out;
}

Eigen::MatrixXd materialize_dense(const DegradationOperator& op) {
    const std::size_t n = op.input_size();
    if (n > 4096) throw ContractError("materialize_dense: n = " + std::to_string(n) + " exceeds 4096");
    Eigen::MatrixXd h(static_cast<Eigen::Index>(op.output_size()), static_cast<Eigen::Index>(n));
    std::vector<double> e(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        e[c] = 1.0;
        const auto col = op.apply(e);
        for (std::size_t r = 0; r < col.size(); ++r) h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
        e[c] = 0.0;
    }
    return h;
}

std::vector<std::uint8_t> make_bernoulli_mask(CubeDims dims, double rate, std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) throw ContractError("mask: sampling rate must be in (0,1]");
    auto rng = make_rng(seed, 0x6d61736bULL);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<std::uint8_t> mask(dims.size());
    for (auto& m : mask) m = uniform(rng) < rate ? 1 : 0;
    return mask;
}

} // namespace hsir
