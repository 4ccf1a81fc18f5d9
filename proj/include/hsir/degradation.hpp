#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hsir/cube.hpp"

namespace hsir {

// Structured linear degradation H = U * Sigma * V^T for one restoration task.
// H is never formed; every factor is applied as an O(n) transform.
//
//   denoise     H = I.
//   completion  H selects the observed voxels in vec order. V^T moves the
//               observed coordinates to the leading block, U = I.
//   sr_block    per-band p x p block averaging. V^T maps each block to its
//               normalized mean (first m coordinates, s = 1/p) followed by
//               p^2 - 1 detail coordinates per block (s = 0), U = I.
class DegradationOperator {
public:
    enum class Kind { denoise, completion, sr_block };

    static DegradationOperator denoise(CubeDims dims);
    // mask holds 1 for observed voxels, 0 otherwise, in vec order.
    static DegradationOperator completion(CubeDims dims, std::span<const std::uint8_t> mask);
    static DegradationOperator sr_block(CubeDims dims, std::size_t scale);

    Kind kind() const { return kind_; }
    const CubeDims& dims() const { return dims_; }
    // Shape of H x laid out as a cube; completion reports m x 1 x 1.
    CubeDims output_dims() const;
    std::size_t input_size() const { return dims_.size(); }
    std::size_t output_size() const { return m_; }
    std::size_t scale() const { return scale_; }

    // s_1 >= ... >= s_n >= 0, zero past the rank.
    std::span<const double> singulars() const { return singulars_; }

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> apply_transpose(std::span<const double> y) const;
    std::vector<double> v_transform(std::span<const double> x) const;   // V^T x
    std::vector<double> v_inverse(std::span<const double> xb) const;    // V xb
    std::vector<double> ut_transform(std::span<const double> y) const;  // U^T y
    std::vector<double> u_apply(std::span<const double> yb) const;      // U yb
    // Sigma^+ U^T y, length n, zero where s_i = 0.
    std::vector<double> sigma_pinv_ut(std::span<const double> y) const;

    // Orthonormal p^2 x p^2 change of basis used by sr_block; row 0 is the
    // scaled mean vector (1/p, ..., 1/p). Local pixel index l = dj * p + di.
    const Eigen::MatrixXd& block_basis() const { return block_basis_; }
    // Original vec index of V-coordinate i (completion only).
    std::span<const std::size_t> coordinate_order() const { return order_; }

private:
    DegradationOperator(Kind kind, CubeDims dims) : kind_(kind), dims_(dims) {}

    void check_input(std::span<const double> x, const char* who) const;
    void check_output(std::span<const double> y, const char* who) const;
    std::size_t block_pixel(std::size_t block, std::size_t local) const;

    Kind kind_;
    CubeDims dims_;
    std::size_t m_ = 0;
    std::size_t scale_ = 1;
    std::vector<double> singulars_;
    std::vector<std::size_t> order_;
    Eigen::MatrixXd block_basis_;
};

// Orthonormal completion of the mean vector to a p^2 basis by Gram-Schmidt
// over the standard basis.
Eigen::MatrixXd make_block_basis(std::size_t scale);

struct NoiseSpec {
    double sigma_y = 0.0; // std in the signed11 scale; sigma = 0.5 * sigma_y in unit01
    std::uint64_t seed = 0;
};

std::vector<double> add_noise(std::span<const double> y, const NoiseSpec& spec);

// Explicit H, for test oracles. Refuses n > 4096.
Eigen::MatrixXd materialize_dense(const DegradationOperator& op);

// i.i.d. Bernoulli(rate) observation mask in vec order.
std::vector<std::uint8_t> make_bernoulli_mask(CubeDims dims, double rate, std::uint64_t seed);

} // namespace hsir
