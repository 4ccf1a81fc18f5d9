#pragma once

// Dense reference for the structured operators: H is rebuilt from the task
// definitions and decomposed with Eigen's SVD.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hsir/degradation.hpp"

namespace hsir::testing {

// H written out from the definition of each task, without the operator's
// own transforms.
inline Eigen::MatrixXd definition_matrix(const DegradationOperator& op, std::span<const std::uint8_t> mask = {}) {
    const auto& d = op.dims();
    const std::size_t n = d.size();
    switch (op.kind()) {
    case DegradationOperator::Kind::denoise: return Eigen::MatrixXd::Identity(n, n);
    case DegradationOperator::Kind::completion: {
        std::vector<std::size_t> observed;
        for (std::size_t c = 0; c < n; ++c)
            if (mask[c]) observed.push_back(c);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(observed.size(), n);
        for (std::size_t r = 0; r < observed.size(); ++r) h(r, observed[r]) = 1.0;
        return h;
    }
    case DegradationOperator::Kind::sr_block: {
        const std::size_t p = op.scale();
        const std::size_t ib = d.rows / p, jb = d.cols / p;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ib * jb * d.bands, n);
        for (std::size_t k = 0; k < d.bands; ++k)
            for (std::size_t bj = 0; bj < jb; ++bj)
                for (std::size_t bi = 0; bi < ib; ++bi) {
                    const std::size_t row = k * ib * jb + bj * ib + bi;
                    for (std::size_t dj = 0; dj < p; ++dj)
                        for (std::size_t di = 0; di < p; ++di)
                            h(row, k * d.rows * d.cols + (bj * p + dj) * d.rows + bi * p + di) = 1.0 / (p * p);
                }
        return h;
    }
    }
    return {};
}

struct SvdComparison {
    double matrix_error = 0.0;      // materialize_dense vs definition
    double singular_error = 0.0;    // sorted singular values
    double factor_error = 0.0;      // H v_i - s_i u_i over structured factors
    double projector_error = 0.0;   // row-space projector action on random x
    double pinv_error = 0.0;        // V Sigma^+ U^T y vs dense pseudo-inverse
    double roundtrip_error = 0.0;   // v_inverse(v_transform(x)) - x
    double reconstruction_error = 0.0; // U Sigma V^T x through the transforms vs H x

    double worst_value() const { return std::max({matrix_error, singular_error}); }
    double worst_action() const {
        return std::max({factor_error, projector_error, pinv_error, roundtrip_error, reconstruction_error});
    }
};

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_eigen(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline SvdComparison compare_with_dense_svd(const DegradationOperator& op, std::span<const std::uint8_t> mask,
                                            std::uint64_t seed, int probes = 3) {
    SvdComparison out;
    const Eigen::MatrixXd h = definition_matrix(op, mask);
    const auto n = static_cast<Eigen::Index>(op.input_size());
    const auto m = static_cast<Eigen::Index>(op.output_size());
    out.matrix_error = (materialize_dense(op) - h).cwiseAbs().maxCoeff();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    std::vector<double> dense_s(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) dense_s[i] = svd.singularValues()(i);
    std::sort(dense_s.begin(), dense_s.end(), std::greater<>());
    const auto s = op.singulars();
    for (std::size_t i = 0; i < dense_s.size(); ++i) out.singular_error = std::max(out.singular_error, std::abs(dense_s[i] - s[i]));

    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10) ++rank;
    const Eigen::MatrixXd vr = svd.matrixV().leftCols(rank);
    Eigen::VectorXd sinv = Eigen::VectorXd::Zero(svd.singularValues().size());
    for (Eigen::Index i = 0; i < rank; ++i) sinv(i) = 1.0 / svd.singularValues()(i);
    const Eigen::MatrixXd pinv = svd.matrixV().leftCols(sinv.size()) * sinv.asDiagonal() *
                                 svd.matrixU().leftCols(sinv.size()).transpose();

    // Structured factors: columns of V and U obtained through the transforms;
    // H V must equal U [diag(s_1..s_m) | 0].
    Eigen::MatrixXd v_matrix(n, n), u_matrix(m, m);
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        e[i] = 1.0;
        v_matrix.col(i) = to_eigen(op.v_inverse(e));
        e[i] = 0.0;
    }
    std::vector<double> em(static_cast<std::size_t>(m), 0.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        em[i] = 1.0;
        u_matrix.col(i) = to_eigen(op.u_apply(em));
        em[i] = 0.0;
    }
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index i = 0; i < m; ++i) expected.col(i) = s[i] * u_matrix.col(i);
    out.factor_error = (h * v_matrix - expected).cwiseAbs().maxCoeff();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int probe = 0; probe < probes; ++probe) {
        std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(m));
        for (auto& v : x) v = normal(rng);
        for (auto& v : y) v = normal(rng);
        const Eigen::VectorXd ex = to_eigen(x), ey = to_eigen(y);

        auto xb = op.v_transform(x);
        const auto back = op.v_inverse(xb);
        out.roundtrip_error = std::max(out.roundtrip_error, (to_eigen(back) - ex).cwiseAbs().maxCoeff());

        std::vector<double> sx(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) sx[i] = s[i] * xb[i];
        out.reconstruction_error =
            std::max(out.reconstruction_error, (to_eigen(op.u_apply(sx)) - h * ex).cwiseAbs().maxCoeff());

        for (std::size_t i = 0; i < xb.size(); ++i)
            if (s[i] == 0.0) xb[i] = 0.0;
        const Eigen::VectorXd projected = to_eigen(op.v_inverse(xb));
        out.projector_error = std::max(out.projector_error, (projected - vr * (vr.transpose() * ex)).cwiseAbs().maxCoeff());

        const Eigen::VectorXd structured_pinv = to_eigen(op.v_inverse(op.sigma_pinv_ut(y)));
        out.pinv_error = std::max(out.pinv_error, (structured_pinv - pinv * ey).cwiseAbs().maxCoeff());
    }
    return out;
}

// Random operator of the requested kind with n <= max_n; fills mask for completion.
inline DegradationOperator random_operator(DegradationOperator::Kind kind, std::mt19937_64& rng,
                                           std::vector<std::uint8_t>& mask, std::size_t max_n = 400) {
    std::uniform_int_distribution<std::size_t> small(1, 12);
    mask.clear();
    switch (kind) {
    case DegradationOperator::Kind::denoise: {
        CubeDims d{small(rng), small(rng), small(rng)};
        while (d.size() > max_n) d.bands = std::max<std::size_t>(1, d.bands / 2);
        return DegradationOperator::denoise(d);
    }
    case DegradationOperator::Kind::completion: {
        CubeDims d{small(rng), small(rng), small(rng)};
        while (d.size() > max_n) d.bands = std::max<std::size_t>(1, d.bands / 2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double rate = 0.1 + 0.8 * u(rng);
        mask.resize(d.size());
        bool any = false;
        for (auto& v : mask) {
            v = u(rng) < rate ? 1 : 0;
            any = any || v;
        }
        if (!any) mask[0] = 1;
        return DegradationOperator::completion(d, mask);
    }
    case DegradationOperator::Kind::sr_block: {
        static const std::size_t scales[] = {2, 4, 8};
        const std::size_t p = scales[std::uniform_int_distribution<int>(0, 2)(rng)];
        std::uniform_int_distribution<std::size_t> blocks(1, p == 8 ? 2 : 4);
        CubeDims d{p * blocks(rng), p * blocks(rng), small(rng)};
        while (d.size() > max_n && d.bands > 1) d.bands = std::max<std::size_t>(1, d.bands / 2);
        return DegradationOperator::sr_block(d, p);
    }
    }
    throw std::logic_error("unknown kind");
}

} // namespace hsir::testing
