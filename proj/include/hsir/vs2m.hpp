#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hsir/cube.hpp"
#include "hsir/generators.hpp"

namespace hsir {

// R independent (spatial, spectral) generator pairs whose outer products sum
// to a cube: x = vec(sum_r S_r o c_r), (S o c)(i,j,k) = S(i,j) * c(k).
class VS2MModel {
public:
    // Weights: fan-in scaled uniform. Latents: z ~ U[0, 0.1], w ~ N(0, 1).
    // Every generator draws from its own substream of `seed`.
    static VS2MModel init(CubeDims dims, std::size_t endmembers, std::uint64_t seed,
                          const SpatialArchitecture& spatial_arch = {},
                          const SpectralArchitecture& spectral_arch = {});

    const CubeDims& dims() const { return dims_; }
    std::size_t endmembers() const { return spatial_.size(); }

    const SpatialGenerator& spatial(std::size_t r) const { return spatial_.at(r); }
    SpatialGenerator& spatial(std::size_t r) { return spatial_.at(r); }
    const SpectralGenerator& spectral(std::size_t r) const { return spectral_.at(r); }
    SpectralGenerator& spectral(std::size_t r) { return spectral_.at(r); }

    // Parameter blocks in traversal order: spatial 0..R-1, then spectral 0..R-1.
    std::size_t block_count() const { return 2 * endmembers(); }
    std::span<const double> block(std::size_t b) const;
    std::span<double> block(std::size_t b);
    std::size_t parameter_count() const;

private:
    CubeDims dims_;
    std::vector<SpatialGenerator> spatial_;
    std::vector<SpectralGenerator> spectral_;
};

// vec(sum_r maps[r] o spectra[r]); maps are I*J column-major, spectra length K.
std::vector<double> outer_sum(const CubeDims& dims, std::span<const std::vector<double>> maps,
                              std::span<const std::vector<double>> spectra);

std::vector<double> compose(const VS2MModel& model);

// ||x_t - a_t * compose(model)||^2
double loss(const VS2MModel& model, std::span<const double> x_t, double a_t);

// d(loss)/d(parameters), one vector per parameter block.
struct ModelGradient {
    std::vector<std::vector<double>> blocks;
    double loss = 0.0;
};

ModelGradient gradient(const VS2MModel& model, std::span<const double> x_t, double a_t);

// A differentiable objective on the composed cube: returns the loss and
// writes d(loss)/d(cube) into the second argument.
using CubeObjective = std::function<double(std::span<const double> cube, std::span<double> d_cube)>;

ModelGradient gradient(const VS2MModel& model, const CubeObjective& objective);

struct FitConfig {
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t iters_per_step = 10;

    // learning_rate >= 0 (0 freezes the model), iters_per_step >= 1.
    void validate() const;
};

// First/second moments per parameter block plus the update count. Carried
// across diffusion steps together with the parameters.
struct AdamState {
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    std::uint64_t updates = 0;

    bool matches(const VS2MModel& model) const;
    static AdamState fresh(const VS2MModel& model);
};

struct FitReport {
    double first_loss = 0.0; // before the first update
    double last_loss = 0.0;  // before the last update
};

// cfg.iters_per_step Adam updates of every parameter on the objective.
// Throws NumericError (carrying the iteration index) on a non-finite loss or
// gradient. An empty AdamState is initialized in place.
FitReport fit(VS2MModel& model, std::span<const double> x_t, double a_t, const FitConfig& cfg, AdamState& state);
FitReport fit(VS2MModel& model, const CubeObjective& objective, const FitConfig& cfg, AdamState& state);

void adam_update(VS2MModel& model, const ModelGradient& grad, const FitConfig& cfg, AdamState& state);

// FNV-1a over all parameter bytes in traversal order.
std::uint64_t parameter_hash(const VS2MModel& model);
// FNV-1a over all latent bytes.
std::uint64_t latent_hash(const VS2MModel& model);

// Debug checkpoint: header line + float32 parameters in traversal order.
void save_checkpoint(const VS2MModel& model, const std::filesystem::path& path);
// Loads parameters into a model of identical layout.
void load_checkpoint(VS2MModel& model, const std::filesystem::path& path);

} // namespace hsir
