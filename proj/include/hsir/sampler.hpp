#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hsir/degradation.hpp"
#include "hsir/rng.hpp"
#include "hsir/schedule.hpp"
#include "hsir/vs2m.hpp"

namespace hsir {

struct SamplerConfig {
    std::size_t steps = 1000;      // T
    std::size_t start_step = 500;  // t0
    double eta = 0.95;
    double eta_b = 1.0;
    double sigma_y = 0.0;          // observation noise std, signed11 scale
    double beta_1 = 1e-4;
    double beta_T = 2e-3;
    SigmaConvention sigma_convention = SigmaConvention::snr;
    // true: fit x_{t+1} ~ compose(model); false: x_{t+1} ~ sqrt(abar_{t+1}) * compose(model).
    bool unit_scale = true;
    std::size_t endmembers = 5;    // R
    FitConfig fit;
    SpatialArchitecture spatial;
    SpectralArchitecture spectral;
    std::uint64_t seed = 0;

    // Range checks; feasibility against an operator is checked by init_state.
    void validate() const;
    DiffusionSchedule schedule() const;
    // Coefficient a in ||x_t - a * compose||^2 for an iterate at step t.
    double signal_scale(const DiffusionSchedule& schedule, std::size_t t) const;
};

// Adam step size that keeps the total update path lr * t0 * iters_per_step at
// 0.1, so longer chains track their iterates more slowly. 1e-4 at t0 = 100
// and 10 iterations per step.
double default_learning_rate(std::size_t start_step, std::size_t iters_per_step);

// Which branch of the per-coordinate posterior applies.
enum class StepCase : int { unobserved = 1, noise_dominated = 2, diffusion_dominated = 3 };

// 1 iff s = 0; 2 iff s > 0 and sigma_t < sigma_y / s; otherwise 3 (ties go to 3).
StepCase case_select(double singular, double sigma_t, double sigma_y);

struct CaseCounts {
    std::uint64_t unobserved = 0;
    std::uint64_t noise_dominated = 0;
    std::uint64_t diffusion_dominated = 0;
};

// The diffusion chain in V-coordinates.
struct SamplerState {
    std::size_t t = 0;
    std::vector<double> xbar;  // current iterate V^T x_t
    std::vector<double> ybar;  // Sigma^+ U^T y
    Rng rng;
    CaseCounts counts;
};

struct Gaussian {
    double mean = 0.0;
    double variance = 0.0;
};

// Per-coordinate distribution of the initial iterate:
//   s > 0: N(ybar, sigma_t0^2 - sigma_y^2 / s^2),   s = 0: N(0, sigma_t0^2).
Gaussian initial_distribution(double singular, double ybar, double sigma_t0, double sigma_y);

// Per-coordinate distribution of x_t given x_{t+1} and the generator
// estimate (all in V-coordinates). sigma_next is the noise level of x_{t+1}.
Gaussian step_distribution(StepCase which, double singular, double xbar_next, double ybar, double xpred,
                           double sigma_t, double sigma_next, double sigma_y, double eta, double eta_b);

// Throws InfeasibleConfigError if any s_i > 0 has sigma_t0 < sigma_y / s_i.
SamplerState init_state(const DegradationOperator& op, std::span<const double> y, const SamplerConfig& cfg,
                        const DiffusionSchedule& schedule);

// Samples x_{t-1} from the current x_t and the estimate x_pred (original
// coordinates); decrements state.t and updates the branch counters.
void reverse_step(SamplerState& state, std::span<const double> x_pred, const DegradationOperator& op,
                  const SamplerConfig& cfg, const DiffusionSchedule& schedule);

struct Progress {
    std::size_t t = 0;
    double loss = 0.0;
    double elapsed_seconds = 0.0;
};
using ProgressFn = std::function<void(const Progress&)>;

// Algorithm driver: one fit + compose + reverse_step per call to step().
class Restorer {
public:
    Restorer(const DegradationOperator& op, std::span<const double> y, const SamplerConfig& cfg);

    bool done() const { return state_.t <= 1; }
    // Fits the carried model to the current iterate and samples the next one.
    // Returns the last fit loss.
    double step();

    const SamplerState& state() const { return state_; }
    const VS2MModel& model() const { return model_; }
    const AdamState& optimizer() const { return adam_; }
    const DiffusionSchedule& schedule() const { return schedule_; }
    // Current iterate in original coordinates, clamped to [-1, 1].
    std::vector<double> result() const;

private:
    const DegradationOperator* op_;
    SamplerConfig cfg_;
    DiffusionSchedule schedule_;
    SamplerState state_;
    VS2MModel model_;
    AdamState adam_;
};

struct RestoreResult {
    std::vector<double> x;  // signed11, clamped
    CaseCounts counts;
    double final_loss = 0.0;
    VS2MModel model;        // generators after the last update
};

RestoreResult restore(std::span<const double> y, const DegradationOperator& op, const SamplerConfig& cfg,
                      const ProgressFn& progress = {});

// Fits the generators directly to y through H (no diffusion chain) for
// `total_iterations` Adam updates (default T * iters_per_step).
RestoreResult restore_no_diffusion(std::span<const double> y, const DegradationOperator& op,
                                   const SamplerConfig& cfg, std::optional<std::size_t> total_iterations = {},
                                   const ProgressFn& progress = {});

// Number of Adam updates restore() performs: (t0 - 1) * iters_per_step.
std::size_t restore_update_count(const SamplerConfig& cfg);

} // namespace hsir
