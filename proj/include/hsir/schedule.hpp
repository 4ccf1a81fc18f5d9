#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hsir/rng.hpp"

namespace hsir {

// How the per-step noise scale sigma_t is derived from the beta table.
//   posterior_sqrt: sigma_t = sqrt((1 - abar_{t-1}) / (1 - abar_t) * beta_t), sigma_1 = sqrt(beta_1)
//   snr:            sigma_t = sqrt((1 - abar_t) / abar_t)
enum class SigmaConvention { posterior_sqrt, snr };

std::string_view to_string(SigmaConvention c);
SigmaConvention parse_sigma_convention(std::string_view text);

// Noise schedule tables indexed by step t in [0, T]; entry 0 is the
// clean-data convention (beta_0 = 0, abar_0 = 1, sigma_0 = 0).
class DiffusionSchedule {
public:
    // Arbitrary beta_1..beta_T table, each in (0,1).
    DiffusionSchedule(std::vector<double> betas, SigmaConvention convention);

    std::size_t steps() const { return beta_.size() - 1; }
    SigmaConvention convention() const { return convention_; }

    double beta(std::size_t t) const;
    double alpha(std::size_t t) const;
    double alpha_bar(std::size_t t) const;
    double sigma(std::size_t t) const;

private:
    void check_step(std::size_t t) const;

    SigmaConvention convention_;
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
    std::vector<double> sigma_;
};

// beta_t = beta_1 + (t-1)/(T-1) * (beta_T - beta_1).
DiffusionSchedule make_linear_schedule(std::size_t steps, double beta_1, double beta_T,
                                       SigmaConvention convention = SigmaConvention::snr);

double sigma_t(const DiffusionSchedule& schedule, std::size_t t);

// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_perturb(std::span<const double> x0, std::size_t t, const DiffusionSchedule& schedule,
                                    Rng& rng);

} // namespace hsir
