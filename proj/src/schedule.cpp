#include "hsir/schedule.hpp"

#include <cmath>
#include <string>

#include "hsir/errors.hpp"

namespace hsir {

std::string_view to_string(SigmaConvention c) {
    return c == SigmaConvention::snr ? "snr" : "posterior_sqrt";
}

SigmaConvention parse_sigma_convention(std::string_view text) {
    if (text == "snr") return SigmaConvention::snr;
    if (text == "posterior_sqrt") return SigmaConvention::posterior_sqrt;
    throw ParseError("unknown sigma convention '" + std::string(text) + "'");
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas, SigmaConvention convention)
    : convention_(convention) {
    if (betas.empty()) throw ContractError("schedule: need at least one step");
    const std::size_t steps = betas.size();
    beta_.assign(steps + 1, 0.0);
    alpha_.assign(steps + 1, 1.0);
    alpha_bar_.assign(steps + 1, 1.0);
    sigma_.assign(steps + 1, 0.0);

    for (std::size_t t = 1; t <= steps; ++t) {
        const double b = betas[t - 1];
        if (!(b > 0.0 && b < 1.0)) {
            throw ContractError("schedule: beta_" + std::to_string(t) + " = " + std::to_string(b) + " not in (0,1)");
        }
        beta_[t] = b;
        alpha_[t] = 1.0 - b;
        alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
    }
    for (std::size_t t = 1; t <= steps; ++t) {
        if (convention_ == SigmaConvention::snr) {
            sigma_[t] = std::sqrt((1.0 - alpha_bar_[t]) / alpha_bar_[t]);
        } else if (t == 1) {
            // (1 - abar_0) = 0 makes the posterior expression vanish.
            sigma_[t] = std::sqrt(beta_[1]);
        } else {
            sigma_[t] = std::sqrt((1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * beta_[t]);
        }
    }
}

void DiffusionSchedule::check_step(std::size_t t) const {
    if (t >= beta_.size()) {
        throw BoundsError("schedule: step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    }
}

double DiffusionSchedule::beta(std::size_t t) const { check_step(t); return beta_[t]; }
double DiffusionSchedule::alpha(std::size_t t) const { check_step(t); return alpha_[t]; }
double DiffusionSchedule::alpha_bar(std::size_t t) const { check_step(t); return alpha_bar_[t]; }
double DiffusionSchedule::sigma(std::size_t t) const { check_step(t); return sigma_[t]; }

DiffusionSchedule make_linear_schedule(std::size_t steps, double beta_1, double beta_T, SigmaConvention convention) {
    if (steps < 2) throw ContractError("make_linear_schedule: T must be >= 2");
    if (!(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0)) {
        throw ContractError("make_linear_schedule: need 0 < beta_1 <= beta_T < 1");
    }
    std::vector<double> betas(steps);
    for (std::size_t t = 1; t <= steps; ++t) {
        betas[t - 1] = beta_1 + static_cast<double>(t - 1) / static_cast<double>(steps - 1) * (beta_T - beta_1);
    }
    betas.back() = beta_T;
    return DiffusionSchedule(std::move(betas), convention);
}

double sigma_t(const DiffusionSchedule& schedule, std::size_t t) {
    if (t < 1 || t > schedule.steps()) {
        throw BoundsError("sigma_t: step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) + "]");
    }
    return schedule.sigma(t);
}

std::vector<double> forward_perturb(std::span<const double> x0, std::size_t t, const DiffusionSchedule& schedule,
                                    Rng& rng) {
    const double ab = schedule.alpha_bar(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    std::vector<double> out(x0.size());
    fill_standard_normal(rng, out);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = signal * x0[n] + noise * out[n];
    return out;
}

} // namespace hsir
