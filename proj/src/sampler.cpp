#include "hsir/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "hsir/errors.hpp"

namespace hsir {

void SamplerConfig::validate() const {
    if (steps < 2) throw ContractError("sampler: T must be >= 2");
    if (start_step < 1 || start_step >= steps) throw ContractError("sampler: need 1 <= t0 < T");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ContractError("sampler: eta must lie in [0,1]");
    if (!(eta_b >= 0.0 && eta_b <= 1.0)) throw ContractError("sampler: eta_b must lie in [0,1]");
    if (!(sigma_y >= 0.0) || !std::isfinite(sigma_y)) throw ContractError("sampler: sigma_y must be >= 0");
    if (endmembers < 1) throw ContractError("sampler: R must be >= 1");
    fit.validate();
}

DiffusionSchedule SamplerConfig::schedule() const {
    return make_linear_schedule(steps, beta_1, beta_T, sigma_convention);
}

double SamplerConfig::signal_scale(const DiffusionSchedule& schedule, std::size_t t) const {
    return unit_scale ? 1.0 : std::sqrt(schedule.alpha_bar(t));
}

double default_learning_rate(std::size_t start_step, std::size_t iters_per_step) {
    if (start_step == 0 || iters_per_step == 0) throw ContractError("default_learning_rate: need t0 >= 1 and iters >= 1");
    return 0.1 / static_cast<double>(start_step * iters_per_step);
}

StepCase case_select(double singular, double sigma_t, double sigma_y) {
    if (singular < 0.0) throw ContractError("case_select: negative singular value");
    if (singular == 0.0) return StepCase::unobserved;
    return sigma_t < sigma_y / singular ? StepCase::noise_dominated : StepCase::diffusion_dominated;
}

Gaussian initial_distribution(double singular, double ybar, double sigma_t0, double sigma_y) {
    if (singular > 0.0) {
        const double level = sigma_y / singular;
        return {ybar, sigma_t0 * sigma_t0 - level * level};
    }
    return {0.0, sigma_t0 * sigma_t0};
}

Gaussian step_distribution(StepCase which, double singular, double xbar_next, double ybar, double xpred,
                           double sigma_t, double sigma_next, double sigma_y, double eta, double eta_b) {
    const double history = std::sqrt(1.0 - eta * eta) * sigma_t;
    switch (which) {
    case StepCase::unobserved:
        return {xpred + history * (xbar_next - xpred) / sigma_next, eta * eta * sigma_t * sigma_t};
    case StepCase::noise_dominated: {
        const double level = sigma_y / singular;
        return {xpred + history * (ybar - xpred) / level, eta * eta * sigma_t * sigma_t};
    }
    case StepCase::diffusion_dominated: {
        const double level = sigma_y / singular;
        return {(1.0 - eta_b) * xpred + eta_b * ybar, sigma_t * sigma_t - level * level * eta_b * eta_b};
    }
    }
    return {};
}

SamplerState init_state(const DegradationOperator& op, std::span<const double> y, const SamplerConfig& cfg,
                        const DiffusionSchedule& schedule) {
    cfg.validate();
    if (y.size() != op.output_size()) {
        throw ContractError("init_state: observation has " + std::to_string(y.size()) + " values, operator expects " +
                            std::to_string(op.output_size()));
    }
    for (const double v : y) {
        if (!std::isfinite(v)) throw ContractError("init_state: observation is not finite");
    }
    const double sigma_t0 = schedule.sigma(cfg.start_step);
    const auto s = op.singulars();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] > 0.0 && sigma_t0 < cfg.sigma_y / s[i]) {
            throw InfeasibleConfigError("infeasible start: sigma_t0 = " + std::to_string(sigma_t0) +
                                            " < sigma_y / s_" + std::to_string(i) + " = " +
                                            std::to_string(cfg.sigma_y / s[i]) + " (s_i = " + std::to_string(s[i]) +
                                            ")",
                                        sigma_t0, cfg.sigma_y / s[i]);
        }
    }

    SamplerState state;
    state.t = cfg.start_step;
    state.rng = make_rng(cfg.seed, 0x636861696eULL);
    state.ybar = op.sigma_pinv_ut(y);
    state.xbar.resize(op.input_size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < state.xbar.size(); ++i) {
        const auto g = initial_distribution(s[i], state.ybar[i], sigma_t0, cfg.sigma_y);
        state.xbar[i] = g.mean + std::sqrt(std::max(g.variance, 0.0)) * normal(state.rng);
    }
    return state;
}

void reverse_step(SamplerState& state, std::span<const double> x_pred, const DegradationOperator& op,
                  const SamplerConfig& cfg, const DiffusionSchedule& schedule) {
    if (state.t < 1) throw ContractError("reverse_step: chain already at t = 0");
    if (x_pred.size() != op.input_size()) throw ContractError("reverse_step: estimate has wrong length");
    for (const double v : x_pred) {
        if (!std::isfinite(v)) throw NumericError("reverse_step: non-finite estimate", static_cast<long>(state.t));
    }
    const auto xbar_pred = op.v_transform(x_pred);
    const std::size_t t = state.t - 1;
    const double sigma_t = schedule.sigma(t);
    const double sigma_next = schedule.sigma(state.t);
    const auto s = op.singulars();

    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < state.xbar.size(); ++i) {
        const StepCase which = case_select(s[i], sigma_t, cfg.sigma_y);
        switch (which) {
        case StepCase::unobserved: ++state.counts.unobserved; break;
        case StepCase::noise_dominated: ++state.counts.noise_dominated; break;
        case StepCase::diffusion_dominated: ++state.counts.diffusion_dominated; break;
        }
        const auto g = step_distribution(which, s[i], state.xbar[i], state.ybar[i], xbar_pred[i], sigma_t, sigma_next,
                                         cfg.sigma_y, cfg.eta, cfg.eta_b);
        state.xbar[i] = g.mean + std::sqrt(std::max(g.variance, 0.0)) * normal(state.rng);
    }
    state.t = t;
}

// ---------------------------------------------------------------------------

Restorer::Restorer(const DegradationOperator& op, std::span<const double> y, const SamplerConfig& cfg)
    : op_(&op), cfg_(cfg), schedule_(cfg.schedule()), state_(init_state(op, y, cfg, schedule_)),
      model_(VS2MModel::init(op.dims(), cfg.endmembers, substream_seed(cfg.seed, 0x6d6f64656cULL), cfg.spatial,
                             cfg.spectral)),
      adam_(AdamState::fresh(model_)) {}

double Restorer::step() {
    if (done()) throw ContractError("Restorer: chain already finished");
    const std::size_t current = state_.t;
    const auto x_current = op_->v_inverse(state_.xbar);
    FitReport report;
    try {
        report = fit(model_, x_current, cfg_.signal_scale(schedule_, current), cfg_.fit, adam_);
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " during diffusion step", static_cast<long>(current));
    }
    const auto x_pred = compose(model_);
    reverse_step(state_, x_pred, *op_, cfg_, schedule_);
    return report.last_loss;
}

std::vector<double> Restorer::result() const {
    auto x = op_->v_inverse(state_.xbar);
    for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
    return x;
}

RestoreResult restore(std::span<const double> y, const DegradationOperator& op, const SamplerConfig& cfg,
                      const ProgressFn& progress) {
    const auto start = std::chrono::steady_clock::now();
    Restorer run(op, y, cfg);
    RestoreResult out;
    while (!run.done()) {
        out.final_loss = run.step();
        if (progress) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            progress({run.state().t, out.final_loss, elapsed.count()});
        }
    }
    out.x = run.result();
    out.counts = run.state().counts;
    out.model = run.model();
    return out;
}

std::size_t restore_update_count(const SamplerConfig& cfg) {
    return (cfg.start_step - 1) * cfg.fit.iters_per_step;
}

RestoreResult restore_no_diffusion(std::span<const double> y, const DegradationOperator& op, const SamplerConfig& cfg,
                                   std::optional<std::size_t> total_iterations, const ProgressFn& progress) {
    cfg.validate();
    if (y.size() != op.output_size()) throw ContractError("restore_no_diffusion: observation has wrong length");
    const std::size_t total = total_iterations.value_or(cfg.steps * cfg.fit.iters_per_step);
    if (total < 1) throw ContractError("restore_no_diffusion: need at least one iteration");

    auto model = VS2MModel::init(op.dims(), cfg.endmembers, substream_seed(cfg.seed, 0x6d6f64656cULL), cfg.spatial,
                                 cfg.spectral);
    auto adam = AdamState::fresh(model);
    const CubeObjective objective = [&](std::span<const double> cube, std::span<double> d_cube) {
        auto residual = op.apply(cube);
        double sum = 0.0;
        for (std::size_t r = 0; r < residual.size(); ++r) {
            residual[r] -= y[r];
            sum += residual[r] * residual[r];
            residual[r] *= 2.0;
        }
        const auto back = op.apply_transpose(residual);
        std::copy(back.begin(), back.end(), d_cube.begin());
        return sum;
    };

    const auto start = std::chrono::steady_clock::now();
    RestoreResult out;
    std::size_t done = 0;
    while (done < total) {
        FitConfig chunk = cfg.fit;
        chunk.iters_per_step = std::min(cfg.fit.iters_per_step, total - done);
        try {
            out.final_loss = fit(model, objective, chunk, adam).last_loss;
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " during direct fit", static_cast<long>(done + e.step()));
        }
        done += chunk.iters_per_step;
        if (progress) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            progress({total - done, out.final_loss, elapsed.count()});
        }
    }
    out.x = compose(model);
    for (auto& v : out.x) v = std::clamp(v, -1.0, 1.0);
    out.model = std::move(model);
    return out;
}

} // namespace hsir
