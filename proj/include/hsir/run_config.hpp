#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

#include "hsir/sampler.hpp"

namespace hsir {

enum class Task { denoise, complete, sr };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);
// T used when the config leaves it unset: 3000 / 1000 / 1000.
std::size_t default_steps(Task task);

// Flat key=value run configuration, one entry per line, '#' starts a comment.
struct RunConfig {
    Task task = Task::denoise;
    double sigma = 0.1;          // unit01 noise std; sigma_y = 2 sigma
    double rate = 0.3;           // completion sampling rate
    std::size_t scale = 2;       // super-resolution factor
    std::size_t steps = 1000;    // T
    std::size_t start_step = 500;// t0
    double eta = 0.95;
    double eta_b = 1.0;
    double beta_1 = 1e-4;
    double beta_T = 2e-3;
    SigmaConvention sigma_convention = SigmaConvention::snr;
    bool unit_scale = true;
    std::size_t endmembers = 5;
    double lr = 2e-5;            // derived from t0 and iters_per_step unless set
    std::size_t iters_per_step = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    // Keys set explicitly by the parsed text (not part of equality).
    std::set<std::string> explicit_keys;

    bool operator==(const RunConfig& other) const;

    // Switches to `t` and re-derives T, then t0 = T/2, then lr from
    // default_learning_rate, each unless it was set explicitly.
    void adopt_task(Task t);
    void validate() const;
    SamplerConfig sampler_config() const;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

} // namespace hsir
