#pragma once

#include <stdexcept>
#include <string>

namespace hsir {

// Violated precondition on an argument or object state.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Index outside its valid box.
class BoundsError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Malformed cube container, config file or sidecar.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sampler configuration that makes the initial variance negative.
class InfeasibleConfigError : public std::runtime_error {
public:
    InfeasibleConfigError(const std::string& what, double sigma_t0, double sigma_y_over_s)
        : std::runtime_error(what), sigma_t0_(sigma_t0), sigma_y_over_s_(sigma_y_over_s) {}

    double sigma_t0() const noexcept { return sigma_t0_; }
    double sigma_y_over_s() const noexcept { return sigma_y_over_s_; }

private:
    double sigma_t0_;
    double sigma_y_over_s_;
};

// Non-finite loss, gradient or iterate during restoration. step is the
// diffusion step (or ablation iteration) at which it happened.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

} // namespace hsir
