#include <doctest.h>

#include <cmath>

#include "hsir/errors.hpp"
#include "hsir/schedule.hpp"
#include "oracles/oracle_values.hpp"

using namespace hsir;
using doctest::Approx;

TEST_CASE("linear schedule endpoints") {
    const auto s = make_linear_schedule(1000, 1e-4, 2e-3, SigmaConvention::posterior_sqrt);
    CHECK(s.steps() == 1000);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(1000) == 2e-3);
    CHECK(s.beta(500) == Approx(1e-4 + (499.0 / 999.0) * 1.9e-3).epsilon(1e-14));
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.sigma(0) == 0.0);
}

TEST_CASE("linear schedule rejects bad parameters") {
    CHECK_THROWS_AS(make_linear_schedule(1, 1e-4, 2e-3), ContractError);
    CHECK_THROWS_AS(make_linear_schedule(10, 0.0, 2e-3), ContractError);
    CHECK_THROWS_AS(make_linear_schedule(10, 3e-3, 2e-3), ContractError);
    CHECK_THROWS_AS(make_linear_schedule(10, 1e-4, 1.0), ContractError);
    CHECK_THROWS_AS(DiffusionSchedule({0.1, 1.0}, SigmaConvention::snr), ContractError);
}

TEST_CASE("alpha_bar products") {
    const DiffusionSchedule s({0.1, 0.2, 0.3}, SigmaConvention::snr);
    CHECK(s.alpha_bar(3) == Approx(0.504).epsilon(1e-14));
    CHECK(s.alpha(2) == Approx(0.8));

    const auto paper = make_linear_schedule(1000, 1e-4, 2e-3);
    CHECK(paper.alpha_bar(1000) == Approx(oracle::paper_alpha_bar_1000).epsilon(1e-12));
    CHECK(paper.alpha_bar(500) == Approx(oracle::paper_alpha_bar_500).epsilon(1e-12));
}

TEST_CASE("sigma conventions") {
    const DiffusionSchedule one({0.5}, SigmaConvention::snr);
    CHECK(sigma_t(one, 1) == Approx(1.0).epsilon(1e-15));

    const DiffusionSchedule two({0.1, 0.2}, SigmaConvention::posterior_sqrt);
    CHECK(sigma_t(two, 1) == Approx(std::sqrt(0.1)).epsilon(1e-15)); // clamped
    CHECK(sigma_t(two, 2) == Approx(oracle::posterior_sigma_2_two_step).epsilon(1e-13));

    const auto paper_post = make_linear_schedule(1000, 1e-4, 2e-3, SigmaConvention::posterior_sqrt);
    const auto paper_snr = make_linear_schedule(1000, 1e-4, 2e-3, SigmaConvention::snr);
    CHECK(sigma_t(paper_post, 500) == Approx(oracle::paper_posterior_sigma_500).epsilon(1e-11));
    CHECK(sigma_t(paper_snr, 500) == Approx(oracle::paper_snr_sigma_500).epsilon(1e-12));

    const auto small = make_linear_schedule(200, 1e-4, 2e-3, SigmaConvention::snr);
    CHECK(sigma_t(small, 100) == Approx(oracle::t200_snr_sigma_100).epsilon(1e-12));
    CHECK(sigma_t(small, 1) == Approx(oracle::t200_snr_sigma_1).epsilon(1e-12));

    CHECK_THROWS_AS(sigma_t(paper_snr, 0), BoundsError);
    CHECK_THROWS_AS(sigma_t(paper_snr, 1001), BoundsError);
}

TEST_CASE("schedule invariants") {
    for (const auto conv : {SigmaConvention::posterior_sqrt, SigmaConvention::snr}) {
        for (const double beta_T : {2e-3, 5e-3, 2e-2}) {
            const auto s = make_linear_schedule(1000, 1e-4, beta_T, conv);
            for (std::size_t t = 1; t <= s.steps(); ++t) {
                CHECK(s.beta(t) > 0.0);
                CHECK(s.beta(t) < 1.0);
                if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
                CHECK(s.alpha_bar(t) == Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-12));
                CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
                CHECK(s.alpha_bar(t) > 0.0);
                CHECK(s.sigma(t) > 0.0);
                // The posterior convention's clamped sigma_1 sits above sigma_2, so
                // monotonicity is checked from t = 2 there.
                const std::size_t first = conv == SigmaConvention::posterior_sqrt ? 3 : 2;
                if (t >= first) CHECK(s.sigma(t) >= s.sigma(t - 1));
            }
        }
    }
}

TEST_CASE("forward_perturb") {
    const DiffusionSchedule clean({1e-12, 0.3}, SigmaConvention::snr);
    Rng rng(1);
    const std::vector<double> x0{0.3, -0.7, 0.1};
    const auto same = forward_perturb(x0, 1, clean, rng);
    for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == Approx(x0[i]).epsilon(1e-5));

    const auto s = make_linear_schedule(1000, 1e-4, 2e-3);
    const std::size_t n = 100000;
    const std::size_t t = 700;
    std::vector<double> zeros(n, 0.0);
    Rng r2(42);
    const auto out = forward_perturb(zeros, t, s, r2);
    double mean = 0.0;
    for (const double v : out) mean += v;
    mean /= n;
    double var = 0.0;
    for (const double v : out) var += (v - mean) * (v - mean);
    var /= (n - 1);
    const double target = 1.0 - s.alpha_bar(t);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(target / n));
    CHECK(std::abs(var - target) < 3.0 * target * std::sqrt(2.0 / (n - 1)));

    // fixed x0: per-coordinate mean over repeated draws
    const std::vector<double> one{0.8};
    Rng r3(7);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += forward_perturb(one, t, s, r3)[0];
    CHECK(std::abs(acc / n - std::sqrt(s.alpha_bar(t)) * 0.8) < 3.0 * std::sqrt(target / n));

    Rng a(5), b(5);
    CHECK(forward_perturb(x0, 10, s, a) == forward_perturb(x0, 10, s, b));
    CHECK_THROWS_AS(forward_perturb(x0, 1001, s, a), BoundsError);
}
