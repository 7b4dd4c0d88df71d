#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>

#include "common.hpp"

using namespace chemostat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Lotka-Sharpe root for the reference kernels") {
    const auto m = testing::paper_model(2000);
    const auto t0 = std::chrono::steady_clock::now();
    const double ds = solve_lotka_sharpe(m);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(ds >= 0.47);
    CHECK(ds <= 0.49);
    CHECK(secs < 1.0);
    CHECK(std::fabs(lotka_sharpe_value(m, ds) - 1.0) < 1e-10);
    CHECK_THAT(ds, WithinAbs(testing::kDstar, 1e-6));

    double prev = lotka_sharpe_value(m, 0.0);
    for (int i = 1; i <= 20; ++i) {
        const double cur = lotka_sharpe_value(m, 0.1 * i);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("Lotka-Sharpe special cases") {
    const AgeGrid g2(2.0, 2000);
    auto zero_mu = ProfileSource::constant(0.0);
    auto one = ProfileSource::constant(1.0);
    CHECK(solve_lotka_sharpe(make_model(g2, zero_mu, ProfileSource::constant(0.5), one, 1.0)) == 0.0);

    const AgeGrid g1(1.0, 2000);
    CHECK_THAT(solve_lotka_sharpe(make_model(g1, zero_mu, ProfileSource::constant(2.0), one, 1.0)),
               WithinAbs(1.59362426004004, 1e-6));

    CHECK_THROWS_AS(solve_lotka_sharpe(make_model(g2, zero_mu, ProfileSource::constant(0.1), one, 1.0)),
                    EquilibriumError);
}

TEST_CASE("equilibrium identities") {
    const auto eq = testing::paper_equilibrium(2000, 8.0);
    CHECK(eq.profile.front() == 8.0);
    CHECK_THAT(eq.adjoint.front(), WithinAbs(1.0, 1e-6));
    CHECK(eq.adjoint.back() == 0.0);
    CHECK_THAT(quad(eq.kernel), WithinAbs(1.0, 1e-9));
    CHECK(eq.sensor_weight.min() >= 0.0);
    CHECK_THAT(quad(eq.sensor_weight), WithinAbs(1.0, 1e-12));
    CHECK_THAT(weighted_quad(eq.model.birth, eq.profile), WithinRel(eq.profile.front(), 1e-9));
    CHECK_THAT(eq.output, WithinRel(testing::kYstarM8, 1e-6));
    CHECK_THAT(eq.mean_age, WithinRel(testing::kRinv, 1e-6));
    CHECK_THAT(eq.lemma_constant, WithinRel(testing::kC1, 1e-5));

    auto ages = AgeFunction::sample(eq.model.grid, [](double a) { return a; });
    auto a_k = ages.zip(eq.model.birth, [](double a, double k) { return a * k; });
    CHECK_THAT(eq.adjoint_norm, WithinRel(weighted_quad(a_k, eq.profile), 1e-6));
}

TEST_CASE("equilibrium profile solves the stationary transport equation") {
    for (std::size_t n : {500, 1000}) {
        const auto eq = testing::paper_equilibrium(n);
        const double h = eq.model.grid.step();
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < eq.profile.size(); ++i) {
            const double slope = (eq.profile[i + 1] - eq.profile[i - 1]) / (2 * h);
            worst = std::max(worst, std::fabs(slope + (eq.model.mortality[i] + eq.dilution) * eq.profile[i]));
        }
        CHECK(worst < 50.0 * h * h);
    }
}

TEST_CASE("Lemma constant does not depend on the scale M") {
    const auto a = testing::paper_equilibrium(1000, 1.0);
    const auto b = testing::paper_equilibrium(1000, 8.0);
    CHECK_THAT(a.lemma_constant, WithinRel(b.lemma_constant, 1e-12));
    CHECK_THAT(a.dilution, WithinRel(b.dilution, 1e-15));
}

TEST_CASE("kernel certificate for the reference kernel") {
    const auto eq = testing::paper_equilibrium(2000);
    const auto cert = certify_assumption1(eq);
    CHECK(cert.rho_sigma < 0.999 + 1e-9);
    CHECK(cert.rho0 < 1.0);
    CHECK(cert.sigma > 0.0);
    CHECK_THAT(kernel_contraction(eq, cert.lambda, cert.sigma), WithinAbs(cert.rho_sigma, 1e-15));
    // Regression anchors of this discretization.
    CHECK_THAT(cert.lambda, WithinAbs(0.65, 1e-12));
    CHECK_THAT(cert.sigma, WithinAbs(0.3104, 5e-4));
    CHECK_THAT(cert.rho0, WithinAbs(0.67545, 5e-5));
    // The certified sigma is maximal: slightly beyond it the margin is lost.
    CHECK(kernel_contraction(eq, cert.lambda, cert.sigma + 1e-6) > 0.999);
}

TEST_CASE("truncated exponential kernel") {
    const AgeGrid g(2.0, 4000);
    const double beta = 1.0 / (1.0 - std::exp(-2.0));
    auto kernel = AgeFunction::sample(g, [&](double a) { return beta * std::exp(-a); });
    auto tail = tail_quad(kernel);
    auto ages = AgeFunction::sample(g, [](double a) { return a; });
    const double rinv = weighted_quad(ages, kernel);
    // With lambda = r^-1 the integrand is the constant beta e^{-A}.
    const double rho = kernel_contraction(kernel, tail, rinv, rinv, 0.0);
    CHECK_THAT(rho, WithinAbs(2.0 * std::exp(-2.0) / (1.0 - std::exp(-2.0)), 1e-6));
    const auto cert = certify_kernel(kernel, tail, rinv, default_lambda_grid());
    CHECK(cert.rho0 <= rho + 1e-6);
}

TEST_CASE("kernel concentrated in the last cell is not certified") {
    const AgeGrid g(2.0, 200);
    std::vector<double> v(g.size(), 0.0);
    v.back() = 2.0 / g.step();
    AgeFunction kernel(g, v);
    auto tail = tail_quad(kernel);
    const double rinv = weighted_quad(AgeFunction::sample(g, [](double a) { return a; }), kernel);
    for (double lambda : default_lambda_grid()) CHECK(kernel_contraction(kernel, tail, rinv, lambda, 0.0) >= 1.0);
    CHECK_THROWS_AS(certify_kernel(kernel, tail, rinv, default_lambda_grid()), EquilibriumError);
}
