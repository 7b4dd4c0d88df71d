#include <catch_amalgamated.hpp>

#include <cmath>

#include "common.hpp"

using namespace chemostat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("trapezoid quadrature") {
    const AgeGrid g(2.0, 10);
    CHECK_THAT(quad(AgeFunction::constant(g, 1.0)), WithinRel(2.0, 1e-15));
    CHECK_THAT(quad(AgeFunction::sample(g, [](double a) { return a; })), WithinRel(2.0, 1e-15));
    const AgeGrid fine(2.0, 1000);
    CHECK_THAT(quad(AgeFunction::sample(fine, [](double a) { return a * a; })), WithinAbs(8.0 / 3.0, 1e-5));
    CHECK(weighted_quad(AgeFunction::constant(g, 0.0), AgeFunction::constant(g, 3.0)) == 0.0);
    CHECK_THAT(weighted_quad(AgeFunction::constant(g, 1.0), AgeFunction::constant(g, 1.0)), WithinRel(2.0, 1e-15));
}

TEST_CASE("quadrature is linear") {
    const AgeGrid g(2.0, 400);
    auto f = AgeFunction::sample(g, [](double a) { return std::sin(3 * a) + a; });
    auto h = AgeFunction::sample(g, [](double a) { return std::exp(-a); });
    const double alpha = 2.5, beta = -0.75;
    auto combo = f.zip(h, [&](double x, double y) { return alpha * x + beta * y; });
    CHECK_THAT(quad(combo), WithinAbs(alpha * quad(f) + beta * quad(h), 1e-13));
}

TEST_CASE("quadrature converges at second order") {
    const double exact = std::exp(2.0) - 1.0;
    double prev = 0.0;
    for (std::size_t n : {50, 100, 200, 400, 800}) {
        const double err = std::fabs(quad(AgeFunction::sample(AgeGrid(2.0, n), [](double a) { return std::exp(a); })) - exact);
        if (prev > 0.0) {
            const double order = std::log2(prev / err);
            CHECK(order >= 1.8);
            CHECK(order <= 2.2);
        }
        prev = err;
    }
}

TEST_CASE("cumulative and tail integrals") {
    const AgeGrid g(2.0, 200);
    auto f = AgeFunction::sample(g, [](double a) { return 3 * a * a; });
    auto cum = cumulative_quad(f);
    auto tail = tail_quad(f);
    CHECK(cum.front() == 0.0);
    CHECK(tail.back() == 0.0);
    CHECK_THAT(cum.back(), WithinRel(quad(f), 1e-13));
    CHECK_THAT(tail.front(), WithinRel(quad(f), 1e-13));
    for (std::size_t i = 0; i < f.size(); i += 37) CHECK_THAT(cum[i] + tail[i], WithinRel(quad(f), 1e-13));
}

TEST_CASE("renewal identity at the reference equilibrium") {
    const auto eq = testing::paper_equilibrium(2000, 8.0);
    CHECK_THAT(weighted_quad(eq.model.birth, eq.profile), WithinAbs(8.0, 1e-9));
    CHECK(eq.profile.front() == 8.0);
    // Independent oracle: Simpson's rule on the analytic profile with the continuous D*.
    const auto fine = AgeGrid(2.0, 4000);
    auto fs = AgeFunction::sample(fine, [](double a) {
        return 8.0 * std::exp(-testing::kDstar * a) * std::pow(1.0 - a / 4.0, 0.2);
    });
    CHECK_THAT(weighted_simpson(AgeFunction::sample(fine, [](double a) { return a; }), fs), WithinAbs(8.0, 1e-6));
}

TEST_CASE("p tilde") {
    const AgeGrid g(2.0, 100);
    auto zero = AgeFunction::constant(g, 0.0);
    auto one = AgeFunction::constant(g, 1.0);
    auto pt = ptilde(one, zero, zero);
    CHECK(pt.min() == 0.0);
    CHECK(pt.max() == 0.0);

    auto m = testing::paper_model(2000);
    auto ref = ptilde(m);
    CHECK_THAT(ref.front(), WithinAbs(-0.05, 1e-9));
    for (std::size_t i = 0; i < ref.size(); i += 97) {
        const double a = m.grid.node(i);
        CHECK_THAT(ref[i], WithinAbs(a / 5.0 - (1.0 + a * a / 10.0) / (20.0 - 5.0 * a), 1e-8));
    }

    auto lin = make_model(g, ProfileSource::constant(0.0), ProfileSource::constant(1.0),
                          ProfileSource::expression("a"), 1.0);
    auto pl = ptilde(lin);
    CHECK_THAT(pl.min(), WithinAbs(1.0, 1e-9));
    CHECK_THAT(pl.max(), WithinAbs(1.0, 1e-9));
}

TEST_CASE("sensor derivative of tabulated kernels") {
    const AgeGrid g(2.0, 40);
    Table t({{0.0, 1.0}, {1.0, 3.0}, {2.0, 3.0}});
    auto d = ProfileSource(t).derivative(g);
    CHECK_THAT(d[5], WithinAbs(2.0, 1e-9));
    CHECK_THAT(d[35], WithinAbs(0.0, 1e-9));
    CHECK_THAT(d.front(), WithinAbs(2.0, 1e-9));
    CHECK_THAT(t(0.5), WithinAbs(2.0, 1e-15));
    CHECK_THROWS_AS(t(2.5), ModelError);
    CHECK_THROWS_AS(Table({{0.0, 1.0}, {0.0, 2.0}}), ModelError);
}

TEST_CASE("grid and model validation") {
    CHECK_THROWS_AS(AgeGrid(2.0, 7), ModelError);
    CHECK_THROWS_AS(AgeGrid(0.0, 10), ModelError);
    CHECK_THROWS_AS(AgeFunction(AgeGrid(1.0, 8), std::vector<double>(8, 1.0)), ModelError);
    const AgeGrid g(2.0, 2000);
    auto mu = ProfileSource::expression("1/(20-5*a)");
    auto k = ProfileSource::expression("a");
    auto p = ProfileSource::expression("1 + a^2/10");
    CHECK_THROWS_AS(make_model(g, mu, ProfileSource::expression("a-1"), p, 8.0), ModelError);
    CHECK_THROWS_AS(make_model(g, mu, k, ProfileSource::constant(0.0), 8.0), ModelError);
    CHECK_THROWS_AS(make_model(g, mu, k, p, 0.0), ModelError);
    CHECK_THROWS_WITH(make_model(g, ProfileSource::expression("1/(2-a)"), k, p, 8.0),
                      Catch::Matchers::ContainsSubstring("mortality"));
}

TEST_CASE("state validation") {
    const auto eq = testing::paper_equilibrium(200);
    SimState ok{eq.profile, eq.dilution, 0.0};
    CHECK_NOTHROW(validate_state(ok, eq.model, 1e-6, false));
    std::vector<double> v(eq.profile.values().begin(), eq.profile.values().end());
    v[17] = 0.0;
    SimState bad{AgeFunction(eq.model.grid, v), eq.dilution, 0.0};
    CHECK_THROWS_AS(validate_state(bad, eq.model, 1e-6, true), ModelError);
    v[17] = 1.0;
    v[0] *= 1.5;
    SimState mismatch{AgeFunction(eq.model.grid, v), eq.dilution, 0.0};
    CHECK_THROWS_AS(validate_state(mismatch, eq.model, 1e-6, false), ModelError);
    CHECK_NOTHROW(validate_state(mismatch, eq.model, 1e-6, true));
}
