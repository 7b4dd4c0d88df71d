#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "common.hpp"

using namespace chemostat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const DilutionInterval kBox{0.1, 1.5};

const Equilibrium& eq8() {
    static const Equilibrium eq = testing::paper_equilibrium(2000, 8.0);
    return eq;
}

// Equilibrium with constant p = 1 and mu = 0.1 and a birth rate tuned so D* = 0.4.
const Equilibrium& const_eq() {
    static const Equilibrium eq = [] {
        const double mu = 0.1, ds = 0.4, A = 2.0;
        const double k = (mu + ds) / (1.0 - std::exp(-(mu + ds) * A));
        const AgeGrid g(A, 2000);
        return build_equilibrium(make_model(g, ProfileSource::constant(mu), ProfileSource::constant(k),
                                            ProfileSource::constant(1.0), 5.0));
    }();
    return eq;
}

SimState at(const AgeFunction& f, double d) { return testing::state_of(f, d); }

}  // namespace

TEST_CASE("every law vanishes at the equilibrium") {
    const auto& eq = eq8();
    const auto s = at(eq.profile, eq.dilution);
    CHECK(std::fabs(control(BackstepFull{1, 2}, s, eq)) < 1e-6);
    CHECK(std::fabs(control(RelaxedOutput{1, 2}, s, eq)) < 1e-14);
    CHECK(std::fabs(control(SafetyFiltered{1, 2, 1}, s, eq)) < 1e-6);
    CHECK(std::fabs(control(ConstrainedOutput{1, 10, 1, kBox}, s, eq)) < 1e-14);
    CHECK(std::fabs(control(PositiveOnly{1, 2, 1}, s, eq)) < 1e-14);
    CHECK(std::fabs(control(LyapFullState{1, 1, 1}, s, eq)) < 1e-12);
    CHECK(std::fabs(control(LyapFullStateBounded{1, 1, 1, kBox}, s, eq)) < 1e-12);
    const auto& ce = const_eq();
    CHECK(std::fabs(control(BackstepConstPMu{1, 2}, at(ce.profile, ce.dilution), ce)) < 1e-6);
}

TEST_CASE("backstepping law") {
    const auto& eq = eq8();
    for (double k1 : {0.5, 1.0, 3.0}) {
        const double u = u_backstep_full(at(eq.profile, eq.dilution + 0.5), eq, BackstepFull{k1, 2.0});
        CHECK_THAT(u, WithinAbs(-(k1 + 2.0) * 0.5, 1e-5));
    }
    // Initial state of the reference scenario with D(0) = D*.
    const double b_over_y = -3.269197821388789 / testing::kY0;
    const double expected = -testing::kDstar - b_over_y + 2.0 * std::log(testing::kY0 / testing::kYstarM8);
    const auto f0 = testing::paper_initial(eq);
    CHECK_THAT(u_backstep_full(at(f0, eq.dilution), eq, BackstepFull{1, 2}), WithinAbs(expected, 1e-5));
}

TEST_CASE("constant sensor and mortality specialisation") {
    const auto& ce = const_eq();
    CHECK_THAT(ce.dilution, WithinAbs(0.4, 1e-6));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dil(-0.5, 2.0);
    for (int i = 0; i < 50; ++i) {
        const auto s = at(testing::random_admissible(ce, rng), dil(rng));
        const double full = u_backstep_full(s, ce, BackstepFull{1.3, 0.7});
        const double cp = u_backstep_const_pmu(s, ce, BackstepConstPMu{1.3, 0.7});
        REQUIRE_THAT(cp, WithinAbs(full, 1e-10 * (1.0 + std::fabs(full))));
    }
    // f(A) = f(0), D = D*, y = y*: u = -k1 (D* + mu).
    std::vector<double> flat(ce.model.grid.size(), ce.output / ce.model.grid.length());
    const auto s = at(AgeFunction(ce.model.grid, flat), ce.dilution);
    CHECK_THAT(u_backstep_const_pmu(s, ce, BackstepConstPMu{2.0, 5.0}), WithinAbs(-2.0 * (0.4 + 0.1), 1e-5));
    CHECK_THROWS_AS(u_backstep_const_pmu(at(eq8().profile, 0.5), eq8(), BackstepConstPMu{1, 2}), ControllerError);
    CHECK_THROWS_AS(validate(BackstepConstPMu{1, 2}, eq8()), ControllerError);
}

TEST_CASE("relaxed output law") {
    const auto& eq = eq8();
    // D - D* = 0.5 and ln(y/y*) = 0.2.
    const auto f = eq.profile.map([](double v) { return v * std::exp(0.2); });
    CHECK_THAT(u_relaxed_output(at(f, eq.dilution + 0.5), eq, RelaxedOutput{1, 2}), WithinAbs(-1.1, 1e-12));
    const auto f0 = testing::paper_initial(eq);
    CHECK_THAT(u_relaxed_output(at(f0, eq.dilution), eq, RelaxedOutput{1, 2}),
               WithinAbs(2.0 * std::log(testing::kY0 / testing::kYstarM8), 1e-6));

    // Affine in (D, ln y): three points determine the law.
    auto u_of = [&](double d, double scale) {
        return u_relaxed_output(at(eq.profile.map([scale](double v) { return v * scale; }), d), eq, RelaxedOutput{1.5, 0.4});
    };
    const double u00 = u_of(0.2, 1.0), u10 = u_of(1.2, 1.0), u01 = u_of(0.2, std::exp(1.0));
    const double predicted = u00 + 0.7 * (u10 - u00) + (-0.6) * (u01 - u00);
    CHECK_THAT(u_of(0.9, std::exp(-0.6)), WithinAbs(predicted, 1e-12));
}

TEST_CASE("safety filter") {
    CHECK(safety_filter(-5.0, 2.0, 1.0) == -2.0);
    CHECK(safety_filter(1.0, 2.0, 1.0) == 1.0);
    CHECK(safety_filter(-2.0, 2.0, 1.0) == -2.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10.0, 10.0), d(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double dd = d(rng), u0 = u(rng);
        CHECK(safety_filter(u0, dd, 0.7) >= -0.7 * dd);
        CHECK(safety_filter(u0, dd, 0.7) >= u0);
    }
}

TEST_CASE("constrained output law") {
    const auto& eq = eq8();
    const ConstrainedOutput g{1, 10, 1, kBox};
    const auto f0 = testing::paper_initial(eq);
    const double ds = eq.dilution;
    const double env = (ds - 0.1) * (1.5 - ds) / 1.4;
    CHECK_THAT(u_constrained_output(at(f0, ds), eq, g), WithinAbs(env * 10.0 * std::log(testing::kY0 / testing::kYstarM8), 1e-6));
    CHECK(std::fabs(u_constrained_output(at(f0, 1.5 - 1e-9), eq, g)) < 1e-6);
    CHECK(std::fabs(u_constrained_output(at(f0, 0.1 + 1e-9), eq, g)) < 1e-6);
    CHECK_THROWS_AS(u_constrained_output(at(f0, 1.5), eq, g), ControllerError);
    CHECK_THROWS_AS(u_constrained_output(at(f0, 0.05), eq, g), ControllerError);
}

TEST_CASE("positive-only law") {
    const auto& eq = eq8();
    const double ds = eq.dilution;
    CHECK_THAT(u_positive_only(at(eq.profile, 2 * ds), eq, PositiveOnly{1, 1, 1}),
               WithinAbs(2 * ds * (2 * (-ds) + std::log(0.5)), 1e-12));
    CHECK(std::fabs(u_positive_only(at(eq.profile, 1e-12), eq, PositiveOnly{1, 1, 1})) < 1e-9);
    CHECK_THROWS_AS(u_positive_only(at(eq.profile, 0.0), eq, PositiveOnly{1, 1, 1}), ControllerError);
}

TEST_CASE("full-state Lyapunov law") {
    const auto& eq = eq8();
    const double ds = eq.dilution;
    CHECK_THAT(u_lyap_fullstate(at(eq.profile, 2 * ds), eq, LyapFullState{1, 1, 1}), WithinAbs(-3 * ds * ds, 1e-12));
    const auto f0 = testing::paper_initial(eq);
    CHECK_THAT(u_lyap_fullstate(at(f0, ds), eq, LyapFullState{1, 1, 1}),
               WithinAbs(2 * ds * ds * (testing::kPiF0M8 - 1.0), 1e-6));
    CHECK_THROWS_AS(u_lyap_fullstate(at(f0, -0.1), eq, LyapFullState{1, 1, 1}), ControllerError);

    // The bounded law with (0, inf) reduces to the unbounded one.
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> dil(0.05, 3.0);
    for (int i = 0; i < 20; ++i) {
        const auto s = at(testing::random_admissible(eq, rng), dil(rng));
        const double a = u_lyap_fullstate(s, eq, LyapFullState{0.8, 1.7, 2.5});
        const double b = u_lyap_fullstate_bounded(s, eq, LyapFullStateBounded{0.8, 1.7, 2.5, {0.0, kInf}});
        REQUIRE_THAT(b, WithinAbs(a, 1e-12 * (1.0 + std::fabs(a))));
    }
}

namespace {

// The law written in (eta, zeta) coordinates:
//   zeta' = D* c2 (e^{-z} - 1) - theta c1 (1 - e^{-c1 eta})(Phi(c1 eta) - Phi(zeta)) / (e^z - 1) + c1 (D* - Phi(zeta)),
//   u = Phi'(zeta) zeta', z = zeta - c1 eta.
double lyap_bounded_eta_zeta(double eta, double d, double ds, const LyapFullStateBounded& g) {
    const DilutionBounds b(g.interval.lower, g.interval.upper, ds);
    const double zeta = phi_inv(d, b);
    const double z = zeta - g.c1 * eta;
    const double ratio = (phi(g.c1 * eta, b) - d) / std::expm1(z);
    const double rate = ds * g.c2 * std::expm1(-z) + g.theta * g.c1 * std::expm1(-g.c1 * eta) * ratio + g.c1 * (ds - d);
    const double slope = b.bounded_above() ? (d - b.lower()) * (b.upper() - d) / b.alpha() : d - b.lower();
    return slope * rate;
}

}  // namespace

TEST_CASE("bounded Lyapunov law agrees with its (eta, zeta) form") {
    const auto& eq = eq8();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> dil(0.11, 1.49), gain(0.3, 3.0);
    int compared = 0;
    for (int i = 0; i < 200; ++i) {
        const auto f = testing::random_admissible(eq, rng);
        const double d = dil(rng);
        const LyapFullStateBounded g{gain(rng), gain(rng), gain(rng), kBox};
        const double eta = std::log(pi_projection(f, eq));
        const DilutionBounds b(kBox.lower, kBox.upper, eq.dilution);
        if (std::fabs(phi_inv(d, b) - g.c1 * eta) < 1e-3) continue;
        const double direct = u_lyap_fullstate_bounded(at(f, d), eq, g);
        REQUIRE_THAT(direct, WithinAbs(lyap_bounded_eta_zeta(eta, d, eq.dilution, g), 1e-10 * (1.0 + std::fabs(direct))));
        ++compared;
    }
    CHECK(compared > 150);

    const LyapFullStateBounded g{1, 1, 1, kBox};
    const auto f0 = testing::paper_initial(eq);
    CHECK(std::fabs(u_lyap_fullstate_bounded(at(f0, 1.5 - 1e-10), eq, g)) < 1e-8);
    CHECK_THROWS_AS(u_lyap_fullstate_bounded(at(f0, 1.6), eq, g), ControllerError);
}

TEST_CASE("gain and interval validation") {
    const auto& eq = eq8();
    CHECK_NOTHROW(validate(BackstepFull{1, 2}, eq));
    CHECK_THROWS_AS(validate(BackstepFull{0, 2}, eq), ControllerError);
    CHECK_THROWS_AS(validate(SafetyFiltered{1, 2, -1}, eq), ControllerError);
    CHECK_THROWS_AS(validate(ConstrainedOutput{1, 2, 1, {0.5, 1.5}}, eq), ControllerError);
    CHECK_THROWS_AS(validate(LyapFullState{1, std::nan(""), 1}, eq), ControllerError);
    CHECK(variant_name(ControllerSpec{PositiveOnly{1, 1, 1}}) == "positive_only");
    CHECK(invariant_interval(ControllerSpec{PositiveOnly{1, 1, 1}})->lower == 0.0);
    CHECK(!invariant_interval(ControllerSpec{RelaxedOutput{1, 1}}));
}
