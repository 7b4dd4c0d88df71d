#pragma once

// Feedback laws for the dilution actuator D' = u. Every law is a pure
// function of the current snapshot (f, D) and the equilibrium.

#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "chemostat/transforms.hpp"

namespace chemostat {

class ControllerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DilutionInterval {
    double lower;
    double upper;  // may be +inf
};

/// Full-state backstepping: exact cancellation plus stabilizing term.
struct BackstepFull {
    double k1, k2;
};
/// Backstepping specialised to constant sensor kernel and mortality.
struct BackstepConstPMu {
    double k1, k2;
};
/// Static output feedback using only (y, D).
struct RelaxedOutput {
    double k1, k2;
};
/// BackstepFull followed by the D >= 0 barrier filter.
struct SafetyFiltered {
    double k1, k2, k3;
};
/// Output feedback keeping D inside (lower, upper).
struct ConstrainedOutput {
    double k1, k2, k3;
    DilutionInterval interval;
};
/// Output feedback keeping D > 0 (the unbounded-above case of ConstrainedOutput).
struct PositiveOnly {
    double k1, k2, k3;
};
/// Full-state Lyapunov design for D in (0, inf).
struct LyapFullState {
    double c1, c2, theta;
};
/// Full-state Lyapunov design for D in (lower, upper).
struct LyapFullStateBounded {
    double c1, c2, theta;
    DilutionInterval interval;
};

using ControllerSpec = std::variant<BackstepFull, BackstepConstPMu, RelaxedOutput, SafetyFiltered, ConstrainedOutput,
                                    PositiveOnly, LyapFullState, LyapFullStateBounded>;

inline std::string_view variant_name(const ControllerSpec& spec) {
    constexpr std::string_view names[] = {"backstep_full",      "backstep_const_pmu", "relaxed_output",
                                          "safety_filtered",    "constrained_output", "positive_only",
                                          "lyap_full_state",    "lyap_full_state_bounded"};
    return names[spec.index()];
}

namespace detail {

inline double positive_output(const SimState& s, const Equilibrium& eq) {
    const double y = output(s.density, eq);
    if (!(y > 0.0)) throw ControllerError("output y must be positive");
    return y;
}

inline DilutionBounds interior_bounds(const DilutionInterval& iv, const Equilibrium& eq, double d) {
    DilutionBounds b(iv.lower, iv.upper, eq.dilution);
    if (!b.contains(d))
        throw ControllerError("dilution " + std::to_string(d) + " not strictly inside (" + std::to_string(iv.lower) +
                              ", " + std::to_string(iv.upper) + ")");
    return b;
}

}  // namespace detail

/// u = u_c + u_s with
///   u_c = -k1 D - (k1/y)[p(A)f(A) - p(0)f(0) - int p~ f]
///   u_s = -k2 (D - D* - k1 ln(y/y*)).
inline double u_backstep_full(const SimState& s, const Equilibrium& eq, const BackstepFull& g) {
    const double y = detail::positive_output(s, eq);
    const auto& m = eq.model;
    const double boundary = m.sensor.back() * s.density.back() - m.sensor.front() * s.density.front() -
                            weighted_quad(eq.sensor_drift, s.density);
    const double cancel = -g.k1 * s.dilution - g.k1 / y * boundary;
    const double stabilize = -g.k2 * (s.dilution - eq.dilution - g.k1 * std::log(y / eq.output));
    return cancel + stabilize;
}

/// Constant p, mu: u_c = -k1 D - (k1 p / y)(f(A) - f(0)) - k1 mu.
inline double u_backstep_const_pmu(const SimState& s, const Equilibrium& eq, const BackstepConstPMu& g) {
    const auto& m = eq.model;
    if (!m.constant_sensor_and_mortality())
        throw ControllerError("backstep_const_pmu requires constant sensor kernel and mortality");
    const double y = detail::positive_output(s, eq);
    const double p = m.sensor.front();
    const double mu = m.mortality.front();
    const double cancel = -g.k1 * s.dilution - g.k1 * p / y * (s.density.back() - s.density.front()) - g.k1 * mu;
    const double stabilize = -g.k2 * (s.dilution - eq.dilution - g.k1 * std::log(y / eq.output));
    return cancel + stabilize;
}

/// u = -(k1 + k2)(D - D*) + k1 k2 ln(y/y*).
inline double u_relaxed_output(const SimState& s, const Equilibrium& eq, const RelaxedOutput& g) {
    const double y = detail::positive_output(s, eq);
    return -(g.k1 + g.k2) * (s.dilution - eq.dilution) + g.k1 * g.k2 * std::log(y / eq.output);
}

/// u0 + max{0, -u0 - k3 D}; guarantees u >= -k3 D.
inline double safety_filter(double u0, double dilution, double k3) {
    const double floor = -k3 * dilution;
    return u0 < floor ? floor : u0;
}

inline double u_safety_filtered(const SimState& s, const Equilibrium& eq, const SafetyFiltered& g, double u0) {
    (void)eq;
    return safety_filter(u0, s.dilution, g.k3);
}

inline double u_safety_filtered(const SimState& s, const Equilibrium& eq, const SafetyFiltered& g) {
    return u_safety_filtered(s, eq, g, u_backstep_full(s, eq, BackstepFull{g.k1, g.k2}));
}

/// u = (D - lo)(hi - D)/(hi - lo) [(k1 + k2)(D* - D) - k3 (Phi^{-1}(D) - k2 ln(y/y*))].
inline double u_constrained_output(const SimState& s, const Equilibrium& eq, const ConstrainedOutput& g) {
    const DilutionBounds b = detail::interior_bounds(g.interval, eq, s.dilution);
    const double y = detail::positive_output(s, eq);
    const double d = s.dilution;
    const double envelope =
        b.bounded_above() ? (d - b.lower()) * (b.upper() - d) / b.alpha() : (d - b.lower());
    const double zeta = phi_inv(d, b);
    return envelope * ((g.k1 + g.k2) * (eq.dilution - d) - g.k3 * (zeta - g.k2 * std::log(y / eq.output)));
}

/// u = D [(k1 + k2)(D* - D) + k3 ln((D*/D)(y/y*)^k2)].
inline double u_positive_only(const SimState& s, const Equilibrium& eq, const PositiveOnly& g) {
    const double d = s.dilution;
    if (!(d > 0.0)) throw ControllerError("positive_only requires D > 0");
    const double y = detail::positive_output(s, eq);
    return d * ((g.k1 + g.k2) * (eq.dilution - d) + g.k3 * (std::log(eq.dilution / d) + g.k2 * std::log(y / eq.output)));
}

/// u = D* D { c1 [theta (Pi^c1 - 1) + 1 - D/D*] + c2 ((D*/D) Pi^c1 - 1) }.
inline double u_lyap_fullstate(const SimState& s, const Equilibrium& eq, const LyapFullState& g) {
    const double d = s.dilution;
    if (!(d > 0.0)) throw ControllerError("lyap_full_state requires D > 0");
    const double ds = eq.dilution;
    const double pc = std::pow(pi_projection(s.density, eq), g.c1);
    return ds * d * (g.c1 * (g.theta * (pc - 1.0) + 1.0 - d / ds) + g.c2 * (ds / d * pc - 1.0));
}

/// Interval-constrained full-state Lyapunov law. With P = Pi(f)^c1,
///   u = D*/(hi-lo) (D-lo)(hi-D) { c1 [ theta d1 (1+n)(P-1) / ((1+nP)(1+n e^zeta)) + 1 - D/D* ]
///                                 + c2 ( n (hi-D)/(D-lo) P - 1 ) },
/// where e^zeta = (D-lo)/(n (hi-D)), so 1 + n e^zeta = (hi-lo)/(hi-D). Along the closed loop
///   V' = -4 D* [ theta c1 d1/(1 + n P) sinh^2(c1 eta/2) + c2 sinh^2((zeta - c1 eta)/2) ].
inline double u_lyap_fullstate_bounded(const SimState& s, const Equilibrium& eq, const LyapFullStateBounded& g) {
    const DilutionBounds b = detail::interior_bounds(g.interval, eq, s.dilution);
    const double d = s.dilution;
    const double ds = eq.dilution;
    const double lo = b.lower();
    const double n = b.n();
    const double d1 = b.delta1();
    // (hi - D)/(hi - lo) and n (hi - D), with their limits as hi -> inf
    const double upper_share = b.bounded_above() ? (b.upper() - d) / b.alpha() : 1.0;
    const double n_gap = b.bounded_above() ? n * (b.upper() - d) : ds - lo;
    const double pc = std::pow(pi_projection(s.density, eq), g.c1);

    const double mode = g.theta * d1 * (1.0 + n) * (pc - 1.0) * upper_share / (1.0 + n * pc);
    const double brace = g.c1 * (mode + 1.0 - d / ds) + g.c2 * (n_gap / (d - lo) * pc - 1.0);
    return ds * (d - lo) * upper_share * brace;
}

inline double control(const ControllerSpec& spec, const SimState& s, const Equilibrium& eq) {
    return std::visit(
        [&](const auto& g) -> double {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, BackstepFull>) return u_backstep_full(s, eq, g);
            else if constexpr (std::is_same_v<T, BackstepConstPMu>) return u_backstep_const_pmu(s, eq, g);
            else if constexpr (std::is_same_v<T, RelaxedOutput>) return u_relaxed_output(s, eq, g);
            else if constexpr (std::is_same_v<T, SafetyFiltered>) return u_safety_filtered(s, eq, g);
            else if constexpr (std::is_same_v<T, ConstrainedOutput>) return u_constrained_output(s, eq, g);
            else if constexpr (std::is_same_v<T, PositiveOnly>) return u_positive_only(s, eq, g);
            else if constexpr (std::is_same_v<T, LyapFullState>) return u_lyap_fullstate(s, eq, g);
            else return u_lyap_fullstate_bounded(s, eq, g);
        },
        spec);
}

/// The dilution interval a law keeps invariant, if any: (lower, upper) for the
/// interval laws, (0, inf) for the positivity-preserving ones.
inline std::optional<DilutionInterval> invariant_interval(const ControllerSpec& spec) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (auto* c = std::get_if<ConstrainedOutput>(&spec)) return c->interval;
    if (auto* c = std::get_if<LyapFullStateBounded>(&spec)) return c->interval;
    if (std::holds_alternative<PositiveOnly>(spec) || std::holds_alternative<LyapFullState>(spec))
        return DilutionInterval{0.0, inf};
    return std::nullopt;
}

/// Gains strictly positive; interval brackets D*. Throws ControllerError.
inline void validate(const ControllerSpec& spec, const Equilibrium& eq) {
    auto positive = [](std::initializer_list<std::pair<const char*, double>> gains) {
        for (const auto& [name, v] : gains)
            if (!(v > 0.0) || !std::isfinite(v))
                throw ControllerError(std::string("gain ") + name + " must be positive, got " + std::to_string(v));
    };
    auto bracket = [&](const DilutionInterval& iv) {
        try {
            DilutionBounds(iv.lower, iv.upper, eq.dilution);
        } catch (const TransformError& e) {
            throw ControllerError(e.what());
        }
    };
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, LyapFullState>) {
                positive({{"c1", g.c1}, {"c2", g.c2}, {"theta", g.theta}});
            } else if constexpr (std::is_same_v<T, LyapFullStateBounded>) {
                positive({{"c1", g.c1}, {"c2", g.c2}, {"theta", g.theta}});
                bracket(g.interval);
            } else if constexpr (std::is_same_v<T, SafetyFiltered> || std::is_same_v<T, PositiveOnly>) {
                positive({{"k1", g.k1}, {"k2", g.k2}, {"k3", g.k3}});
            } else if constexpr (std::is_same_v<T, ConstrainedOutput>) {
                positive({{"k1", g.k1}, {"k2", g.k2}, {"k3", g.k3}});
                bracket(g.interval);
            } else {
                positive({{"k1", g.k1}, {"k2", g.k2}});
            }
        },
        spec);
    if (std::holds_alternative<BackstepConstPMu>(spec) && !eq.model.constant_sensor_and_mortality())
        throw ControllerError("backstep_const_pmu requires constant sensor kernel and mortality");
}

}  // namespace chemostat
