#pragma once

// Closed-loop time integration. The transport equation is solved along
// characteristics with dt = da, the renewal condition by a scalar solve of the
// trapezoid quadrature, and D' = u by Heun's method with the controller
// evaluated at the current and predicted states.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemostat/analysis.hpp"
#include "chemostat/lyapunov.hpp"

namespace chemostat {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::size_t step, double time)
        : std::runtime_error(what + " (step " + std::to_string(step) + ", t = " + std::to_string(time) + ")"),
          step_(step),
          time_(time) {}
    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

struct SolverConfig {
    double t_end = 20.0;
    double tol_bc = 1e-6;
    std::size_t record_stride = 20;
    bool keep_states = true;
    double sigma = 0.0;  // decay rate inside G; normally the kernel certificate's sigma
};

/// One-step propagator bound to an equilibrium and a controller.
class Integrator {
public:
    Integrator(const Equilibrium& eq, ControllerSpec spec) : eq_(eq), spec_(std::move(spec)) {
        const auto& m = eq_.model;
        const double dt = m.grid.step();
        mortality_decay_.resize(m.grid.size(), 1.0);
        for (std::size_t i = 1; i < mortality_decay_.size(); ++i)
            mortality_decay_[i] = std::exp(-dt * 0.5 * (m.mortality[i - 1] + m.mortality[i]));
        renewal_denominator_ = 1.0 - m.grid.weight(0) * m.birth.front();
        if (!(renewal_denominator_ > 0.0))
            throw ModelError("renewal solve singular: 1 - w0 k(0) <= 0; refine the grid");
    }

    double dt() const noexcept { return eq_.model.grid.step(); }
    const Equilibrium& equilibrium() const noexcept { return eq_; }
    const ControllerSpec& controller() const noexcept { return spec_; }

    /// Shifts the profile one cell along the characteristics with mean dilution
    /// d_mean and closes the boundary with the renewal condition.
    AgeFunction transport(const AgeFunction& f, double d_mean) const {
        const auto& m = eq_.model;
        const std::size_t size = f.size();
        const double dilution_decay = std::exp(-dt() * d_mean);
        std::vector<double> out(size);
        for (std::size_t i = size - 1; i >= 1; --i) out[i] = f[i - 1] * mortality_decay_[i] * dilution_decay;
        double births = 0.0;
        for (std::size_t i = 1; i < size; ++i) births += m.grid.weight(i) * m.birth[i] * out[i];
        out[0] = births / renewal_denominator_;
        return AgeFunction(m.grid, std::move(out));
    }

    struct Step {
        SimState next;
        double input;       // u at the start of the step
        double mean_dilution;
    };

    Step advance(const SimState& s) const {
        const double h = dt();
        const double u0 = control(spec_, s, eq_);
        const double d_pred = s.dilution + h * u0;
        SimState pred{transport(s.density, 0.5 * (s.dilution + d_pred)), d_pred, s.time + h};
        const double u1 = control(spec_, pred, eq_);
        const double d_next = s.dilution + 0.5 * h * (u0 + u1);
        const double d_mean = 0.5 * (s.dilution + d_next);
        return {SimState{transport(s.density, d_mean), d_next, s.time + h}, u0, d_mean};
    }

private:
    const Equilibrium& eq_;
    ControllerSpec spec_;
    std::vector<double> mortality_decay_;
    double renewal_denominator_;
};

inline SimState step(const SimState& s, const ControllerSpec& spec, const Equilibrium& eq) {
    return Integrator(eq, spec).advance(s).next;
}

namespace detail {

inline double kernel_residual(const AgeFunction& psi, const Equilibrium& eq) {
    return psi.front() - weighted_quad(eq.kernel, psi);
}

}  // namespace detail

/// Diagnostics of a snapshot under the given controller.
inline Record diagnose(const SimState& s, double input, double eta_oracle, const Equilibrium& eq,
                       const ControllerSpec& spec, double sigma) {
    Record r;
    r.t = s.time;
    r.dilution = s.dilution;
    r.input = input;
    r.output = output(s.density, eq);
    r.eta = std::log(pi_projection(s.density, eq));
    r.eta_oracle = eta_oracle;
    const AgeFunction psi = psi_history(s.density, eq);
    r.v = v_functional(psi, eq);
    r.v1 = v1_functional(psi, eq);
    r.G = G_functional(psi, sigma);
    r.R1 = measure_R1(s, eq);
    r.bc_residual = boundary_residual(s.density, eq.model);
    r.psi_consistency = detail::kernel_residual(psi, eq);
    r.min_density = s.density.min();

    const double ds = eq.dilution;
    const double A = eq.model.grid.length();
    const double log_y = std::log(r.output / eq.output);
    if (s.dilution > 0.0) r.zeta = std::log(s.dilution / ds);

    auto backstep = [&](double k1, double k2) {
        r.delta = s.dilution - ds - k1 * log_y;
        if (sigma > 0.0) {
            r.V1 = V_from_G(r.eta, r.delta, r.G, v1_coefficients(k1, k2, sigma, A));
            r.V2 = V_from_G(r.eta, r.delta, r.G, v2_coefficients(k1, k2, sigma, A, eq.lemma_constant));
        }
    };
    auto with_bounds = [&](const DilutionInterval& iv) -> std::optional<DilutionBounds> {
        DilutionBounds b(iv.lower, iv.upper, ds);
        if (!b.contains(s.dilution)) {
            r.zeta = kNotApplicable;
            r.R2 = std::numeric_limits<double>::infinity();
            return std::nullopt;
        }
        r.zeta = phi_inv(s.dilution, b);
        r.R2 = measure_R2(s, eq, b);
        return b;
    };
    auto lyap = [&](double c1, double c2, double theta, const DilutionInterval& iv) {
        auto b = with_bounds(iv);
        if (!b) return;
        r.z = r.zeta - c1 * r.eta;
        r.Vtheta = V_theta(r.eta, r.zeta, c1, theta);
        r.Vtheta_rate = V_theta_rate(r.eta, r.zeta, ds, c1, c2, theta, b->delta1(), b->n());
    };
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, BackstepFull> || std::is_same_v<T, BackstepConstPMu> ||
                          std::is_same_v<T, RelaxedOutput> || std::is_same_v<T, SafetyFiltered>) {
                backstep(g.k1, g.k2);
            } else if constexpr (std::is_same_v<T, ConstrainedOutput>) {
                if (with_bounds(g.interval)) r.U3 = U3(r.eta, r.zeta, g.k1, g.k2);
            } else if constexpr (std::is_same_v<T, PositiveOnly>) {
                if (with_bounds({0.0, inf})) r.U3 = U3(r.eta, r.zeta, g.k1, g.k2);
            } else if constexpr (std::is_same_v<T, LyapFullState>) {
                lyap(g.c1, g.c2, g.theta, {0.0, inf});
            } else {
                lyap(g.c1, g.c2, g.theta, g.interval);
            }
        },
        spec);
    return r;
}

/// Runs the closed loop from (f0, D0) to t_end, recording every
/// record_stride steps and at the final step.
inline Trajectory simulate(const AgeFunction& f0, double d0, const ControllerSpec& spec, const Equilibrium& eq,
                           const SolverConfig& cfg) {
    validate(spec, eq);
    if (!(cfg.t_end > 0.0)) throw SolverError("t_end must be positive", 0, 0.0);
    if (cfg.record_stride == 0) throw SolverError("record_stride must be positive", 0, 0.0);
    SimState state{f0, d0, 0.0};
    try {
        validate_state(state, eq.model, cfg.tol_bc, /*initial=*/true);
    } catch (const ModelError& e) {
        throw SolverError(std::string("invalid initial state: ") + e.what(), 0, 0.0);
    }
    if (auto iv = invariant_interval(spec); iv && !(d0 > iv->lower && d0 < iv->upper))
        throw SolverError("initial dilution " + std::to_string(d0) + " outside the controller's interval", 0, 0.0);

    const Integrator integrator(eq, spec);
    const double dt = integrator.dt();
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / dt));

    Trajectory traj{spec, eq.dilution, cfg.sigma, boundary_residual(f0, eq.model), steps, {}, {}};
    traj.records.reserve(steps / cfg.record_stride + 2);

    const double eta0 = std::log(pi_projection(f0, eq));
    double drift = 0.0;  // int_0^t (D* - D)
    auto record = [&](const SimState& s, double u, std::size_t k) {
        try {
            traj.records.push_back(diagnose(s, u, eta0 + drift, eq, spec, cfg.sigma));
        } catch (const std::exception& e) {
            throw SolverError(std::string("diagnostics failed: ") + e.what(), k, s.time);
        }
        if (cfg.keep_states) traj.states.push_back(s);
    };

    for (std::size_t k = 0; k < steps; ++k) {
        std::optional<Integrator::Step> next;
        try {
            next = integrator.advance(state);
        } catch (const std::exception& e) {
            throw SolverError(e.what(), k, state.time);
        }
        auto& st = *next;
        if (k % cfg.record_stride == 0) record(state, st.input, k);
        drift += dt * (eq.dilution - st.mean_dilution);
        st.next.time = static_cast<double>(k + 1) * dt;
        if (!std::isfinite(st.next.dilution)) throw SolverError("dilution became non-finite", k + 1, st.next.time);
        if (!(st.next.density.min() > 0.0))
            throw SolverError("density positivity lost", k + 1, st.next.time);
        state = std::move(st.next);
    }
    double u_end = kNotApplicable;
    try {
        u_end = control(spec, state, eq);
    } catch (const std::exception& e) {
        throw SolverError(e.what(), steps, state.time);
    }
    if (traj.records.empty() || traj.records.back().t < state.time) record(state, u_end, steps);
    return traj;
}

}  // namespace chemostat
