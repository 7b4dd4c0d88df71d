#pragma once

// Lyapunov functions and functionals of the closed loops, and numerical
// audits of their decay along recorded trajectories.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemostat/trajectory.hpp"

namespace chemostat {

class LyapunovError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double U1(double eta, double delta, double b1) { return 0.5 * (eta * eta + b1 * delta * delta); }

struct LyapCoefficients {
    double b1;
    double b2;
};

/// b1 = 2/(k2 k1), b2 = (k1/sigma) e^{2 sigma A}.
inline LyapCoefficients v1_coefficients(double k1, double k2, double sigma, double max_age) {
    return {2.0 / (k2 * k1), k1 / sigma * std::exp(2.0 * sigma * max_age)};
}

/// b1 = 4/(k2 k1), b2 = (k1/sigma + b1 c1 k1^2/(sigma k2)) e^{2 sigma A}.
inline LyapCoefficients v2_coefficients(double k1, double k2, double sigma, double max_age, double c1) {
    const double b1 = 4.0 / (k2 * k1);
    return {b1, (k1 / sigma + b1 * c1 * k1 * k1 / (sigma * k2)) * std::exp(2.0 * sigma * max_age)};
}

inline double V_from_G(double eta, double delta, double G, LyapCoefficients c) {
    return U1(eta, delta, c.b1) + 0.5 * c.b2 * G * G;
}

inline double V1_functional(double eta, double delta, const AgeFunction& psi, const Equilibrium& eq,
                            const KernelCert& cert, double k1, double k2) {
    return V_from_G(eta, delta, G_functional(psi, cert.sigma),
                    v1_coefficients(k1, k2, cert.sigma, eq.model.grid.length()));
}

inline double V2_functional(double eta, double delta, const AgeFunction& psi, const Equilibrium& eq,
                            const KernelCert& cert, double k1, double k2) {
    return V_from_G(eta, delta, G_functional(psi, cert.sigma),
                    v2_coefficients(k1, k2, cert.sigma, eq.model.grid.length(), eq.lemma_constant));
}

/// U3 = eta^2/2 + (b1/2)(zeta - k2 eta)^2 with b1 = 1/(k1 k2).
inline double U3(double eta, double zeta, double k1, double k2) {
    const double b1 = 1.0 / (k1 * k2);
    const double w = zeta - k2 * eta;
    return 0.5 * eta * eta + 0.5 * b1 * w * w;
}

/// Forcing allowance on U3: (b1 k2^2 k3 / (2 sigma)) e^{2 sigma A} G(psi0)^2.
inline double U3_allowance(double k1, double k2, double k3, double sigma, double max_age, double G0) {
    const double b1 = 1.0 / (k1 * k2);
    return b1 * k2 * k2 * k3 / (2.0 * sigma) * std::exp(2.0 * sigma * max_age) * G0 * G0;
}

/// omega(z) = e^z - 1 - z.
inline double omega(double z) { return std::expm1(z) - z; }

/// sinh^2(z/2).
inline double mu_z(double z) {
    const double s = std::sinh(0.5 * z);
    return s * s;
}

inline double V_theta(double eta, double zeta, double c1, double theta) {
    return theta * omega(-c1 * eta) + omega(zeta - c1 * eta);
}

/// dV/dt along the full-state Lyapunov loop. With d1 = (D* - lo)/D* and
/// n = (D* - lo)/(hi - D*) (n = 0, d1 = 1 without bounds):
///   -4 D* [theta c1 d1 / (1 + n e^{c1 eta}) sinh^2(c1 eta / 2) + c2 sinh^2((zeta - c1 eta)/2)].
inline double V_theta_rate(double eta, double zeta, double dstar, double c1, double c2, double theta,
                           double delta1 = 1.0, double n = 0.0) {
    const double share = delta1 / (1.0 + n * std::exp(c1 * eta));
    return -4.0 * dstar * (theta * c1 * share * mu_z(-c1 * eta) + c2 * mu_z(zeta - c1 * eta));
}

enum class Functional { V1, V2, U3, G, Vtheta };

inline const char* functional_name(Functional f) {
    switch (f) {
        case Functional::V1: return "V1";
        case Functional::V2: return "V2";
        case Functional::U3: return "U3";
        case Functional::G: return "G";
        case Functional::Vtheta: return "Vtheta";
    }
    return "?";
}

struct LyapReport {
    Functional functional;
    std::vector<double> times;
    std::vector<double> values;
    double slope = 0.0;             // least-squares slope of ln(value)
    double theoretical_rate = 0.0;  // guaranteed decay rate; 0 when only monotonicity is claimed
    double margin = 0.1;
    double worst_forward_rate = 0.0;  // max over records of (V[i+1] - V[i]) / (h V[i])
    std::size_t fitted_points = 0;
    bool monotone = true;           // non-increasing across records
    bool passed = false;
};

inline constexpr double kFitFloor = 1e-10;

struct LineFit {
    double slope;
    double intercept;
    std::size_t points;
};

/// Least-squares fit of ln(value) against t over values above the floor.
inline LineFit fit_log_slope(const std::vector<double>& t, const std::vector<double>& v, double floor = kFitFloor) {
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < t.size() && i < v.size(); ++i) {
        if (!(v[i] > floor) || !std::isfinite(v[i])) continue;
        const double y = std::log(v[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
        ++m;
    }
    if (m < 2) throw LyapunovError("degenerate series: fewer than two values above floor");
    const double denom = static_cast<double>(m) * stt - st * st;
    if (!(denom > 0.0)) throw LyapunovError("degenerate series: no time spread");
    const double slope = (static_cast<double>(m) * sty - st * sy) / denom;
    return {slope, (sy - slope * st) / static_cast<double>(m), m};
}

/// Rate guaranteed by the stability theorems for the functional under the
/// given controller; 0 where the theorem claims only non-increase.
inline double theoretical_rate(Functional f, const ControllerSpec& spec, double sigma) {
    auto gains = [&](double& k1, double& k2) {
        if (auto* c = std::get_if<BackstepFull>(&spec)) return k1 = c->k1, k2 = c->k2, true;
        if (auto* c = std::get_if<BackstepConstPMu>(&spec)) return k1 = c->k1, k2 = c->k2, true;
        if (auto* c = std::get_if<SafetyFiltered>(&spec)) return k1 = c->k1, k2 = c->k2, true;
        if (auto* c = std::get_if<RelaxedOutput>(&spec)) return k1 = c->k1, k2 = c->k2, true;
        return false;
    };
    double k1 = 0.0, k2 = 0.0;
    switch (f) {
        case Functional::G: return sigma;
        case Functional::V1:
            if (!gains(k1, k2)) throw LyapunovError("V1 needs a backstepping controller");
            return std::min({k1 / 2.0, k2, sigma});
        case Functional::V2:
            if (!gains(k1, k2)) throw LyapunovError("V2 needs a backstepping controller");
            return std::min({k1 / 2.0, k2 / 2.0, sigma});
        case Functional::U3:
        case Functional::Vtheta: return 0.0;
    }
    return 0.0;
}

/// Audits a recorded series against exponential decay at `rate`: the fitted
/// ln-slope must satisfy slope <= -(1 - margin) rate. With rate 0 the audit
/// requires strict decrease across records instead.
inline LyapReport audit_series(Functional f, std::vector<double> times, std::vector<double> values, double rate,
                               double margin = 0.1) {
    LyapReport rep{f, std::move(times), std::move(values)};
    rep.theoretical_rate = rate;
    rep.margin = margin;
    const auto& t = rep.times;
    const auto& v = rep.values;
    for (double x : v)
        if (std::isnan(x)) throw LyapunovError(std::string(functional_name(f)) + " not recorded for this run");
    const LineFit fit = fit_log_slope(t, v);
    rep.slope = fit.slope;
    rep.fitted_points = fit.points;
    rep.worst_forward_rate = -std::numeric_limits<double>::infinity();
    bool strict = true;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (v[i + 1] > v[i]) rep.monotone = false;
        if (v[i] > kFitFloor) {
            if (!(v[i + 1] < v[i])) strict = false;
            rep.worst_forward_rate =
                std::max(rep.worst_forward_rate, (v[i + 1] - v[i]) / ((t[i + 1] - t[i]) * v[i]));
        }
    }
    rep.passed = rate > 0.0 ? rep.slope <= -(1.0 - margin) * rate : strict;
    return rep;
}

inline LyapReport decay_audit(const Trajectory& traj, Functional f, double margin = 0.1) {
    double Record::*field = nullptr;
    switch (f) {
        case Functional::V1: field = &Record::V1; break;
        case Functional::V2: field = &Record::V2; break;
        case Functional::U3: field = &Record::U3; break;
        case Functional::G: field = &Record::G; break;
        case Functional::Vtheta: field = &Record::Vtheta; break;
    }
    return audit_series(f, traj.times(), traj.series(field), theoretical_rate(f, traj.controller, traj.sigma),
                        margin);
}

/// Largest relative mismatch between the forward-difference derivative of
/// Vtheta and the analytic rate averaged over each record interval, over
/// intervals where the analytic rate exceeds `rel_floor` times its peak.
inline double vtheta_rate_mismatch(const Trajectory& traj, double rel_floor = 1e-6) {
    double worst = 0.0;
    const auto& r = traj.records;
    double peak = 0.0;
    for (const auto& rec : r) peak = std::max(peak, std::fabs(rec.Vtheta_rate));
    const double floor = rel_floor * peak;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double fd = (r[i + 1].Vtheta - r[i].Vtheta) / (r[i + 1].t - r[i].t);
        const double analytic = 0.5 * (r[i].Vtheta_rate + r[i + 1].Vtheta_rate);
        if (std::isnan(fd) || std::isnan(analytic))
            throw LyapunovError("Vtheta not recorded for this run");
        if (std::fabs(analytic) < floor) continue;
        worst = std::max(worst, std::fabs(fd - analytic) / std::fabs(analytic));
    }
    return worst;
}

}  // namespace chemostat
