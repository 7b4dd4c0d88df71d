#pragma once

// State measures R1/R2, exponential-envelope checks and dilution constraint audits.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "chemostat/trajectory.hpp"

namespace chemostat {

/// max |ln(f/f*)| over the nodes.
inline double log_deviation(const AgeFunction& f, const Equilibrium& eq) {
    f.require_same_grid(eq.profile);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(f[i] > 0.0)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::fabs(std::log(f[i] / eq.profile[i])));
    }
    return worst;
}

/// R1 = max |ln(f/f*)| + |D - D*|.
inline double measure_R1(const SimState& s, const Equilibrium& eq) {
    return log_deviation(s.density, eq) + std::fabs(s.dilution - eq.dilution);
}

/// R2 = max |ln(f/f*)| + |Phi^{-1}(D)|; throws outside the bounds.
inline double measure_R2(const SimState& s, const Equilibrium& eq, const DilutionBounds& bounds) {
    return log_deviation(s.density, eq) + std::fabs(phi_inv(s.dilution, bounds));
}

struct EnvelopeReport {
    double rate = 0.0;
    double constant = 0.0;   // C = max measure(t) e^{rate t}
    double t_at_max = 0.0;
    bool finite = false;
    bool early = false;      // C attained in the first half of the run
    bool passed = false;
};

/// Checks measure(t) <= C e^{-rate t} with C = max measure e^{rate t}. The
/// shape is accepted when C is finite and attained in the first half of the
/// run, so the envelope is not being driven by a late, slower tail.
inline EnvelopeReport decay_bound_check(const std::vector<double>& times, const std::vector<double>& values,
                                        double rate) {
    EnvelopeReport rep;
    rep.rate = rate;
    if (times.empty() || times.size() != values.size()) return rep;
    std::size_t at = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double scaled = values[i] * std::exp(rate * times[i]);
        if (std::isnan(scaled)) return rep;
        if (scaled > best) {
            best = scaled;
            at = i;
        }
    }
    rep.constant = best;
    rep.t_at_max = times[at];
    rep.finite = std::isfinite(best);
    const double span = times.back() - times.front();
    rep.early = rep.t_at_max - times.front() <= 0.5 * span;
    rep.passed = rep.finite && (rate == 0.0 || rep.early);
    return rep;
}

enum class Measure { R1, R2 };

inline EnvelopeReport decay_bound_check(const Trajectory& traj, Measure m, double rate) {
    return decay_bound_check(traj.times(), traj.series(m == Measure::R1 ? &Record::R1 : &Record::R2), rate);
}

struct ConstraintReport {
    double min_dilution = 0.0;
    double max_dilution = 0.0;
    bool positive = false;
    std::optional<bool> inside_interval;   // when an interval is audited
    std::optional<bool> safety_envelope;   // D(t) >= D(0) e^{-k3 t} (1 - tol), when k3 given
};

inline ConstraintReport constraint_audit(const Trajectory& traj, std::optional<DilutionInterval> interval = {},
                                         std::optional<double> k3 = {}, double tol = 1e-6) {
    ConstraintReport rep;
    if (traj.records.empty()) return rep;
    rep.min_dilution = std::numeric_limits<double>::infinity();
    rep.max_dilution = -std::numeric_limits<double>::infinity();
    for (const auto& r : traj.records) {
        rep.min_dilution = std::min(rep.min_dilution, r.dilution);
        rep.max_dilution = std::max(rep.max_dilution, r.dilution);
    }
    rep.positive = rep.min_dilution > 0.0;
    if (interval)
        rep.inside_interval = rep.min_dilution > interval->lower && rep.max_dilution < interval->upper;
    if (k3) {
        const double d0 = traj.records.front().dilution;
        bool ok = true;
        for (const auto& r : traj.records)
            if (r.dilution < d0 * std::exp(-*k3 * r.t) * (1.0 - tol)) ok = false;
        rep.safety_envelope = ok;
    }
    return rep;
}

/// Largest |y - y*| / y* over records with t >= t_from.
inline double output_error_after(const Trajectory& traj, double ystar, double t_from) {
    double worst = 0.0;
    for (const auto& r : traj.records)
        if (r.t >= t_from) worst = std::max(worst, std::fabs(r.output - ystar) / ystar);
    return worst;
}

/// Largest |eta - eta_oracle| / (1 + |eta(0)|) over the records.
inline double eta_oracle_error(const Trajectory& traj) {
    if (traj.records.empty()) return 0.0;
    const double scale = 1.0 + std::fabs(traj.records.front().eta);
    double worst = 0.0;
    for (const auto& r : traj.records) worst = std::max(worst, std::fabs(r.eta - r.eta_oracle) / scale);
    return worst;
}

}  // namespace chemostat
