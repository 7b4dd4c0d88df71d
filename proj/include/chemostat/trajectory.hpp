#pragma once

// Recorded closed-loop run: snapshots plus per-record diagnostics.

#include <cstddef>
#include <limits>
#include <vector>

#include "chemostat/controllers.hpp"

namespace chemostat {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// Diagnostics at one record point. Entries that do not apply to the
/// controller in the loop are NaN.
struct Record {
    double t = 0.0;
    double dilution = 0.0;
    double input = 0.0;          // u at this instant
    double output = 0.0;         // y
    double eta = 0.0;            // ln Pi(f)
    double eta_oracle = 0.0;     // ln Pi(f0) + int_0^t (D* - D)
    double delta = kNotApplicable;  // D - D* - k1 ln(y/y*)
    double zeta = kNotApplicable;
    double z = kNotApplicable;      // zeta - c1 eta
    double v = 0.0;
    double v1 = 0.0;
    double G = 0.0;
    double V1 = kNotApplicable;
    double V2 = kNotApplicable;
    double U3 = kNotApplicable;
    double Vtheta = kNotApplicable;
    double Vtheta_rate = kNotApplicable;  // analytic dV/dt
    double R1 = 0.0;
    double R2 = kNotApplicable;
    double bc_residual = 0.0;
    double psi_consistency = 0.0;   // psi(0) - int k~ psi
    double min_density = 0.0;
};

struct Trajectory {
    ControllerSpec controller;
    double dstar = 0.0;
    double sigma = 0.0;
    double initial_bc_residual = 0.0;
    std::size_t steps = 0;
    std::vector<Record> records;
    std::vector<SimState> states;  // aligned with records when kept

    std::vector<double> times() const {
        std::vector<double> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.t);
        return out;
    }

    template <class Field>
    std::vector<double> series(Field field) const {
        std::vector<double> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.*field);
        return out;
    }
};

}  // namespace chemostat
