#pragma once

// Change of variables f -> (eta, psi) splitting the density into its
// controllable scalar mode and the integral-delay remainder, the functionals
// built on the remainder, and the dilution-interval diffeomorphism.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "chemostat/equilibrium.hpp"

namespace chemostat {

class TransformError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// y = int p f.
inline double output(const AgeFunction& f, const Equilibrium& eq) { return weighted_quad(eq.model.sensor, f); }

/// Pi(f) = int pi f / int pi f*.
inline double pi_projection(const AgeFunction& f, const Equilibrium& eq) {
    return weighted_quad(eq.adjoint, f) / eq.adjoint_norm;
}

/// psi at lag a: f(a) / (f*(a) Pi(f)) - 1.
inline AgeFunction psi_history(const AgeFunction& f, const Equilibrium& eq) {
    const double pi_f = pi_projection(f, eq);
    if (!(pi_f > 0.0)) throw TransformError("Pi(f) must be positive");
    return f.zip(eq.profile, [pi_f](double fa, double fs) { return fa / (fs * pi_f) - 1.0; });
}

/// Ergodic projection; vanishes on histories generated by admissible densities.
inline double P_functional(const AgeFunction& psi, const Equilibrium& eq) {
    return weighted_quad(psi, eq.kernel_tail) / eq.mean_age;
}

/// v(psi) = ln(1 + int g psi).
inline double v_functional(const AgeFunction& psi, const Equilibrium& eq) {
    const double arg = 1.0 + weighted_quad(eq.sensor_weight, psi);
    if (!(arg > 0.0)) throw TransformError("v functional: 1 + int g psi must be positive");
    return std::log(arg);
}

/// Residual of exact cancellation, zero at psi = 0 and on constant histories.
/// Evaluated as T3 / int p f* (1 + psi) with
///   T4 = int p f* psi / y*
///   T3 = p(A)f*(A)(T4 - psi(A)) - p(0)f*(0)(T4 - psi(0)) - T4 int p~ f* + int p~ f* psi,
/// which equals -D* - B(psi) / int p f*(1 + psi) once B(0) = -D* y* is used.
inline double v1_functional(const AgeFunction& psi, const Equilibrium& eq) {
    const auto& m = eq.model;
    const auto& fs = eq.profile;
    AgeFunction p_fs = m.sensor.zip(fs, [](double p, double f) { return p * f; });
    AgeFunction drift_fs = eq.sensor_drift.zip(fs, [](double d, double f) { return d * f; });

    const double t4 = weighted_quad(p_fs, psi) / eq.output;
    const double end_term = p_fs.back() * (t4 - psi.back());
    const double start_term = p_fs.front() * (t4 - psi.front());
    const double t3 = end_term - start_term - quad(drift_fs) * t4 + weighted_quad(drift_fs, psi);
    const double denom = eq.output * (1.0 + t4);
    if (!(denom > 0.0)) throw TransformError("v1 functional: int p f*(1 + psi) must be positive");
    return t3 / denom;
}

/// G(psi) = max |psi(a)| e^{-sigma a} / (1 + min(0, min psi)).
inline double G_functional(const AgeFunction& psi, double sigma) {
    const auto& grid = psi.grid();
    double peak = 0.0;
    double lowest = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        peak = std::max(peak, std::fabs(psi[i]) * std::exp(-sigma * grid.node(i)));
        lowest = std::min(lowest, psi[i]);
    }
    if (!(lowest > -1.0)) throw TransformError("G functional: psi must stay above -1");
    return peak / (1.0 + lowest);
}

/// Admissible dilution interval (lower, upper) around D*; upper may be +inf.
class DilutionBounds {
public:
    DilutionBounds(double lower, double upper, double dstar) : lower_(lower), upper_(upper), dstar_(dstar) {
        if (!(lower >= 0.0)) throw TransformError("dilution lower bound must be >= 0");
        if (!(lower < dstar && dstar < upper))
            throw TransformError("dilution bounds (" + std::to_string(lower) + ", " + std::to_string(upper) +
                                 ") must bracket D* = " + std::to_string(dstar));
    }

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    double dstar() const noexcept { return dstar_; }
    bool bounded_above() const noexcept { return std::isfinite(upper_); }

    double alpha() const noexcept { return upper_ - lower_; }
    double beta() const noexcept { return (upper_ - dstar_) / (dstar_ - lower_); }
    double delta1() const noexcept { return (dstar_ - lower_) / dstar_; }
    /// (D* - lower) / (upper - D*); zero when unbounded above.
    double n() const noexcept { return bounded_above() ? (dstar_ - lower_) / (upper_ - dstar_) : 0.0; }

    bool contains(double d) const noexcept { return d > lower_ && d < upper_; }

private:
    double lower_;
    double upper_;
    double dstar_;
};

/// D = Phi(zeta); Phi(0) = D*.
inline double phi(double zeta, const DilutionBounds& b) {
    if (!b.bounded_above()) return b.lower() + (b.dstar() - b.lower()) * std::exp(zeta);
    // alpha e^z / (beta + e^z), arranged to avoid overflow for large zeta
    if (zeta > 0.0) return b.lower() + b.alpha() / (b.beta() * std::exp(-zeta) + 1.0);
    const double ez = std::exp(zeta);
    return b.lower() + b.alpha() * ez / (b.beta() + ez);
}

/// zeta = Phi^{-1}(D) = ln(beta (D - lower) / (upper - D)); ln((D - lower)/(D* - lower)) when unbounded.
inline double phi_inv(double d, const DilutionBounds& b) {
    if (!b.contains(d))
        throw TransformError("dilution " + std::to_string(d) + " outside (" + std::to_string(b.lower()) + ", " +
                             std::to_string(b.upper()) + ")");
    if (!b.bounded_above()) return std::log((d - b.lower()) / (b.dstar() - b.lower()));
    return std::log(b.beta() * (d - b.lower()) / (b.upper() - d));
}

struct TransformedState {
    double eta;                 // ln Pi(f)
    AgeFunction psi;            // history, psi[i] = psi(t - a_i)
    std::optional<double> zeta; // Phi^{-1}(D) with bounds, ln(D/D*) without (if D > 0)
};

inline TransformedState transform_state(const AgeFunction& f, double dilution, const Equilibrium& eq,
                                        const std::optional<DilutionBounds>& bounds = std::nullopt) {
    std::optional<double> zeta;
    if (bounds) {
        if (bounds->contains(dilution)) zeta = phi_inv(dilution, *bounds);
    } else if (dilution > 0.0) {
        zeta = std::log(dilution / eq.dilution);
    }
    return TransformedState{std::log(pi_projection(f, eq)), psi_history(f, eq), zeta};
}

}  // namespace chemostat
