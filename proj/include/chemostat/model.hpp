#pragma once

// Age grid, sampled age functions, trapezoid quadrature and the model
// parameter container (mortality, birth kernel, sensor kernel, scale M).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chemostat/exprfn.hpp"

namespace chemostat {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform grid a_i = i * (A / n), i = 0..n.
class AgeGrid {
public:
    AgeGrid(double max_age, std::size_t cells) : length_(max_age), cells_(cells) {
        if (!(max_age > 0.0) || !std::isfinite(max_age))
            throw ModelError("age grid: maximum age must be positive and finite");
        if (cells < 8) throw ModelError("age grid: at least 8 cells required");
    }

    double length() const noexcept { return length_; }
    std::size_t cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_ + 1; }
    double step() const noexcept { return length_ / static_cast<double>(cells_); }
    double node(std::size_t i) const noexcept {
        return i == cells_ ? length_ : static_cast<double>(i) * step();
    }

    /// Trapezoid weight of node i.
    double weight(std::size_t i) const noexcept {
        return (i == 0 || i == cells_) ? 0.5 * step() : step();
    }

    friend bool operator==(const AgeGrid&, const AgeGrid&) = default;

private:
    double length_;
    std::size_t cells_;
};

/// A real function of age sampled at the nodes of an AgeGrid.
class AgeFunction {
public:
    AgeFunction(AgeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ModelError("age function: value count does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw ModelError("age function: non-finite value");
    }

    static AgeFunction constant(AgeGrid grid, double value) {
        return AgeFunction(grid, std::vector<double>(grid.size(), value));
    }

    template <class F>
    static AgeFunction sample(AgeGrid grid, F&& fn) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.node(i));
        return AgeFunction(grid, std::move(v));
    }

    const AgeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double front() const noexcept { return values_.front(); }
    double back() const noexcept { return values_.back(); }
    std::span<const double> values() const noexcept { return values_; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

    /// Nodewise combination with another function on the same grid.
    template <class Op>
    AgeFunction zip(const AgeFunction& other, Op op) const {
        require_same_grid(other);
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(values_[i], other.values_[i]);
        return AgeFunction(grid_, std::move(v));
    }

    template <class Op>
    AgeFunction map(Op op) const {
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(values_[i]);
        return AgeFunction(grid_, std::move(v));
    }

    void require_same_grid(const AgeFunction& other) const {
        if (!(grid_ == other.grid_)) throw ModelError("age functions live on different grids");
    }

private:
    AgeGrid grid_;
    std::vector<double> values_;
};

/// Composite trapezoid approximation of the integral over [0, A].
inline double quad(const AgeFunction& fn) {
    const auto& g = fn.grid();
    const std::size_t n = g.cells();
    double interior = 0.0;
    for (std::size_t i = 1; i < n; ++i) interior += fn[i];
    return g.step() * (interior + 0.5 * (fn[0] + fn[n]));
}

/// Trapezoid approximation of the integral of w * fn over [0, A].
inline double weighted_quad(const AgeFunction& w, const AgeFunction& fn) {
    w.require_same_grid(fn);
    const auto& g = fn.grid();
    const std::size_t n = g.cells();
    double interior = 0.0;
    for (std::size_t i = 1; i < n; ++i) interior += w[i] * fn[i];
    return g.step() * (interior + 0.5 * (w[0] * fn[0] + w[n] * fn[n]));
}

/// Composite Simpson value of the integral of w * fn; falls back to trapezoid
/// on odd cell counts. Used only as an independent accuracy probe.
inline double weighted_simpson(const AgeFunction& w, const AgeFunction& fn) {
    w.require_same_grid(fn);
    const std::size_t n = fn.grid().cells();
    if (n % 2 != 0) return weighted_quad(w, fn);
    double s = w[0] * fn[0] + w[n] * fn[n];
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * w[i] * fn[i];
    return s * fn.grid().step() / 3.0;
}

/// Running trapezoid integral from 0 to each node.
inline AgeFunction cumulative_quad(const AgeFunction& fn) {
    std::vector<double> out(fn.size(), 0.0);
    const double h = fn.grid().step();
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = out[i - 1] + 0.5 * h * (fn[i - 1] + fn[i]);
    return AgeFunction(fn.grid(), std::move(out));
}

/// Running trapezoid integral from each node to A.
inline AgeFunction tail_quad(const AgeFunction& fn) {
    std::vector<double> out(fn.size(), 0.0);
    const double h = fn.grid().step();
    for (std::size_t i = out.size() - 1; i-- > 0;) out[i] = out[i + 1] + 0.5 * h * (fn[i] + fn[i + 1]);
    return AgeFunction(fn.grid(), std::move(out));
}

/// Piecewise-linear table of (age, value) pairs, ages strictly increasing.
class Table {
public:
    explicit Table(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
        if (points_.size() < 2) throw ModelError("table: at least two points required");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i].first) || !std::isfinite(points_[i].second))
                throw ModelError("table: non-finite entry");
            if (i > 0 && !(points_[i].first > points_[i - 1].first))
                throw ModelError("table: ages must be strictly increasing");
        }
    }

    double operator()(double a) const {
        constexpr double slack = 1e-12;
        if (a < points_.front().first - slack || a > points_.back().first + slack)
            throw ModelError("table: age " + std::to_string(a) + " outside tabulated range");
        auto it = std::upper_bound(points_.begin(), points_.end(), a,
                                   [](double x, const auto& p) { return x < p.first; });
        if (it == points_.begin()) return points_.front().second;
        if (it == points_.end()) return points_.back().second;
        const auto& [a1, v1] = *it;
        const auto& [a0, v0] = *(it - 1);
        return v0 + (v1 - v0) * (a - a0) / (a1 - a0);
    }

    const std::vector<std::pair<double, double>>& points() const { return points_; }

private:
    std::vector<std::pair<double, double>> points_;
};

/// A scalar profile given either as an expression in `a` or as a table.
class ProfileSource {
public:
    ProfileSource(expr::Expr e) : impl_(std::move(e)) {}  // NOLINT(google-explicit-constructor)
    ProfileSource(Table t) : impl_(std::move(t)) {}       // NOLINT(google-explicit-constructor)

    static ProfileSource expression(std::string_view src) { return ProfileSource(expr::Expr::parse(src)); }
    static ProfileSource constant(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return expression(buf);
    }

    double operator()(double a) const {
        return std::visit([a](const auto& f) { return f(a); }, impl_);
    }

    bool is_table() const { return std::holds_alternative<Table>(impl_); }

    std::string describe() const {
        if (auto* e = std::get_if<expr::Expr>(&impl_)) return e->source();
        return "<table>";
    }

    AgeFunction sample(const AgeGrid& grid) const {
        return AgeFunction::sample(grid, [this](double a) { return (*this)(a); });
    }

    /// Derivative at the nodes by central differences with step A/(10 n); one-sided
    /// second-order stencils at the end nodes so the source is never sampled outside [0, A].
    AgeFunction derivative(const AgeGrid& grid) const {
        const double h = grid.step() / 10.0;
        const auto& f = *this;
        return AgeFunction::sample(grid, [&](double a) {
            if (a < h) return (-3.0 * f(a) + 4.0 * f(a + h) - f(a + 2.0 * h)) / (2.0 * h);
            if (a > grid.length() - h) return (3.0 * f(a) - 4.0 * f(a - h) + f(a - 2.0 * h)) / (2.0 * h);
            return (f(a + h) - f(a - h)) / (2.0 * h);
        });
    }

private:
    std::variant<expr::Expr, Table> impl_;
};

/// Model kernels on a grid plus the equilibrium scale M.
struct ModelParams {
    AgeGrid grid;
    AgeFunction mortality;    // mu(a) >= 0
    AgeFunction birth;        // k(a) >= 0
    AgeFunction sensor;       // p(a) >= 0
    AgeFunction sensor_slope; // p'(a)
    double scale;             // M > 0

    bool constant_sensor_and_mortality(double rel_tol = 1e-12) const {
        auto flat = [&](const AgeFunction& f) {
            return f.max() - f.min() <= rel_tol * std::max(1.0, std::fabs(f.max()));
        };
        return flat(mortality) && flat(sensor);
    }
};

namespace detail {

inline AgeFunction sample_checked(const ProfileSource& src, const AgeGrid& grid, const char* name) {
    try {
        return src.sample(grid);
    } catch (const expr::DomainError& e) {
        throw ModelError(std::string(name) + " is not finite on [0, A]: " + e.what());
    } catch (const ModelError& e) {
        throw ModelError(std::string(name) + ": " + e.what());
    }
}

inline void require_nonnegative(const AgeFunction& f, const char* name) {
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] < 0.0)
            throw ModelError(std::string(name) + " is negative at a = " + std::to_string(f.grid().node(i)));
}

}  // namespace detail

/// Samples and validates the model kernels.
inline ModelParams make_model(const AgeGrid& grid, const ProfileSource& mortality, const ProfileSource& birth,
                              const ProfileSource& sensor, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ModelError("equilibrium scale M must be positive");
    auto mu = detail::sample_checked(mortality, grid, "mortality");
    auto k = detail::sample_checked(birth, grid, "birth kernel");
    auto p = detail::sample_checked(sensor, grid, "sensor kernel");
    detail::require_nonnegative(mu, "mortality");
    detail::require_nonnegative(k, "birth kernel");
    detail::require_nonnegative(p, "sensor kernel");
    if (!(quad(p) > 0.0)) throw ModelError("sensor kernel must have positive integral");
    AgeFunction dp = [&] {
        try {
            return sensor.derivative(grid);
        } catch (const std::exception& e) {
            throw ModelError(std::string("sensor kernel derivative: ") + e.what());
        }
    }();
    return ModelParams{grid, std::move(mu), std::move(k), std::move(p), std::move(dp), scale};
}

/// p~(a) = p'(a) - p(a) mu(a).
inline AgeFunction ptilde(const AgeFunction& p, const AgeFunction& dp, const AgeFunction& mu) {
    p.require_same_grid(dp);
    p.require_same_grid(mu);
    std::vector<double> v(p.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = dp[i] - p[i] * mu[i];
    return AgeFunction(p.grid(), std::move(v));
}

inline AgeFunction ptilde(const ModelParams& m) { return ptilde(m.sensor, m.sensor_slope, m.mortality); }

/// Population density profile, dilution rate and time.
struct SimState {
    AgeFunction density;
    double dilution;
    double time = 0.0;
};

/// |f(0) - int k f| / max(1, f(0)) with the trapezoid rule.
inline double boundary_residual(const AgeFunction& f, const ModelParams& m) {
    return std::fabs(f.front() - weighted_quad(m.birth, f)) / std::max(1.0, f.front());
}

/// Same residual with Simpson's rule. The solver enforces the trapezoid form
/// exactly, so this measures quadrature error rather than scheme consistency.
inline double boundary_residual_simpson(const AgeFunction& f, const ModelParams& m) {
    return std::fabs(f.front() - weighted_simpson(m.birth, f)) / std::max(1.0, f.front());
}

/// Throws if any node is non-positive, or (unless `initial`) the renewal
/// condition is violated beyond tol_bc.
inline void validate_state(const SimState& s, const ModelParams& m, double tol_bc, bool initial) {
    s.density.require_same_grid(m.birth);
    for (std::size_t i = 0; i < s.density.size(); ++i)
        if (!(s.density[i] > 0.0))
            throw ModelError("density must be positive; violated at a = " +
                             std::to_string(s.density.grid().node(i)));
    if (!std::isfinite(s.dilution)) throw ModelError("dilution rate must be finite");
    if (!initial && boundary_residual(s.density, m) > tol_bc)
        throw ModelError("renewal boundary condition violated beyond tolerance");
}

}  // namespace chemostat
