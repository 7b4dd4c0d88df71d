#pragma once

// Steady state of the chemostat: the Lotka-Sharpe dilution D*, the
// equilibrium density f*, the adjoint weight pi, normalized kernels and the
// numerical certificate for the birth-kernel contraction condition.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chemostat/model.hpp"

namespace chemostat {

class EquilibriumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Equilibrium {
    ModelParams model;
    double dilution;            // D*
    AgeFunction profile;        // f*(a) = M exp(-D* a - int_0^a mu)
    double output;              // y* = int p f*
    AgeFunction adjoint;        // pi(a)
    double adjoint_norm;        // int pi f*  (= int a k f* up to quadrature)
    AgeFunction kernel;         // k~(a) = k(a) f*(a) / f*(0)
    AgeFunction kernel_tail;    // int_a^A k~(s) ds
    AgeFunction sensor_weight;  // g(a) = p f* / y*
    AgeFunction sensor_drift;   // p~(a) = p'(a) - p(a) mu(a)
    double mean_age;            // r^-1 = int a k~(a) da
    double lemma_constant;      // c1 of the v1 bound
};

struct KernelCert {
    double lambda;
    double sigma;
    double rho0;       // contraction value at sigma = 0
    double rho_sigma;  // contraction value at the certified sigma (< 1)
};

namespace detail {

// exp(-D a - int_0^a mu) at the nodes
inline AgeFunction survival(const ModelParams& m, double dilution) {
    auto cum_mu = cumulative_quad(m.mortality);
    std::vector<double> v(cum_mu.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-dilution * m.grid.node(i) - cum_mu[i]);
    return AgeFunction(m.grid, std::move(v));
}

}  // namespace detail

/// int_0^A k(a) exp(-D a - int_0^a mu) da, strictly decreasing in D.
inline double lotka_sharpe_value(const ModelParams& m, double dilution) {
    return weighted_quad(m.birth, detail::survival(m, dilution));
}

/// Root D* >= 0 of lotka_sharpe_value(D) = 1 by bisection.
inline double solve_lotka_sharpe(const ModelParams& m) {
    const double at_zero = lotka_sharpe_value(m, 0.0);
    if (at_zero < 1.0)
        throw EquilibriumError("population not viable: int k exp(-int mu) = " + std::to_string(at_zero) +
                               " < 1");
    if (at_zero - 1.0 < 1e-14) return 0.0;

    double lo = 0.0, hi = 1.0;
    while (lotka_sharpe_value(m, hi) >= 1.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw EquilibriumError("Lotka-Sharpe bracket search diverged");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (lotka_sharpe_value(m, mid) >= 1.0)
            lo = mid;
        else
            hi = mid;
    }
    double root = 0.5 * (lo + hi);
    if (std::fabs(lotka_sharpe_value(m, root) - 1.0) >= 1e-10)
        throw EquilibriumError("Lotka-Sharpe bisection did not reach tolerance");
    return root;
}

inline Equilibrium build_equilibrium(const ModelParams& m) {
    const double dstar = solve_lotka_sharpe(m);
    const AgeGrid& grid = m.grid;
    AgeFunction fstar = detail::survival(m, dstar).map([&](double s) { return m.scale * s; });

    AgeFunction k_f = m.birth.zip(fstar, [](double k, double f) { return k * f; });
    AgeFunction adjoint = tail_quad(k_f).zip(fstar, [](double t, double f) { return t / f; });
    const double adjoint_norm = weighted_quad(adjoint, fstar);

    const double f0 = fstar.front();
    AgeFunction kernel = k_f.map([f0](double v) { return v / f0; });
    AgeFunction kernel_tail = tail_quad(kernel);
    AgeFunction ages = AgeFunction::sample(grid, [](double a) { return a; });
    const double mean_age = weighted_quad(ages, kernel);

    const double ystar = weighted_quad(m.sensor, fstar);
    AgeFunction g = m.sensor.zip(fstar, [ystar](double p, double f) { return p * f / ystar; });
    AgeFunction drift = ptilde(m);

    // sqrt(c1) y* / 2 = p(A) f*(A) + p(0) f*(0) + int |p~| f*
    const double boundary_sum = m.sensor.back() * fstar.back() + m.sensor.front() * fstar.front() +
                                weighted_quad(drift.map([](double v) { return std::fabs(v); }), fstar);
    const double root_c1 = 2.0 * boundary_sum / ystar;

    return Equilibrium{m,
                       dstar,
                       std::move(fstar),
                       ystar,
                       std::move(adjoint),
                       adjoint_norm,
                       std::move(kernel),
                       std::move(kernel_tail),
                       std::move(g),
                       std::move(drift),
                       mean_age,
                       root_c1 * root_c1};
}

/// rho(lambda, sigma) = int_0^A |k~(a) - r lambda int_a^A k~| exp(sigma a) da.
inline double kernel_contraction(const AgeFunction& kernel, const AgeFunction& kernel_tail, double mean_age,
                                 double lambda, double sigma) {
    const double r_lambda = lambda / mean_age;
    const auto& grid = kernel.grid();
    double sum = 0.0;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        double a = grid.node(i);
        sum += grid.weight(i) * std::fabs(kernel[i] - r_lambda * kernel_tail[i]) * std::exp(sigma * a);
    }
    return sum;
}

inline double kernel_contraction(const Equilibrium& eq, double lambda, double sigma) {
    return kernel_contraction(eq.kernel, eq.kernel_tail, eq.mean_age, lambda, sigma);
}

/// {0.05 j : j = 1..100}
inline std::vector<double> default_lambda_grid() {
    std::vector<double> g(100);
    for (int j = 1; j <= 100; ++j) g[j - 1] = 0.05 * j;
    return g;
}

struct CertifyOptions {
    double sigma_max = 5.0;
    double margin = 1e-3;
};

/// Picks the lambda minimizing rho(lambda, 0), then the largest sigma in
/// (0, sigma_max] with rho(lambda, sigma) <= 1 - margin.
inline KernelCert certify_kernel(const AgeFunction& kernel, const AgeFunction& kernel_tail, double mean_age,
                                 const std::vector<double>& lambda_grid, CertifyOptions opt = {}) {
    if (lambda_grid.empty()) throw EquilibriumError("empty lambda grid");
    double best_lambda = lambda_grid.front();
    double best_rho = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid) {
        double rho = kernel_contraction(kernel, kernel_tail, mean_age, lambda, 0.0);
        if (rho < best_rho) {
            best_rho = rho;
            best_lambda = lambda;
        }
    }
    const double target = 1.0 - opt.margin;
    if (!(best_rho < target))
        throw EquilibriumError("kernel contraction not certified: min rho(lambda, 0) = " +
                               std::to_string(best_rho));

    auto rho_at = [&](double s) { return kernel_contraction(kernel, kernel_tail, mean_age, best_lambda, s); };
    double sigma = opt.sigma_max;
    if (rho_at(sigma) > target) {
        double lo = 0.0, hi = opt.sigma_max;
        for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi);
            (rho_at(mid) <= target ? lo : hi) = mid;
        }
        sigma = lo;
    }
    return KernelCert{best_lambda, sigma, best_rho, rho_at(sigma)};
}

inline KernelCert certify_assumption1(const Equilibrium& eq,
                                      const std::vector<double>& lambda_grid = default_lambda_grid(),
                                      CertifyOptions opt = {}) {
    return certify_kernel(eq.kernel, eq.kernel_tail, eq.mean_age, lambda_grid, opt);
}

}  // namespace chemostat
