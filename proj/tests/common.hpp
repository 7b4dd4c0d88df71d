#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>

#include "chemostat/chemostat.hpp"

namespace testing {

using namespace chemostat;

// Values of the continuous reference model (k = a, mu = 1/(20-5a), p = 1 + a^2/10,
// A = 2) from adaptive high-precision quadrature, independent of the grid code.
inline constexpr double kDstar = 0.483678507878076;
inline constexpr double kYstarM8 = 10.7153447263412;
inline constexpr double kYstarM32 = 42.8613789053647;
inline constexpr double kPiF0M8 = 1.04240112186185;
inline constexpr double kPiF0M32 = 0.260600280465463;
inline constexpr double kY0 = 11.1499042614956;
inline constexpr double kC1 = 5.61643256730817;
inline constexpr double kRinv = 1.20196869982847;

inline ModelParams paper_model(std::size_t cells = 2000, double scale = 8.0) {
    return make_model(AgeGrid(2.0, cells), ProfileSource::expression("1/(20-5*a)"), ProfileSource::expression("a"),
                      ProfileSource::expression("1 + a^2/10"), scale);
}

inline Equilibrium paper_equilibrium(std::size_t cells = 2000, double scale = 8.0) {
    return build_equilibrium(paper_model(cells, scale));
}

inline AgeFunction paper_initial(const Equilibrium& eq) { return initial_profile(InitialSpec{}, eq); }

/// Random smooth positive profile f* (1 + sum of a few modes) with f(0) reset
/// so the renewal condition holds exactly.
inline AgeFunction random_admissible(const Equilibrium& eq, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> amp(-0.3, 0.3), freq(0.5, 6.0), scale(0.2, 5.0);
    const double a1 = amp(rng), a2 = amp(rng), w1 = freq(rng), w2 = freq(rng), c = scale(rng);
    const auto& grid = eq.model.grid;
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = grid.node(i);
        v[i] = c * eq.profile[i] * (1.0 + a1 * std::sin(w1 * a) + a2 * std::cos(w2 * a));
    }
    double births = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) births += grid.weight(i) * eq.model.birth[i] * v[i];
    v[0] = births / (1.0 - grid.weight(0) * eq.model.birth.front());
    return AgeFunction(grid, std::move(v));
}

/// Random history with values in (lo, hi).
inline AgeFunction random_history(const AgeGrid& grid, std::mt19937_64& rng, double lo = -0.9, double hi = 3.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0), freq(0.2, 8.0), phase(0.0, 6.3);
    const double w = freq(rng), ph = phase(rng), mix = u(rng);
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double smooth = 0.5 + 0.5 * std::sin(w * grid.node(i) + ph);
        const double s = mix * smooth + (1.0 - mix) * u(rng);
        v[i] = lo + (hi - lo) * (0.001 + 0.998 * s);
    }
    return AgeFunction(grid, std::move(v));
}

inline SimState state_of(const AgeFunction& f, double d) { return SimState{f, d, 0.0}; }

/// Built-in scenario run at the given resolution, memoised per process.
inline const RunResult& builtin_run(const std::string& name, std::size_t cells = 2000) {
    static std::map<std::pair<std::string, std::size_t>, RunResult> cache;
    auto key = std::make_pair(name, cells);
    auto it = cache.find(key);
    if (it == cache.end()) {
        Scenario s = *builtin_scenario(name);
        s.model.cells = cells;
        it = cache.emplace(key, run_scenario(s)).first;
    }
    return it->second;
}

}  // namespace testing
