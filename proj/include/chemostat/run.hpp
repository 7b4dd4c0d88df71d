#pragma once

// Scenario execution, audits and artifact emission (timeseries CSV,
// profile CSV, summary JSON).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chemostat/scenario.hpp"
#include "json.hpp"

namespace chemostat {

struct Audit {
    std::string name;
    bool passed;
    double value;      // measured quantity
    double threshold;  // what it was compared against
};

struct RunResult {
    Scenario scenario;
    Prepared prepared;
    Trajectory trajectory;
    std::vector<Audit> audits;
    std::vector<std::string> warnings;
    double seconds = 0.0;

    bool all_passed() const {
        for (const auto& a : audits)
            if (!a.passed) return false;
        return true;
    }
};

/// Simpson-probe renewal residual above which a run is flagged as under-resolved.
inline double bc_warning_level(const SolverConfig& cfg) { return std::max(cfg.tol_bc, 1e-6); }

inline std::vector<Audit> audit_run(const Trajectory& traj, const Prepared& prep) {
    std::vector<Audit> out;
    const auto& eq = prep.equilibrium;
    const double sigma = prep.sigma;

    out.push_back({"pi_oracle", eta_oracle_error(traj) <= 1e-4, eta_oracle_error(traj), 1e-4});
    const double y_err = std::fabs(traj.records.back().output - eq.output) / eq.output;
    out.push_back({"output_convergence", y_err < 0.01, y_err, 0.01});
    double min_f = std::numeric_limits<double>::infinity();
    for (const auto& r : traj.records) min_f = std::min(min_f, r.min_density);
    out.push_back({"density_positive", min_f > 0.0, min_f, 0.0});

    auto lyap = [&](Functional f) {
        try {
            const auto rep = decay_audit(traj, f);
            const double threshold = rep.theoretical_rate > 0.0 ? -(1.0 - rep.margin) * rep.theoretical_rate : 0.0;
            out.push_back({std::string(functional_name(f)) + "_decay", rep.passed, rep.slope, threshold});
        } catch (const LyapunovError&) {
            out.push_back({std::string(functional_name(f)) + "_decay", false, kNotApplicable, kNotApplicable});
        }
    };
    auto envelope = [&](Measure m, double rate) {
        const auto rep = decay_bound_check(traj, m, rate);
        const bool ok = rep.passed && rep.constant < 1e3;
        out.push_back({std::string(m == Measure::R1 ? "R1" : "R2") + "_envelope", ok, rep.constant, 1e3});
    };
    auto interval = [&](const DilutionInterval& iv) {
        const auto rep = constraint_audit(traj, iv);
        const double gap = std::min(rep.min_dilution - iv.lower, iv.upper - rep.max_dilution);
        out.push_back({"dilution_in_interval", rep.inside_interval.value_or(false), gap, 0.0});
    };
    auto positive = [&] {
        const auto rep = constraint_audit(traj);
        out.push_back({"dilution_positive", rep.positive, rep.min_dilution, 0.0});
    };
    auto u3_bound = [&](double k1, double k2, double k3) {
        const auto& r = traj.records;
        const double limit = r.front().U3 + U3_allowance(k1, k2, k3, sigma, eq.model.grid.length(), r.front().G);
        double peak = 0.0;
        for (const auto& rec : r) peak = std::max(peak, rec.U3);
        out.push_back({"U3_bound", peak <= limit, peak, limit});
    };

    const bool certified = std::isfinite(sigma) && sigma > 0.0;
    if (certified) lyap(Functional::G);
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, BackstepFull> || std::is_same_v<T, BackstepConstPMu>) {
                if (certified) {
                    lyap(Functional::V1);
                    envelope(Measure::R1, std::min({g.k1 / 2.0, g.k2, sigma}) / 2.0);
                }
            } else if constexpr (std::is_same_v<T, RelaxedOutput>) {
                if (certified) {
                    lyap(Functional::V2);
                    envelope(Measure::R1, std::min({g.k1 / 2.0, g.k2 / 2.0, sigma}) / 2.0);
                }
            } else if constexpr (std::is_same_v<T, SafetyFiltered>) {
                const auto rep = constraint_audit(traj, std::nullopt, g.k3);
                out.push_back({"dilution_positive", rep.positive, rep.min_dilution, 0.0});
                out.push_back({"safety_envelope", rep.safety_envelope.value_or(false), rep.min_dilution, 0.0});
            } else if constexpr (std::is_same_v<T, ConstrainedOutput> || std::is_same_v<T, PositiveOnly>) {
                if constexpr (std::is_same_v<T, ConstrainedOutput>)
                    interval(g.interval);
                else
                    positive();
                if (certified) {
                    envelope(Measure::R2, std::min({g.k1 / 2.0, g.k2 / 2.0, sigma}) / 2.0);
                    u3_bound(g.k1, g.k2, g.k3);
                }
            } else {
                if constexpr (std::is_same_v<T, LyapFullStateBounded>)
                    interval(g.interval);
                else
                    positive();
                lyap(Functional::Vtheta);
                double mismatch = kNotApplicable;
                try {
                    mismatch = vtheta_rate_mismatch(traj);
                } catch (const LyapunovError&) {
                }
                out.push_back({"Vtheta_rate_match", mismatch <= 0.02, mismatch, 0.02});
            }
        },
        traj.controller);
    return out;
}

inline RunResult run_scenario(const Scenario& s) {
    const auto start = std::chrono::steady_clock::now();
    Prepared prep = prepare(s);
    SolverConfig cfg = s.solver;
    cfg.sigma = prep.sigma;
    Trajectory traj = simulate(prep.initial_density, prep.initial_dilution, s.controller, prep.equilibrium, cfg);
    std::vector<Audit> audits = audit_run(traj, prep);

    std::vector<std::string> warnings;
    const double probe = traj.states.empty()
                             ? 0.0
                             : boundary_residual_simpson(traj.states.back().density, prep.equilibrium.model);
    if (probe > bc_warning_level(cfg)) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "renewal condition resolved only to %.3g (Simpson probe) on %zu cells; refine the grid",
                      probe, s.model.cells);
        warnings.emplace_back(buf);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return RunResult{s, std::move(prep), std::move(traj), std::move(audits), std::move(warnings), seconds};
}

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline nlohmann::json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace detail

inline void write_timeseries(std::ostream& out, const Trajectory& traj) {
    out << "# t[time] D[1/time] u[1/time^2] y[output] eta zeta z delta v v1 G V1 V2 U3 Vtheta Vtheta_rate"
           " R1 R2 eta_oracle bc_residual; nan = not defined for this controller\n";
    out << "t,D,u,y,eta,zeta,z,delta,v,v1,G,V1,V2,U3,Vtheta,Vtheta_rate,R1,R2,eta_oracle,bc_residual\n";
    using detail::fmt;
    for (const auto& r : traj.records) {
        out << fmt(r.t) << ',' << fmt(r.dilution) << ',' << fmt(r.input) << ',' << fmt(r.output) << ','
            << fmt(r.eta) << ',' << fmt(r.zeta) << ',' << fmt(r.z) << ',' << fmt(r.delta) << ',' << fmt(r.v) << ','
            << fmt(r.v1) << ',' << fmt(r.G) << ',' << fmt(r.V1) << ',' << fmt(r.V2) << ',' << fmt(r.U3) << ','
            << fmt(r.Vtheta) << ',' << fmt(r.Vtheta_rate) << ',' << fmt(r.R1) << ',' << fmt(r.R2) << ','
            << fmt(r.eta_oracle) << ',' << fmt(r.bc_residual) << '\n';
    }
}

/// Index of the recorded state closest to each requested time.
inline std::vector<std::size_t> profile_indices(const Trajectory& traj, const std::vector<double>& times) {
    std::vector<std::size_t> idx;
    if (traj.states.empty()) return idx;
    for (double t : times) {
        if (t < traj.states.front().time - 1e-12 || t > traj.states.back().time + 1e-12) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < traj.states.size(); ++i)
            if (std::fabs(traj.states[i].time - t) < std::fabs(traj.states[best].time - t)) best = i;
        if (idx.empty() || idx.back() != best) idx.push_back(best);
    }
    return idx;
}

inline void write_profiles(std::ostream& out, const Trajectory& traj, const Equilibrium& eq,
                           const std::vector<double>& times) {
    const auto idx = profile_indices(traj, times);
    using detail::fmt;
    out << "# a[time] f*(a) then f(a,t) at the listed times [density]\n";
    out << "a,fstar";
    for (std::size_t i : idx) out << ",t=" << fmt(traj.states[i].time);
    out << '\n';
    const auto& grid = eq.model.grid;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out << fmt(grid.node(j)) << ',' << fmt(eq.profile[j]);
        for (std::size_t i : idx) out << ',' << fmt(traj.states[i].density[j]);
        out << '\n';
    }
}

inline nlohmann::json controller_json(const ControllerSpec& spec) {
    nlohmann::json j;
    j["type"] = std::string(variant_name(spec));
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, LyapFullState> || std::is_same_v<T, LyapFullStateBounded>) {
                j["c1"] = g.c1;
                j["c2"] = g.c2;
                j["theta"] = g.theta;
            } else {
                j["k1"] = g.k1;
                j["k2"] = g.k2;
                if constexpr (requires { g.k3; }) j["k3"] = g.k3;
            }
            if constexpr (requires { g.interval; })
                j["interval"] = {g.interval.lower, detail::number_or_null(g.interval.upper)};
        },
        spec);
    return j;
}

inline nlohmann::json summary_json(const RunResult& r) {
    const auto& eq = r.prepared.equilibrium;
    const auto& cert = r.prepared.certificate;
    const auto& traj = r.trajectory;
    using detail::number_or_null;
    nlohmann::json j;
    j["scenario"] = r.scenario.name;
    j["equilibrium"] = {{"Dstar", eq.dilution},
                        {"ystar", eq.output},
                        {"c1", eq.lemma_constant},
                        {"rinv", eq.mean_age},
                        {"M", eq.model.scale},
                        {"lambda", number_or_null(cert.lambda)},
                        {"sigma", number_or_null(r.prepared.sigma)},
                        {"rho0", number_or_null(cert.rho0)},
                        {"rho_sigma", number_or_null(cert.rho_sigma)}};
    j["controller"] = controller_json(r.scenario.controller);
    j["run"] = {{"cells", eq.model.grid.cells()},
                {"A", eq.model.grid.length()},
                {"dt", eq.model.grid.step()},
                {"t_end", r.scenario.solver.t_end},
                {"steps", traj.steps},
                {"records", traj.records.size()},
                {"D0", r.prepared.initial_dilution},
                {"initial_bc_residual", traj.initial_bc_residual},
                {"seconds", r.seconds}};
    const auto& last = traj.records.back();
    double min_d = std::numeric_limits<double>::infinity(), max_d = -min_d;
    for (const auto& rec : traj.records) {
        min_d = std::min(min_d, rec.dilution);
        max_d = std::max(max_d, rec.dilution);
    }
    j["final"] = {{"t", last.t},
                  {"D", last.dilution},
                  {"y", last.output},
                  {"y_rel_error", std::fabs(last.output - eq.output) / eq.output},
                  {"min_D", min_d},
                  {"max_D", max_d}};
    nlohmann::json audits = nlohmann::json::array();
    for (const auto& a : r.audits)
        audits.push_back({{"name", a.name},
                          {"passed", a.passed},
                          {"value", number_or_null(a.value)},
                          {"threshold", number_or_null(a.threshold)}});
    j["audits"] = audits;
    j["passed"] = r.all_passed();
    j["warnings"] = r.warnings;
    return j;
}

/// Writes timeseries.csv, profiles.csv and summary.json into `dir`.
inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("timeseries.csv");
        write_timeseries(f, r.trajectory);
    }
    {
        auto f = open("profiles.csv");
        write_profiles(f, r.trajectory, r.prepared.equilibrium, r.scenario.outputs.profile_times);
    }
    {
        auto f = open("summary.json");
        f << summary_json(r).dump(2) << '\n';
    }
}

}  // namespace chemostat
