// chemostat: run scenarios, print equilibria and kernel certificates.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "chemostat/chemostat.hpp"

namespace {

using namespace chemostat;

Scenario load_with_grid(const std::string& name, std::optional<std::size_t> grid) {
    Scenario s = load_scenario(name);
    if (grid) s.model.cells = *grid;
    return s;
}

struct Outcome {
    std::optional<RunResult> result;
    std::string error;
};

int cmd_run(const std::vector<std::string>& names, const std::string& out_dir, bool strict,
            std::optional<std::size_t> grid, std::size_t jobs) {
    std::vector<Outcome> outcomes(names.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < names.size(); i = next++) {
            try {
                Scenario s = load_with_grid(names[i], grid);
                if (!out_dir.empty())
                    s.outputs.directory =
                        names.size() == 1 ? out_dir : (std::filesystem::path(out_dir) / s.name).string();
                RunResult r = run_scenario(s);
                write_outputs(r, r.scenario.outputs.directory);
                outcomes[i].result = std::move(r);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, names.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int status = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.result) {
            std::cerr << "error: " << names[i] << ": " << o.error << '\n';
            status = 1;
            continue;
        }
        const auto& r = *o.result;
        for (const auto& w : r.warnings) std::cerr << "warning: " << r.scenario.name << ": " << w << '\n';
        std::printf("%s: D*=%.6g y*=%.6g sigma=%.4g y(t_end)/y*-1=%.3e  [%s] %.2fs -> %s\n",
                    r.scenario.name.c_str(), r.prepared.equilibrium.dilution, r.prepared.equilibrium.output,
                    r.prepared.sigma,
                    r.trajectory.records.back().output / r.prepared.equilibrium.output - 1.0,
                    r.all_passed() ? "audits pass" : "AUDIT FAILURE", r.seconds,
                    r.scenario.outputs.directory.c_str());
        for (const auto& a : r.audits)
            if (!a.passed)
                std::printf("  failed %s: value %.6g vs %.6g\n", a.name.c_str(), a.value, a.threshold);
        if (strict && !r.all_passed() && status == 0) status = 2;
    }
    return status;
}

int cmd_equilibrium(const std::string& name, std::optional<std::size_t> grid) {
    const Scenario s = load_with_grid(name, grid);
    const Prepared p = prepare(s);
    const auto& eq = p.equilibrium;
    std::printf("scenario   %s\n", s.name.c_str());
    std::printf("cells      %zu\n", eq.model.grid.cells());
    std::printf("D*         %.10g\n", eq.dilution);
    std::printf("y*         %.10g\n", eq.output);
    std::printf("M          %.10g\n", eq.model.scale);
    std::printf("r^-1       %.10g\n", eq.mean_age);
    std::printf("c1         %.10g\n", eq.lemma_constant);
    std::printf("lambda     %.10g\n", p.certificate.lambda);
    std::printf("sigma      %.10g\n", p.certificate.sigma);
    std::printf("rho(0)     %.10g\n", p.certificate.rho0);
    std::printf("rho(sigma) %.10g\n", p.certificate.rho_sigma);
    return 0;
}

int cmd_certify(const std::string& name, std::optional<std::size_t> grid) {
    const Scenario s = load_with_grid(name, grid);
    const AgeGrid g(s.model.max_age, s.model.cells);
    const Equilibrium eq =
        build_equilibrium(make_model(g, s.model.mortality, s.model.birth, s.model.sensor, s.model.scale));
    const KernelCert c = certify_assumption1(eq);
    std::printf("lambda %.10g sigma %.10g rho0 %.10g rho_sigma %.10g\n", c.lambda, c.sigma, c.rho0, c.rho_sigma);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Age-structured chemostat simulator with dilution-rate feedback"};
    app.require_subcommand(1);

    std::vector<std::string> names;
    std::string out_dir;
    bool strict = false;
    std::optional<std::size_t> grid;
    std::size_t jobs = 1;

    auto* run = app.add_subcommand("run", "simulate scenarios and write CSV/JSON outputs");
    run->add_option("scenario", names, "built-in name (fig1..fig4, sec7, sec7-bounded) or scenario file")
        ->required();
    run->add_option("--out", out_dir, "output directory (per-scenario subdirectories when several)");
    run->add_flag("--strict", strict, "exit with status 2 if any audit fails");
    run->add_option("--grid", grid, "override the number of age cells")->check(CLI::Range(8, 10000000));
    run->add_option("--jobs", jobs, "scenarios run concurrently")->check(CLI::PositiveNumber);

    std::string single;
    auto* equilibrium = app.add_subcommand("equilibrium", "print D*, y*, c1 and the kernel certificate");
    equilibrium->add_option("scenario", single)->required();
    equilibrium->add_option("--grid", grid)->check(CLI::Range(8, 10000000));
    auto* certify = app.add_subcommand("certify", "search the kernel contraction certificate only");
    certify->add_option("scenario", single)->required();
    certify->add_option("--grid", grid)->check(CLI::Range(8, 10000000));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(names, out_dir, strict, grid, jobs);
        if (*equilibrium) return cmd_equilibrium(single, grid);
        if (*certify) return cmd_certify(single, grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
