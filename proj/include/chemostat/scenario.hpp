#pragma once

// Scenario description: model kernels, initial state, controller, solver and
// output settings. Scenarios come from built-in names or from a sectioned
// key = value text file:
//
//   name = my-run
//   [model]
//   max_age = 2
//   cells = 2000
//   mortality = "1/(20-5*a)"        # expression in a, or a table [a:v, a:v, ...]
//   birth = "a"
//   sensor = "1 + a^2/10"
//   scale = 32
//   [initial]
//   density = "8 - 3*a"
//   mode_amplitude = 1              # adds sin(w a) e^{s a} f*(a)/f*(0)
//   mode_frequency = 3.82
//   mode_growth = 0.91
//   dilution = equilibrium          # or a number
//   [controller]
//   type = backstep_full            # see controller_types()
//   k1 = 1
//   k2 = 2
//   [solver]
//   t_end = 20
//   record_stride = 20
//   tol_bc = 1e-6
//   sigma = auto                    # or a number overriding the certificate
//   [outputs]
//   directory = out/my-run
//   profile_times = [0, 1, 5, 20]

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chemostat/solver.hpp"

namespace chemostat {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& origin, std::size_t line, const std::string& what)
        : std::runtime_error(origin + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct ModelSpec {
    double max_age = 2.0;
    std::size_t cells = 2000;
    ProfileSource mortality = ProfileSource::expression("1/(20-5*a)");
    ProfileSource birth = ProfileSource::expression("a");
    ProfileSource sensor = ProfileSource::expression("1 + a^2/10");
    double scale = 8.0;
};

struct InitialSpec {
    ProfileSource density = ProfileSource::expression("8 - 3*a");
    double mode_amplitude = 1.0;
    double mode_frequency = 3.82;
    double mode_growth = 0.91;
    std::optional<double> dilution;  // empty: start at D*
};

struct OutputSpec {
    std::string directory;
    std::vector<double> profile_times{0.0, 1.0, 2.0, 5.0, 10.0, 20.0};
};

struct Scenario {
    std::string name;
    ModelSpec model;
    InitialSpec initial;
    ControllerSpec controller = BackstepFull{1.0, 2.0};
    SolverConfig solver;
    std::optional<double> sigma_override;
    OutputSpec outputs;
};

inline const std::vector<std::string>& builtin_scenario_names() {
    static const std::vector<std::string> names{"fig1", "fig2", "fig3", "fig4", "sec7", "sec7-bounded"};
    return names;
}

/// Built-in scenarios share the reference kernels and initial profile and run
/// at scale M = 32 from D(0) = D*.
inline std::optional<Scenario> builtin_scenario(std::string_view name) {
    Scenario s;
    s.name = std::string(name);
    s.model.scale = 32.0;
    s.outputs.directory = "out/" + s.name;
    const DilutionInterval box{0.1, 1.5};
    if (name == "fig1")
        s.controller = BackstepFull{1.0, 2.0};
    else if (name == "fig2")
        s.controller = RelaxedOutput{1.0, 2.0};
    else if (name == "fig3")
        s.controller = SafetyFiltered{1.0, 2.0, 1.0};
    else if (name == "fig4")
        s.controller = ConstrainedOutput{1.0, 10.0, 1.0, box};
    else if (name == "sec7")
        s.controller = LyapFullState{1.0, 1.0, 1.0};
    else if (name == "sec7-bounded")
        s.controller = LyapFullStateBounded{1.0, 1.0, 1.0, box};
    else
        return std::nullopt;
    return s;
}

inline const std::vector<std::string>& controller_types() {
    static const std::vector<std::string> types{"backstep_full",   "backstep_const_pmu", "relaxed_output",
                                                "safety_filtered", "constrained_output", "positive_only",
                                                "lyap_full_state", "lyap_full_state_bounded"};
    return types;
}

namespace detail {

struct ConfigValue {
    enum class Kind { Bare, Quoted, List } kind;
    std::string text;                                  // bare word or quoted contents
    std::vector<std::pair<std::string, std::string>> items;  // list entries; .second empty for plain lists
    std::size_t line;
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

class ConfigReader {
public:
    ConfigReader(std::string origin, std::string_view text) : origin_(std::move(origin)) { read(text); }

    [[noreturn]] void fail(std::size_t line, const std::string& what) const { throw ConfigError(origin_, line, what); }

    std::optional<ConfigValue> take(const std::string& section, const std::string& key) {
        auto it = values_.find({section, key});
        if (it == values_.end()) return std::nullopt;
        ConfigValue v = it->second;
        values_.erase(it);
        return v;
    }

    double number(const ConfigValue& v) const {
        if (v.kind != ConfigValue::Kind::Bare) fail(v.line, "expected a number");
        return parse_number(v.text, v.line);
    }

    double parse_number(const std::string& text, std::size_t line) const {
        if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
        double out = 0.0;
        auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
        if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(out))
            fail(line, "malformed number '" + text + "'");
        return out;
    }

    std::optional<double> take_number(const std::string& section, const std::string& key) {
        auto v = take(section, key);
        if (!v) return std::nullopt;
        return number(*v);
    }

    ProfileSource profile(const ConfigValue& v) const {
        try {
            if (v.kind == ConfigValue::Kind::Quoted) return ProfileSource::expression(v.text);
            if (v.kind == ConfigValue::Kind::Bare) return ProfileSource::constant(parse_number(v.text, v.line));
            std::vector<std::pair<double, double>> points;
            for (const auto& [a, val] : v.items) {
                if (val.empty()) fail(v.line, "table entries must be age:value pairs");
                points.emplace_back(parse_number(a, v.line), parse_number(val, v.line));
            }
            return ProfileSource(Table(std::move(points)));
        } catch (const expr::ParseError& e) {
            fail(v.line, std::string("expression: ") + e.what());
        } catch (const ModelError& e) {
            fail(v.line, e.what());
        }
    }

    void reject_leftovers() const {
        if (values_.empty()) return;
        const auto& [key, v] = *values_.begin();
        fail(v.line, "unknown key '" + key.second + "' in section [" + key.first + "]");
    }

private:
    std::string origin_;
    std::map<std::pair<std::string, std::string>, ConfigValue> values_;

    static const std::set<std::string>& sections() {
        static const std::set<std::string> s{"", "model", "initial", "controller", "solver", "outputs"};
        return s;
    }

    void read(std::string_view text) {
        std::istringstream in{std::string(text)};
        std::string raw;
        std::string section;
        std::size_t line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const std::string body = trim(strip_comment(raw));
            if (body.empty()) continue;
            if (body.front() == '[' && body.find('=') == std::string::npos) {
                if (body.back() != ']') fail(line, "unterminated section header");
                section = trim(std::string_view(body).substr(1, body.size() - 2));
                if (!sections().count(section)) fail(line, "unknown section [" + section + "]");
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos) fail(line, "expected 'key = value'");
            std::string key = trim(std::string_view(body).substr(0, eq));
            std::string value = trim(std::string_view(body).substr(eq + 1));
            if (key.empty()) fail(line, "missing key");
            if (value.empty()) fail(line, "missing value for '" + key + "'");
            if (values_.count({section, key})) fail(line, "duplicate key '" + key + "'");
            values_.emplace(std::make_pair(section, key), parse_value(value, line));
        }
    }

    ConfigValue parse_value(const std::string& value, std::size_t line) const {
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') fail(line, "unterminated string");
            return {ConfigValue::Kind::Quoted, value.substr(1, value.size() - 2), {}, line};
        }
        if (value.front() == '[') {
            if (value.back() != ']') fail(line, "unterminated list");
            ConfigValue v{ConfigValue::Kind::List, {}, {}, line};
            std::string inner = value.substr(1, value.size() - 2);
            if (trim(inner).empty()) return v;
            std::stringstream ss(inner);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) fail(line, "empty list entry");
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    v.items.emplace_back(item, "");
                else
                    v.items.emplace_back(trim(std::string_view(item).substr(0, colon)),
                                         trim(std::string_view(item).substr(colon + 1)));
            }
            return v;
        }
        return {ConfigValue::Kind::Bare, value, {}, line};
    }
};

}  // namespace detail

/// Parses scenario text. Unspecified keys keep the reference defaults;
/// unknown keys are errors.
inline Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>") {
    detail::ConfigReader cfg(origin, text);
    Scenario s;
    if (auto v = cfg.take("", "name")) s.name = v->text;

    if (auto v = cfg.take_number("model", "max_age")) s.model.max_age = *v;
    if (auto v = cfg.take("model", "cells")) {
        const double c = cfg.number(*v);
        if (!(c >= 8.0) || c != std::floor(c) || c > 1e7) cfg.fail(v->line, "cells must be an integer >= 8");
        s.model.cells = static_cast<std::size_t>(c);
    }
    if (auto v = cfg.take("model", "mortality")) s.model.mortality = cfg.profile(*v);
    if (auto v = cfg.take("model", "birth")) s.model.birth = cfg.profile(*v);
    if (auto v = cfg.take("model", "sensor")) s.model.sensor = cfg.profile(*v);
    if (auto v = cfg.take("model", "scale")) {
        s.model.scale = cfg.number(*v);
        if (!(s.model.scale > 0.0)) cfg.fail(v->line, "scale must be positive");
    }

    if (auto v = cfg.take("initial", "density")) s.initial.density = cfg.profile(*v);
    if (auto v = cfg.take_number("initial", "mode_amplitude")) s.initial.mode_amplitude = *v;
    if (auto v = cfg.take_number("initial", "mode_frequency")) s.initial.mode_frequency = *v;
    if (auto v = cfg.take_number("initial", "mode_growth")) s.initial.mode_growth = *v;
    if (auto v = cfg.take("initial", "dilution")) {
        if (v->kind == detail::ConfigValue::Kind::Bare && v->text == "equilibrium")
            s.initial.dilution.reset();
        else
            s.initial.dilution = cfg.number(*v);
    }

    std::string type = "backstep_full";
    std::size_t type_line = 0;
    if (auto v = cfg.take("controller", "type")) {
        type = v->text;
        type_line = v->line;
    }
    std::map<std::string, std::pair<double, std::size_t>> gains;
    for (const char* key : {"k1", "k2", "k3", "c1", "c2", "theta", "lower", "upper"})
        if (auto v = cfg.take("controller", key)) gains[key] = {cfg.number(*v), v->line};
    auto gain = [&](const char* key, double fallback) {
        auto it = gains.find(key);
        if (it == gains.end()) return fallback;
        const auto [value, line] = it->second;
        gains.erase(it);
        if (std::string_view(key) != "lower" && std::string_view(key) != "upper" && !(value > 0.0))
            cfg.fail(line, std::string("gain ") + key + " must be positive");
        return value;
    };
    auto interval = [&] { return DilutionInterval{gain("lower", 0.1), gain("upper", 1.5)}; };
    if (type == "backstep_full")
        s.controller = BackstepFull{gain("k1", 1.0), gain("k2", 2.0)};
    else if (type == "backstep_const_pmu")
        s.controller = BackstepConstPMu{gain("k1", 1.0), gain("k2", 2.0)};
    else if (type == "relaxed_output")
        s.controller = RelaxedOutput{gain("k1", 1.0), gain("k2", 2.0)};
    else if (type == "safety_filtered")
        s.controller = SafetyFiltered{gain("k1", 1.0), gain("k2", 2.0), gain("k3", 1.0)};
    else if (type == "constrained_output")
        s.controller = ConstrainedOutput{gain("k1", 1.0), gain("k2", 10.0), gain("k3", 1.0), interval()};
    else if (type == "positive_only")
        s.controller = PositiveOnly{gain("k1", 1.0), gain("k2", 10.0), gain("k3", 1.0)};
    else if (type == "lyap_full_state")
        s.controller = LyapFullState{gain("c1", 1.0), gain("c2", 1.0), gain("theta", 1.0)};
    else if (type == "lyap_full_state_bounded")
        s.controller = LyapFullStateBounded{gain("c1", 1.0), gain("c2", 1.0), gain("theta", 1.0), interval()};
    else
        cfg.fail(type_line, "unknown controller type '" + type + "'");
    if (!gains.empty())
        cfg.fail(gains.begin()->second.second, "key '" + gains.begin()->first + "' does not apply to " + type);

    if (auto v = cfg.take("solver", "t_end")) {
        s.solver.t_end = cfg.number(*v);
        if (!(s.solver.t_end > 0.0)) cfg.fail(v->line, "t_end must be positive");
    }
    if (auto v = cfg.take("solver", "record_stride")) {
        const double r = cfg.number(*v);
        if (!(r >= 1.0) || r != std::floor(r)) cfg.fail(v->line, "record_stride must be a positive integer");
        s.solver.record_stride = static_cast<std::size_t>(r);
    }
    if (auto v = cfg.take_number("solver", "tol_bc")) s.solver.tol_bc = *v;
    if (auto v = cfg.take("solver", "sigma")) {
        if (!(v->kind == detail::ConfigValue::Kind::Bare && v->text == "auto")) {
            const double sg = cfg.number(*v);
            if (!(sg > 0.0)) cfg.fail(v->line, "sigma must be positive");
            s.sigma_override = sg;
        }
    }

    s.outputs.directory = "out/" + (s.name.empty() ? std::string("scenario") : s.name);
    if (auto v = cfg.take("outputs", "directory")) s.outputs.directory = v->text;
    if (auto v = cfg.take("outputs", "profile_times")) {
        if (v->kind != detail::ConfigValue::Kind::List) cfg.fail(v->line, "profile_times must be a list");
        s.outputs.profile_times.clear();
        for (const auto& [t, rest] : v->items) {
            if (!rest.empty()) cfg.fail(v->line, "profile_times entries must be plain numbers");
            s.outputs.profile_times.push_back(cfg.parse_number(t, v->line));
        }
    }
    cfg.reject_leftovers();
    if (s.name.empty()) s.name = "scenario";
    return s;
}

/// Built-in name, or a path to a scenario file.
inline Scenario load_scenario(const std::string& name_or_path) {
    if (auto s = builtin_scenario(name_or_path)) return *s;
    std::ifstream in(name_or_path);
    if (!in) throw ConfigError(name_or_path, 0, "not a built-in scenario and not a readable file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), name_or_path);
}

/// Model, equilibrium, certificate and initial state of a scenario.
struct Prepared {
    Equilibrium equilibrium;
    KernelCert certificate;
    double sigma;  // certificate sigma unless overridden
    AgeFunction initial_density;
    double initial_dilution;
};

inline AgeFunction initial_profile(const InitialSpec& init, const Equilibrium& eq) {
    const auto& grid = eq.model.grid;
    AgeFunction base = [&] {
        try {
            return init.density.sample(grid);
        } catch (const std::exception& e) {
            throw ModelError(std::string("initial density: ") + e.what());
        }
    }();
    const double f0 = eq.profile.front();
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = grid.node(i);
        const double mode = std::sin(init.mode_frequency * a) * std::exp(init.mode_growth * a) * eq.profile[i] / f0;
        v[i] = base[i] + init.mode_amplitude * mode;
    }
    return AgeFunction(grid, std::move(v));
}

inline Prepared prepare(const Scenario& s) {
    const AgeGrid grid(s.model.max_age, s.model.cells);
    ModelParams m = make_model(grid, s.model.mortality, s.model.birth, s.model.sensor, s.model.scale);
    Equilibrium eq = build_equilibrium(m);
    KernelCert cert{};
    try {
        cert = certify_assumption1(eq);
    } catch (const EquilibriumError&) {
        if (!s.sigma_override) throw;
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        cert = KernelCert{nan, nan, nan, nan};
    }
    validate(s.controller, eq);
    AgeFunction f0 = initial_profile(s.initial, eq);
    const double d0 = s.initial.dilution.value_or(eq.dilution);
    const double sigma = s.sigma_override.value_or(cert.sigma);
    return Prepared{std::move(eq), cert, sigma, std::move(f0), d0};
}

}  // namespace chemostat
