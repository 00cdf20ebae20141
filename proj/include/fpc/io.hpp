#pragma once

// Problem configs (JSON), run summaries, field CSVs and a static SVG plot.

#include "fpc/error.hpp"
#include "fpc/functional.hpp"
#include "fpc/grid.hpp"
#include "fpc/kkt.hpp"
#include "fpc/mc.hpp"
#include "fpc/model.hpp"
#include "fpc/problem.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fpc {

using Json = nlohmann::ordered_json;

struct ProblemConfig {
    Problem problem;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// JSON writing: every float with 17 significant digits.

namespace detail {

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

inline void write_json_value(std::ostream& os, const Json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ",\n";
            first = false;
            os << pad << Json(it.key()).dump() << ": ";
            write_json_value(os, it.value(), indent, depth + 1);
        }
        os << "\n" << close << "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
        if (flat) {
            os << "[";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k) os << ", ";
                write_json_value(os, j[k], indent, depth + 1);
            }
            os << "]";
            return;
        }
        os << "[\n";
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) os << ",\n";
            os << pad;
            write_json_value(os, j[k], indent, depth + 1);
        }
        os << "\n" << close << "]";
        return;
    }
    case Json::value_t::number_float: os << format_double(j.get<double>()); return;
    default: os << j.dump(); return;
    }
}

} // namespace detail

inline void write_json(std::ostream& os, const Json& j) {
    detail::write_json_value(os, j, 2, 0);
    os << "\n";
}

inline std::string to_json_string(const Json& j) {
    std::ostringstream os;
    write_json(os, j);
    return os.str();
}

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::Config, "config: " + what); }

inline const Json& require(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) config_error(where + " is missing \"" + key + "\"");
    return j.at(key);
}

inline double get_number(const Json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number()) config_error(where + "." + key + " must be a number");
    return v.get<double>();
}

inline double get_number_or(const Json& j, const char* key, double fallback, const std::string& where) {
    return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline int get_int(const Json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number_integer()) config_error(where + "." + key + " must be an integer");
    return v.get<int>();
}

inline std::string get_string(const Json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_string()) config_error(where + "." + key + " must be a string");
    return v.get<std::string>();
}

inline std::vector<double> get_numbers(const Json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_array()) config_error(where + "." + key + " must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) config_error(where + "." + key + " must hold numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline ModelBounds parse_bounds(const Json& j, ModelBounds b) {
    const std::string w = "model.bounds";
    b.r1 = get_number_or(j, "r1", b.r1, w);
    b.r2 = get_number_or(j, "r2", b.r2, w);
    b.alpha1 = get_number_or(j, "alpha1", b.alpha1, w);
    b.alpha2 = get_number_or(j, "alpha2", b.alpha2, w);
    b.C_H = get_number_or(j, "C_H", b.C_H, w);
    b.lambda_minus = get_number_or(j, "lambda_minus", b.lambda_minus, w);
    b.lambda_plus = get_number_or(j, "lambda_plus", b.lambda_plus, w);
    b.delta_coercivity = get_number_or(j, "delta", b.delta_coercivity, w);
    b.nu_dpH_growth = get_number_or(j, "nu", b.nu_dpH_growth, w);
    return b;
}

inline Json bounds_json(const ModelBounds& b) {
    return {{"r1", b.r1},
            {"r2", b.r2},
            {"alpha1", b.alpha1},
            {"alpha2", b.alpha2},
            {"C_H", b.C_H},
            {"lambda_minus", b.lambda_minus},
            {"lambda_plus", b.lambda_plus},
            {"delta", b.delta_coercivity},
            {"nu", b.nu_dpH_growth}};
}

inline ControlModel parse_model(const Json& j) {
    const std::string w = "model";
    const auto kind = get_string(j, "kind", w);
    ControlModel m;
    if (kind == "QuadraticDrift") {
        m = ControlModel::quadratic(get_number(j, "s", w));
    } else if (kind == "PowerDrift") {
        const double r = get_number(j, "r", w);
        if (!(r > 1.0)) config_error("model.r must exceed 1");
        m = ControlModel::power(get_number(j, "s", w), r);
    } else if (kind == "Custom") {
        CustomTables t{get_numbers(j, "drift", w), get_numbers(j, "sigma", w), get_numbers(j, "cost", w)};
        const ModelBounds b = j.contains("bounds") ? parse_bounds(j.at("bounds"), ModelBounds{}) : ModelBounds{};
        return ControlModel::custom_table(get_numbers(j, "controls", w), std::move(t), b);
    } else {
        config_error("unknown model kind \"" + kind + "\"");
    }
    if (j.contains("bounds")) {
        m.bounds = parse_bounds(j.at("bounds"), m.bounds);
        m.validate();
    }
    return m;
}

inline Json model_json(const ControlModel& m) {
    switch (m.kind) {
    case ModelKind::QuadraticDrift:
        return {{"kind", "QuadraticDrift"}, {"s", m.volatility_s}, {"bounds", bounds_json(m.bounds)}};
    case ModelKind::PowerDrift:
        return {{"kind", "PowerDrift"}, {"s", m.volatility_s}, {"r", m.exponent}, {"bounds", bounds_json(m.bounds)}};
    case ModelKind::Custom:
        if (!m.tables) throw Error(ErrorKind::Config, "custom models built from callables cannot be serialized");
        return {{"kind", "Custom"},
                {"controls", m.control_grid},
                {"drift", m.tables->drift},
                {"sigma", m.tables->sigma},
                {"cost", m.tables->cost},
                {"bounds", bounds_json(m.bounds)}};
    }
    return {};
}

inline GridSpec parse_grid(const Json& j) {
    const std::string w = "grid";
    GridSpec g{get_number(j, "x_min", w), get_number(j, "x_max", w), get_int(j, "nx", w), get_number(j, "T", w),
               get_int(j, "nt", w)};
    g.validate();
    return g;
}

inline Json grid_json(const GridSpec& g) {
    return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx}, {"T", g.T}, {"nt", g.nt}};
}

inline std::variant<Gaussian, PointMass> parse_atom(const Json& j, const std::string& w) {
    const auto kind = get_string(j, "kind", w);
    if (kind == "Gaussian") {
        const double v = get_number(j, "variance", w);
        if (!(v > 0.0)) config_error(w + ".variance must be positive");
        return Gaussian{get_number(j, "mean", w), v};
    }
    if (kind == "PointMass") return PointMass{get_number(j, "x0", w)};
    config_error("unknown " + w + " kind \"" + kind + "\"");
}

inline InitialSpec parse_initial(const Json& j) {
    const std::string w = "m0";
    if (get_string(j, "kind", w) == "Mixture") {
        Mixture mix;
        const auto& comps = require(j, "components", w);
        if (!comps.is_array() || comps.empty()) config_error("m0.components must be a nonempty array");
        for (const auto& c : comps) {
            const double wt = get_number(c, "weight", "m0.components[]");
            if (!(wt > 0.0)) config_error("mixture weights must be positive");
            mix.components.push_back({wt, parse_atom(require(c, "dist", "m0.components[]"), "m0.components[].dist")});
        }
        return mix;
    }
    return std::visit([](const auto& a) -> InitialSpec { return a; }, parse_atom(j, w));
}

inline Json atom_json(const std::variant<Gaussian, PointMass>& a) {
    if (const auto* g = std::get_if<Gaussian>(&a)) return {{"kind", "Gaussian"}, {"mean", g->mean}, {"variance", g->variance}};
    return {{"kind", "PointMass"}, {"x0", std::get<PointMass>(a).x0}};
}

inline Json initial_json(const InitialSpec& s) {
    if (const auto* g = std::get_if<Gaussian>(&s)) return atom_json(*g);
    if (const auto* p = std::get_if<PointMass>(&s)) return atom_json(*p);
    Json comps = Json::array();
    for (const auto& c : std::get<Mixture>(s).components) comps.push_back({{"weight", c.weight}, {"dist", atom_json(c.dist)}});
    return {{"kind", "Mixture"}, {"components", comps}};
}

inline MeasureFunctional parse_functional(const Json& j, const std::string& w, FunctionalRole role) {
    const auto kind = get_string(j, "kind", w);
    MeasureFunctional f;
    if (kind == "Zero") f = MeasureFunctional::zero();
    else if (kind == "Linear") {
        if (j.contains("table")) f = MeasureFunctional::linear_table(get_numbers(j, "table", w));
        else {
            const auto k = get_string(j, "kernel", w);
            if (k == "x") f = MeasureFunctional::linear(KernelTag::X);
            else if (k == "x2") f = MeasureFunctional::linear(KernelTag::X2);
            else if (k == "c_minus_x") f = MeasureFunctional::linear(KernelTag::CMinusX, get_number(j, "c", w));
            else config_error(w + ".kernel must be one of x, x2, c_minus_x");
        }
    } else if (kind == "MeanShortfall") f = MeasureFunctional::mean_shortfall(get_number(j, "c", w));
    else if (kind == "VarianceCap") f = MeasureFunctional::variance_cap(get_number(j, "v", w));
    else if (kind == "QuadraticMean") f = MeasureFunctional::quadratic_mean();
    else config_error("unknown " + w + " kind \"" + kind + "\"");
    return f.with_role(role);
}

inline Json functional_json(const MeasureFunctional& f) {
    switch (f.kind) {
    case FunctionalKind::Zero: return {{"kind", "Zero"}};
    case FunctionalKind::Linear:
        switch (f.tag) {
        case KernelTag::X: return {{"kind", "Linear"}, {"kernel", "x"}};
        case KernelTag::X2: return {{"kind", "Linear"}, {"kernel", "x2"}};
        case KernelTag::CMinusX: return {{"kind", "Linear"}, {"kernel", "c_minus_x"}, {"c", f.param}};
        case KernelTag::Table: return {{"kind", "Linear"}, {"table", f.table}};
        }
        break;
    case FunctionalKind::MeanShortfall: return {{"kind", "MeanShortfall"}, {"c", f.param}};
    case FunctionalKind::VarianceCap: return {{"kind", "VarianceCap"}, {"v", f.param}};
    case FunctionalKind::QuadraticMean: return {{"kind", "QuadraticMean"}};
    }
    return {};
}

inline Tolerances parse_tolerances(const Json& j) {
    Tolerances t;
    if (!j.is_object()) config_error("tolerances must be an object");
    static const char* const known[] = {"feasibility", "complementarity", "fixed_point", "fixed_point_max_iterations",
                                        "damping",     "damping_min",     "hjb",         "hjb_max_iterations",
                                        "slater_margin", "lambda_max",    "kkt_max_iterations"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) == std::end(known))
            config_error("unknown tolerance \"" + it.key() + "\"");
    const std::string w = "tolerances";
    auto positive = [&](const char* key, double fallback) {
        const double v = get_number_or(j, key, fallback, w);
        if (!(v > 0.0)) config_error(std::string("tolerances.") + key + " must be positive");
        return v;
    };
    auto count = [&](const char* key, int fallback) {
        if (!j.contains(key)) return fallback;
        const int v = get_int(j, key, w);
        if (v < 1) config_error(std::string("tolerances.") + key + " must be positive");
        return v;
    };
    t.feasibility = positive("feasibility", t.feasibility);
    t.complementarity = positive("complementarity", t.complementarity);
    t.fixed_point = positive("fixed_point", t.fixed_point);
    t.fixed_point_max_iterations = count("fixed_point_max_iterations", t.fixed_point_max_iterations);
    t.damping = positive("damping", t.damping);
    t.damping_min = positive("damping_min", t.damping_min);
    t.hjb = positive("hjb", t.hjb);
    t.hjb_max_iterations = count("hjb_max_iterations", t.hjb_max_iterations);
    t.slater_margin = positive("slater_margin", t.slater_margin);
    t.lambda_max = positive("lambda_max", t.lambda_max);
    t.kkt_max_iterations = count("kkt_max_iterations", t.kkt_max_iterations);
    return t;
}

inline Json tolerances_json(const Tolerances& t) {
    return {{"feasibility", t.feasibility},
            {"complementarity", t.complementarity},
            {"fixed_point", t.fixed_point},
            {"fixed_point_max_iterations", t.fixed_point_max_iterations},
            {"damping", t.damping},
            {"damping_min", t.damping_min},
            {"hjb", t.hjb},
            {"hjb_max_iterations", t.hjb_max_iterations},
            {"slater_margin", t.slater_margin},
            {"lambda_max", t.lambda_max},
            {"kkt_max_iterations", t.kkt_max_iterations}};
}

} // namespace detail

/// Missing functionals default to Zero, missing tolerances to their defaults.
inline ProblemConfig parse_config(const Json& j) {
    if (!j.is_object()) detail::config_error("top level must be an object");
    static const std::set<std::string> known{"model",       "grid",       "m0",         "running_cost", "terminal_cost",
                                             "constraint",  "tolerances", "output_dir", "seed"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) detail::config_error("unknown key \"" + key + "\"");
    ProblemConfig c;
    auto& p = c.problem;
    p.model = detail::parse_model(detail::require(j, "model", "config"));
    p.grid = detail::parse_grid(detail::require(j, "grid", "config"));
    p.initial = detail::parse_initial(detail::require(j, "m0", "config"));
    auto functional = [&](const char* key, FunctionalRole role) {
        return j.contains(key) ? detail::parse_functional(j.at(key), key, role) : MeasureFunctional::zero().with_role(role);
    };
    p.running_cost = functional("running_cost", FunctionalRole::RunningCost);
    p.terminal_cost = functional("terminal_cost", FunctionalRole::TerminalCost);
    p.constraint = functional("constraint", FunctionalRole::Constraint);
    if (j.contains("tolerances")) p.tol = detail::parse_tolerances(j.at("tolerances"));
    if (j.contains("output_dir")) c.output_dir = detail::get_string(j, "output_dir", "config");
    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            detail::config_error("seed must be a nonnegative integer");
        c.seed = s.get<std::uint64_t>();
    }
    p.validate();
    return c;
}

inline ProblemConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        detail::config_error(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ProblemConfig load_config(const std::filesystem::path& path) { return parse_config_text(read_text_file(path)); }

/// Normalized form: every field explicit, fixed key order.
inline Json config_json(const ProblemConfig& c) {
    const auto& p = c.problem;
    return {{"model", detail::model_json(p.model)},
            {"grid", detail::grid_json(p.grid)},
            {"m0", detail::initial_json(p.initial)},
            {"running_cost", detail::functional_json(p.running_cost)},
            {"terminal_cost", detail::functional_json(p.terminal_cost)},
            {"constraint", detail::functional_json(p.constraint)},
            {"tolerances", detail::tolerances_json(p.tol)},
            {"output_dir", c.output_dir},
            {"seed", c.seed}};
}

/// Semantic equality of two configs (callables compared through their tables).
inline bool same_config(const ProblemConfig& a, const ProblemConfig& b) {
    const auto& pa = a.problem;
    const auto& pb = b.problem;
    const bool models = pa.model.kind == pb.model.kind && pa.model.volatility_s == pb.model.volatility_s &&
                        pa.model.exponent == pb.model.exponent && pa.model.control_grid == pb.model.control_grid &&
                        pa.model.tables == pb.model.tables && pa.model.bounds == pb.model.bounds;
    return models && pa.grid == pb.grid && pa.initial == pb.initial && pa.running_cost == pb.running_cost &&
           pa.terminal_cost == pb.terminal_cost && pa.constraint == pb.constraint && pa.tol == pb.tol &&
           a.output_dir == b.output_dir && a.seed == b.seed;
}

/// FPC_OUTPUT_DIR, when set and nonempty, wins over the config.
inline std::filesystem::path resolve_output_dir(const ProblemConfig& c) {
    if (const char* env = std::getenv("FPC_OUTPUT_DIR"); env && *env) return env;
    return c.output_dir;
}

// ---------------------------------------------------------------------------
// Run summary

inline Json summary_json(const KktSolution& sol, const ProblemConfig& c) {
    return {{"lambda", sol.lambda},
            {"primal", sol.primal},
            {"dual", sol.dual},
            {"gap", sol.gap},
            {"psi_T", sol.psi_T},
            {"complementarity", sol.complementarity},
            {"iterations", sol.iterations},
            {"boundary_mass_max", sol.coupled.fpe.boundary_mass_max},
            {"grid", detail::grid_json(c.problem.grid)},
            {"seeds", {{"config", c.seed}}}};
}

inline Json verify_json(const VerifyReport& r) {
    return {{"w1_terminal", r.w1_terminal},
            {"w1_max_over_t", r.w1_max_over_t},
            {"cost_mc", r.cost_mc},
            {"cost_mc_stderr", r.cost_mc_stderr},
            {"psi_mc", r.psi_mc},
            {"n_particles", r.n_particles},
            {"seed", r.seed}};
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
    write_json(out, j);
}

inline Json read_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": malformed JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Field CSVs

/// Header `t,x,drift,diffusion`.
inline void write_policy_csv(std::ostream& os, const FluxFields& p) {
    const auto& g = p.drift.grid;
    os << "t,x,drift,diffusion\n";
    char buf[128];
    for (int n = 0; n <= g.nt; ++n)
        for (int i = 0; i < g.nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", g.t(n), g.x(i), p.drift.at(n, i),
                          p.diffusion.at(n, i));
            os << buf;
        }
}

namespace detail {

// Rows of a field CSV checked against the grid; returns the value columns.
inline std::vector<std::vector<double>> read_csv_columns(const std::filesystem::path& path, const GridSpec& g,
                                                         const std::string& header, std::size_t value_columns) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw Error(ErrorKind::Config, path.string() + ": expected header \"" + header + "\"");
    std::vector<std::vector<double>> cols(value_columns);
    const double tol_t = 1e-9 * std::max(1.0, g.T), tol_x = 1e-9 * std::max({1.0, std::abs(g.x_min), std::abs(g.x_max)});
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) throw Error(ErrorKind::Config, path.string() + ": bad number \"" + cell + "\"");
            vals.push_back(v);
        }
        if (vals.size() != value_columns + 2) throw Error(ErrorKind::Config, path.string() + ": wrong column count");
        const int n = static_cast<int>(row / g.cells()), i = static_cast<int>(row % g.cells());
        if (n > g.nt || std::abs(vals[0] - g.t(n)) > tol_t || std::abs(vals[1] - g.x(i)) > tol_x)
            throw Error(ErrorKind::GridMismatch, path.string() + ": rows do not match the config grid");
        for (std::size_t k = 0; k < value_columns; ++k) cols[k].push_back(vals[k + 2]);
        ++row;
    }
    if (row != g.levels() * g.cells())
        throw Error(ErrorKind::GridMismatch, path.string() + ": row count does not match the config grid");
    return cols;
}

} // namespace detail

inline ScalarField read_field_csv(const std::filesystem::path& path, const GridSpec& g) {
    auto cols = detail::read_csv_columns(path, g, "t,x,value", 1);
    ScalarField f(g);
    f.values = std::move(cols[0]);
    return f;
}

inline FluxFields read_policy_csv(const std::filesystem::path& path, const GridSpec& g) {
    auto cols = detail::read_csv_columns(path, g, "t,x,drift,diffusion", 2);
    FluxFields p(g);
    p.drift.values = std::move(cols[0]);
    p.diffusion.values = std::move(cols[1]);
    return p;
}

// ---------------------------------------------------------------------------
// Static plot: u(0, .), m(T, .) as a density, drift(0, .), stacked panels.

inline void write_plot_svg(std::ostream& os, const ScalarField& u, const DensityField& m, const FluxFields& policy) {
    const auto& g = u.grid;
    constexpr int W = 640, PH = 200, L = 70, R = 20, TOP = 30, GAP = 40;
    struct Panel {
        const char* title;
        std::vector<double> y;
        const char* colour;
    };
    std::vector<double> dens(g.cells());
    for (int i = 0; i < g.nx; ++i) dens[i] = m.at(g.nt, i) / g.h();
    const auto u0 = u.level(0);
    const auto b0 = policy.drift.level(0);
    const Panel panels[] = {{"u(0, x)", {u0.begin(), u0.end()}, "#1f77b4"},
                            {"m(T, x) density", dens, "#d62728"},
                            {"drift(0, x)", {b0.begin(), b0.end()}, "#2ca02c"}};
    const int H = TOP + 3 * (PH + GAP);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" "
       << "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[160];
    for (int k = 0; k < 3; ++k) {
        const auto& p = panels[k];
        const int y0 = TOP + k * (PH + GAP);
        double lo = *std::min_element(p.y.begin(), p.y.end()), hi = *std::max_element(p.y.begin(), p.y.end());
        if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) {
            lo -= 0.5;
            hi += 0.5;
        }
        auto px = [&](double x) { return L + (x - g.x_min) / (g.x_max - g.x_min) * (W - L - R); };
        auto py = [&](double v) { return y0 + PH - (v - lo) / (hi - lo) * PH; };
        std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#888\"/>\n", L,
                      y0, W - L - R, PH);
        os << buf;
        os << "<text x=\"" << L << "\" y=\"" << y0 - 8 << "\">" << p.title << "</text>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%.4g</text>\n", L - 6, y0 + 10, hi);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%.4g</text>\n", L - 6, y0 + PH, lo);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\">%g</text>\n", L, y0 + PH + 14, g.x_min);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%g</text>\n", W - R, y0 + PH + 14, g.x_max);
        os << buf;
        os << "<polyline fill=\"none\" stroke=\"" << p.colour << "\" stroke-width=\"1.5\" points=\"";
        for (int i = 0; i < g.nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(g.x(i)), py(p.y[i]));
            os << buf;
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
}

} // namespace fpc
