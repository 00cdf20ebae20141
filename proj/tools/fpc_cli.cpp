// fpc: batch front-end for the constrained control solver.
//
//   fpc solve <config.json>
//   fpc verify <config.json> <summary.json> --particles N --seed S
//   fpc sweep-lambda <config.json> --lambdas 0,0.5,1
//   fpc audit-model <config.json> --samples N --seed S
//
// Exit codes: 0 success, 1 configuration error, 2 solver error.

#include "fpc/fpc.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const fpc::Error& e) {
        std::cerr << "fpc: " << e.what() << "\n";
        return e.is_config_error() ? kConfigError : kSolverError;
    } catch (const std::exception& e) {
        std::cerr << "fpc: " << e.what() << "\n";
        return kSolverError;
    }
}

fpc::ProblemConfig load_or_fail(const std::string& path) {
    if (!fs::exists(path)) throw fpc::Error(fpc::ErrorKind::Config, "config file not found: " + path);
    return fpc::load_config(path);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fpc::Error(fpc::ErrorKind::Config, "cannot write " + path.string());
    fill(out);
}

int cmd_solve(const std::string& config_path) {
    const auto cfg = load_or_fail(config_path);
    const auto out = fpc::resolve_output_dir(cfg);
    fs::create_directories(out);
    const auto sol = fpc::solve_kkt(cfg.problem);
    fpc::write_json_file(out / "summary.json", fpc::summary_json(sol, cfg));
    write_file(out / "u.csv", [&](std::ostream& os) { fpc::write_field_csv(os, sol.u()); });
    write_file(out / "m.csv", [&](std::ostream& os) { fpc::write_field_csv(os, sol.m()); });
    write_file(out / "policy.csv", [&](std::ostream& os) { fpc::write_policy_csv(os, sol.policy()); });
    write_file(out / "plot.svg", [&](std::ostream& os) { fpc::write_plot_svg(os, sol.u(), sol.m(), sol.policy()); });
    std::printf("lambda=%.10g primal=%.10g dual=%.10g gap=%.3g psi_T=%.3g iterations=%d\n", sol.lambda, sol.primal,
                sol.dual, sol.gap, sol.psi_T, sol.iterations);
    std::printf("wrote %s\n", out.string().c_str());
    return kOk;
}

int cmd_verify(const std::string& config_path, const std::string& summary_path, std::int64_t particles,
               std::optional<std::uint64_t> seed) {
    if (particles < 1) throw fpc::Error(fpc::ErrorKind::Config, "--particles must be at least 1");
    const auto cfg = load_or_fail(config_path);
    if (!fs::exists(summary_path)) throw fpc::Error(fpc::ErrorKind::Config, "summary not found: " + summary_path);
    auto summary = fpc::read_json_file(summary_path);
    if (!summary.is_object()) throw fpc::Error(fpc::ErrorKind::Config, "summary must be a JSON object");
    const fs::path dir = fs::path(summary_path).parent_path();
    const auto policy_path = dir / "policy.csv", m_path = dir / "m.csv";
    for (const auto& p : {policy_path, m_path})
        if (!fs::exists(p)) throw fpc::Error(fpc::ErrorKind::Config, "missing solve output " + p.string());
    const auto& g = cfg.problem.grid;
    const auto policy = fpc::read_policy_csv(policy_path, g);
    fpc::DensityField m(g);
    m.values = fpc::read_field_csv(m_path, g).values;

    const std::uint64_t s = seed.value_or(cfg.seed);
    const auto rep = fpc::verify(cfg.problem, policy, m, particles, s);
    summary["mc"] = fpc::verify_json(rep);
    fpc::write_json_file(summary_path, summary);
    std::printf("w1_terminal=%.4g w1_max_over_t=%.4g cost_mc=%.6g +- %.2g psi_mc=%.4g\n", rep.w1_terminal,
                rep.w1_max_over_t, rep.cost_mc, rep.cost_mc_stderr, rep.psi_mc);
    return kOk;
}

std::vector<double> parse_lambda_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw fpc::Error(fpc::ErrorKind::Config, "bad lambda value \"" + item + "\"");
        if (!(v >= 0.0)) throw fpc::Error(fpc::ErrorKind::Config, "lambda values must be >= 0");
        out.push_back(v);
    }
    if (out.empty()) throw fpc::Error(fpc::ErrorKind::Config, "--lambdas needs at least one value");
    return out;
}

int cmd_sweep(const std::string& config_path, const std::string& lambdas_text) {
    const auto lambdas = parse_lambda_list(lambdas_text);
    const auto cfg = load_or_fail(config_path);
    const auto out = fpc::resolve_output_dir(cfg);
    fs::create_directories(out);
    std::ostringstream csv;
    csv << "lambda,psi_T,primal,dual\n";
    const fpc::DensityField* warm = nullptr;
    std::optional<fpc::DensityField> last;
    for (double lambda : lambdas) {
        const auto sol = fpc::solve_coupled(cfg.problem, lambda, warm);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", lambda,
                      fpc::terminal_constraint_value(cfg.problem, sol.m()), fpc::primal_value(sol, cfg.problem),
                      fpc::dual_value(sol, cfg.problem));
        csv << buf;
        if (!sol.linear_class) {
            last = sol.m();
            warm = &*last;
        }
    }
    write_file(out / "sweep.csv", [&](std::ostream& os) { os << csv.str(); });
    std::cout << csv.str();
    return kOk;
}

int cmd_audit(const std::string& config_path, int samples, std::optional<std::uint64_t> seed) {
    if (samples < 1) throw fpc::Error(fpc::ErrorKind::Config, "--samples must be at least 1");
    const auto cfg = load_or_fail(config_path);
    const auto rep = fpc::audit_model(cfg.problem.model, samples, seed.value_or(cfg.seed));
    std::printf("samples=%d violations=%zu\n", rep.samples, rep.violations.size());
    for (std::size_t k = 0; k < rep.violations.size() && k < 20; ++k) {
        const auto& v = rep.violations[k];
        std::printf("  %s t=%.4g x=%.4g p=%.4g value=%.6g bound=%.6g\n", fpc::to_string(v.kind), v.t, v.x, v.p, v.value,
                    v.bound);
    }
    return rep.ok() ? kOk : kSolverError;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained stochastic control solver (HJB / Fokker-Planck with a terminal law constraint)"};
    app.require_subcommand(1);

    std::string config, summary, lambdas;
    std::int64_t particles = 100000;
    int samples = 1000;
    std::optional<std::uint64_t> seed;

    auto* solve = app.add_subcommand("solve", "solve the KKT system and write summary, fields and plot");
    solve->add_option("config", config, "problem config (JSON)")->required();

    auto* verify = app.add_subcommand("verify", "Monte Carlo check of a previous solve");
    verify->add_option("config", config, "problem config (JSON)")->required();
    verify->add_option("summary", summary, "summary.json from solve")->required();
    verify->add_option("--particles", particles, "number of particles");
    verify->add_option("--seed", seed, "RNG seed (defaults to the config seed)");

    auto* sweep = app.add_subcommand("sweep-lambda", "psi_T, primal and dual along a list of multipliers");
    sweep->add_option("config", config, "problem config (JSON)")->required();
    sweep->add_option("--lambdas", lambdas, "comma-separated multipliers")->required();

    auto* audit = app.add_subcommand("audit-model", "sample the growth and ellipticity bounds of H");
    audit->add_option("config", config, "problem config (JSON)")->required();
    audit->add_option("--samples", samples, "number of (t, x, p) samples");
    audit->add_option("--seed", seed, "RNG seed (defaults to the config seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    if (*solve) return run_guarded([&] { return cmd_solve(config); });
    if (*verify) return run_guarded([&] { return cmd_verify(config, summary, particles, seed); });
    if (*sweep) return run_guarded([&] { return cmd_sweep(config, lambdas); });
    if (*audit) return run_guarded([&] { return cmd_audit(config, samples, seed); });
    return kConfigError;
}
