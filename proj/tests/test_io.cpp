#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fpc;
namespace fs = std::filesystem;

namespace {

const char* kMeanSteering = R"({
  "model": {"kind": "QuadraticDrift", "s": 1.0},
  "grid": {"x_min": -4.0, "x_max": 6.0, "nx": 40, "T": 1.0, "nt": 20},
  "m0": {"kind": "Gaussian", "mean": 0.0, "variance": 0.01},
  "constraint": {"kind": "MeanShortfall", "c": 1.0},
  "seed": 3
})";

ErrorKind parse_error_kind(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "parsed: " << text;
    return ErrorKind::Precondition;
}

Json base() { return Json::parse(kMeanSteering); }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fpc_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Config, ParsesDefaults) {
    const auto c = parse_config_text(kMeanSteering);
    EXPECT_EQ(c.problem.model.kind, ModelKind::QuadraticDrift);
    EXPECT_EQ(c.problem.grid, (GridSpec{-4.0, 6.0, 40, 1.0, 20}));
    EXPECT_EQ(c.problem.constraint, MeasureFunctional::mean_shortfall(1.0));
    EXPECT_EQ(c.problem.terminal_cost.kind, FunctionalKind::Zero);
    EXPECT_EQ(c.problem.tol, Tolerances{});
    EXPECT_EQ(c.output_dir, "out");
    EXPECT_EQ(c.seed, 3u);
}

TEST(Config, RoundTripIsSemanticallyIdentical) {
    for (const char* name : {"mean_steering.json", "variance_cap.json", "bang_bang.json", "slack_mean.json"}) {
        const auto a = load_config(fs::path(FPC_CONFIG_DIR) / name);
        const auto b = parse_config(config_json(a));
        EXPECT_TRUE(same_config(a, b)) << name;
        EXPECT_EQ(to_json_string(config_json(a)), to_json_string(config_json(b))) << name;
    }
}

TEST(Config, RoundTripMixtureAndTable) {
    auto j = base();
    j["m0"] = Json::parse(R"({"kind": "Mixture", "components": [
        {"weight": 0.3, "dist": {"kind": "PointMass", "x0": -1.0}},
        {"weight": 0.7, "dist": {"kind": "Gaussian", "mean": 1.0, "variance": 0.2}}]})");
    std::vector<double> table(40);
    for (int i = 0; i < 40; ++i) table[i] = 0.1 * i;
    j["terminal_cost"] = {{"kind", "Linear"}, {"table", table}};
    j["tolerances"] = {{"feasibility", 1e-4}, {"damping", 0.25}};
    const auto a = parse_config(j);
    EXPECT_EQ(a.problem.tol.feasibility, 1e-4);
    EXPECT_EQ(a.problem.tol.damping, 0.25);
    EXPECT_TRUE(same_config(a, parse_config(config_json(a))));
}

TEST(Config, Errors) {
    EXPECT_EQ(parse_error_kind("{not json"), ErrorKind::Config);
    EXPECT_EQ(parse_error_kind("[]"), ErrorKind::Config);

    auto j = base();
    j.erase("grid");
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["model"]["kind"] = "Cubic";
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["constraint"] = {{"kind", "Linear"}, {"kernel", "x3"}};
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["grid"]["nx"] = 2.5;
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["seed"] = -1;
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["colour"] = "blue";
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["tolerances"] = {{"feasibility", -1.0}};
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["tolerances"] = {{"feasability", 1e-3}};
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::Config);

    j = base();
    j["terminal_cost"] = {{"kind", "Linear"}, {"table", {1.0, 2.0}}};
    EXPECT_THROW(parse_config(j), Error);

    j = base();
    j["m0"] = {{"kind", "Gaussian"}, {"mean", 0.0}, {"variance", 4.0}};
    j["grid"]["x_min"] = -1.0;
    j["grid"]["x_max"] = 1.0;
    EXPECT_EQ(parse_error_kind(j.dump()), ErrorKind::DomainTooSmall);
}

TEST(Json, SeventeenSignificantDigits) {
    Json j = {{"a", 0.1}, {"b", 1.0 / 3.0}, {"n", 7}, {"bad", std::numeric_limits<double>::quiet_NaN()}};
    const auto s = to_json_string(j);
    EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
    EXPECT_NE(s.find("0.33333333333333331"), std::string::npos);
    EXPECT_NE(s.find("\"n\": 7"), std::string::npos);
    EXPECT_NE(s.find("null"), std::string::npos);
    const auto back = Json::parse(s);
    EXPECT_EQ(back["b"].get<double>(), 1.0 / 3.0);
}

TEST(Summary, KeysInOrder) {
    const auto cfg = parse_config_text(kMeanSteering);
    const auto sol = solve_kkt(cfg.problem);
    const auto j = summary_json(sol, cfg);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"lambda", "primal", "dual", "gap", "psi_T", "complementarity", "iterations",
                                              "boundary_mass_max", "grid", "seeds"}));
    EXPECT_EQ(j["seeds"]["config"].get<std::uint64_t>(), 3u);
    EXPECT_EQ(j["lambda"].get<double>(), sol.lambda);
}

TEST(Csv, FieldAndPolicyRoundTrip) {
    const auto cfg = parse_config_text(kMeanSteering);
    const auto sol = solve_kkt(cfg.problem);
    const auto dir = scratch("csv");
    write_json_file(dir / "dummy.json", Json::object());
    {
        std::ofstream u(dir / "u.csv"), pol(dir / "policy.csv");
        write_field_csv(u, sol.u());
        write_policy_csv(pol, sol.policy());
    }
    const auto& g = cfg.problem.grid;
    const auto u = read_field_csv(dir / "u.csv", g);
    const auto p = read_policy_csv(dir / "policy.csv", g);
    EXPECT_EQ(u.values, sol.u().values);
    EXPECT_EQ(p.drift.values, sol.policy().drift.values);
    EXPECT_EQ(p.diffusion.values, sol.policy().diffusion.values);

    const GridSpec other{-4.0, 6.0, 40, 1.0, 10};
    try {
        read_field_csv(dir / "u.csv", other);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
    }
    EXPECT_THROW(read_field_csv(dir / "policy.csv", g), Error);
    EXPECT_THROW(read_field_csv(dir / "missing.csv", g), Error);
    fs::remove_all(dir);
}

TEST(OutputDir, EnvironmentOverrides) {
    auto cfg = parse_config_text(kMeanSteering);
    cfg.output_dir = "from_config";
    ::unsetenv("FPC_OUTPUT_DIR");
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("from_config"));
    ::setenv("FPC_OUTPUT_DIR", "/tmp/from_env", 1);
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("/tmp/from_env"));
    ::setenv("FPC_OUTPUT_DIR", "", 1);
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("from_config"));
    ::unsetenv("FPC_OUTPUT_DIR");
}

TEST(Plot, ProducesSvg) {
    const auto cfg = parse_config_text(kMeanSteering);
    const auto sol = solve_kkt(cfg.problem);
    std::ostringstream os;
    write_plot_svg(os, sol.u(), sol.m(), sol.policy());
    const auto s = os.str();
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n') > 3, true);
}

TEST(Config, CallableCustomCannotBeSerialized) {
    auto cfg = parse_config_text(kMeanSteering);
    auto f = [](double, double, double a) { return a; };
    cfg.problem.model = ControlModel::custom({-1.0, 0.0, 1.0}, f, [](double, double, double) { return 1.0; }, f, {});
    EXPECT_THROW(config_json(cfg), Error);
}
