#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace fpc;
using fpc::fixtures::mean_steering;

namespace {

double sample_mean(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

Problem diffusion_only(const GridSpec& g) {
    Problem p;
    p.model = ControlModel::quadratic(1.0);
    p.grid = g;
    p.initial = PointMass{0.0};
    return p;
}

} // namespace

TEST(Philox, KnownAnswers) {
    using B = Philox4x32::Block;
    EXPECT_EQ(Philox4x32(0)(B{0, 0, 0, 0}), (B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    const B ones{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
    EXPECT_EQ(Philox4x32(~std::uint64_t{0})(ones), (B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32(0x299f31d0a4093822ull)(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}),
              (B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, UniformsInOpenInterval) {
    const CounterRng rng(5);
    for (std::uint64_t p = 0; p < 1000; ++p) {
        const auto [a, b] = rng.uniforms(p, 3, RngStream::Increment);
        EXPECT_GT(a, 0.0);
        EXPECT_LT(a, 1.0);
        EXPECT_GT(b, 0.0);
        EXPECT_LT(b, 1.0);
    }
}

TEST(Simulate, PureDiffusionVariance) {
    const GridSpec g{-8.0, 8.0, 160, 1.0, 100};
    const auto ens = simulate(constant_policy(g, 0.0, 1.0), PointMass{0.0}, 20000, 1);
    const auto xT = ens.level(g.nt);
    const double var = sample_variance(xT);
    const double se = var * std::sqrt(2.0 / (xT.size() - 1));
    EXPECT_NEAR(var, 2.0, 3.0 * se);
}

TEST(Simulate, ConstantDriftMean) {
    const GridSpec g{-6.0, 8.0, 140, 1.0, 100};
    const auto ens = simulate(constant_policy(g, 1.0, 1.0), Gaussian{0.0, 0.01}, 20000, 2);
    const auto xT = ens.level(g.nt);
    const double se = std::sqrt(sample_variance(xT) / xT.size());
    EXPECT_NEAR(sample_mean(xT), 1.0, 3.0 * se);
}

TEST(Simulate, SingleParticleDeterministic) {
    const auto p = mean_steering(1.0, 100, 50);
    const auto pol = constant_policy(p.grid, 1.0, 1.0);
    const auto a = simulate(pol, p.initial, 1, 9);
    const auto b = simulate(pol, p.initial, 1, 9);
    EXPECT_EQ(a.positions, b.positions);
}

TEST(Simulate, ParticlePathIndependentOfEnsembleSize) {
    const auto p = mean_steering(1.0, 100, 50);
    const auto pol = constant_policy(p.grid, 1.0, 1.0);
    const auto small = simulate(pol, p.initial, 10, 3);
    const auto big = simulate(pol, p.initial, 100, 3);
    for (int n = 0; n <= p.grid.nt; ++n)
        for (int k = 0; k < 10; ++k) EXPECT_EQ(small.level(n)[k], big.level(n)[k]);
}

TEST(Simulate, MixtureWeights) {
    const GridSpec g{-6.0, 6.0, 120, 1.0, 10};
    const Mixture mix{{{0.25, PointMass{-2.0}}, {0.75, PointMass{2.0}}}};
    const auto ens = simulate(constant_policy(g, 0.0, 0.0), mix, 40000, 4);
    const auto x0 = ens.level(0);
    const double frac = std::count(x0.begin(), x0.end(), -2.0) / static_cast<double>(x0.size());
    EXPECT_NEAR(frac, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / x0.size()));
}

TEST(Simulate, Errors) {
    const GridSpec g{-1.0, 1.0, 20, 2.0, 2};
    auto expect_kind = [](auto&& f, ErrorKind k) {
        try {
            f();
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), k);
        }
    };
    expect_kind([&] { simulate(constant_policy(g, 0.0, 1.0), PointMass{0.0}, 0, 1); }, ErrorKind::Config);
    expect_kind([&] { simulate(constant_policy(g, 0.0, -1.0), PointMass{0.0}, 5, 1); }, ErrorKind::Precondition);
    expect_kind([&] { simulate(constant_policy(g, NAN, 1.0), PointMass{0.0}, 5, 1); }, ErrorKind::Precondition);
    expect_kind([&] { simulate(constant_policy(g, 1.7e308, 0.0), PointMass{0.0}, 5, 1); }, ErrorKind::Blowup);
}

TEST(EmpiricalCost, ZeroPolicyIsZero) {
    const GridSpec g{-6.0, 6.0, 120, 1.0, 50};
    const auto p = diffusion_only(g);
    const auto pol = constant_policy(g, 0.0, 1.0);
    const auto c = empirical_cost(simulate(pol, p.initial, 1000, 1), p, pol);
    EXPECT_EQ(c.cost, 0.0);
    EXPECT_EQ(c.stderr_, 0.0);
}

TEST(EmpiricalCost, ConstantDriftOne) {
    const GridSpec g{-6.0, 8.0, 140, 1.0, 50};
    const auto p = diffusion_only(g);
    const auto pol = constant_policy(g, 1.0, 1.0);
    const auto c = empirical_cost(simulate(pol, p.initial, 1000, 1), p, pol);
    EXPECT_NEAR(c.cost, 0.5, 1e-12);
    EXPECT_NEAR(c.stderr_, 0.0, 1e-12);
}

TEST(EmpiricalCost, LinearTerminalCost) {
    const GridSpec g{-6.0, 8.0, 140, 1.0, 50};
    auto p = diffusion_only(g);
    p.terminal_cost = MeasureFunctional::linear(KernelTag::X).with_role(FunctionalRole::TerminalCost);
    const auto pol = constant_policy(g, 1.0, 1.0);
    const auto c = empirical_cost(simulate(pol, p.initial, 20000, 5), p, pol);
    EXPECT_GT(c.stderr_, 0.0);
    EXPECT_NEAR(c.mean_field, 1.0, 3.0 * c.stderr_);
    EXPECT_NEAR(c.running_f1, 0.5, 1e-12);
}

TEST(EmpiricalCost, GridMismatch) {
    const GridSpec g{-6.0, 6.0, 120, 1.0, 50};
    const auto pol = constant_policy(g, 0.0, 1.0);
    const auto ens = simulate(pol, PointMass{0.0}, 10, 1);
    auto p = diffusion_only({-6.0, 6.0, 60, 1.0, 50});
    EXPECT_THROW(empirical_cost(ens, p, pol), Error);
}

TEST(Wasserstein1Empirical, SampleAtCellCenter) {
    const GridSpec g{0.0, 1.0, 10, 1.0, 1};
    const auto m = fpc::fixtures::point_mass_at(g, 3);
    const std::vector<double> s{g.x(3)};
    EXPECT_NEAR(wasserstein1_empirical(g, s, m), g.h() / 4.0, 1e-15);
}

TEST(Wasserstein1Empirical, SampleOutsideDomain) {
    const GridSpec g{0.0, 1.0, 10, 1.0, 1};
    const auto m = fpc::fixtures::point_mass_at(g, 7);
    EXPECT_NEAR(wasserstein1_empirical(g, std::vector<double>{2.0}, m), 2.0 - g.x(7), 1e-14);
    EXPECT_NEAR(wasserstein1_empirical(g, std::vector<double>{-1.5}, m), g.x(7) + 1.5, 1e-14);
}

TEST(Wasserstein1Empirical, SplitSamplesAgainstUniform) {
    const GridSpec g{0.0, 2.0, 2, 1.0, 1};
    const std::vector<double> m{0.5, 0.5};
    const std::vector<double> s{0.5, 1.5};
    EXPECT_NEAR(wasserstein1_empirical(g, s, m), 0.25, 1e-15);
}

TEST(Wasserstein1Empirical, Errors) {
    const GridSpec g{0.0, 1.0, 10, 1.0, 1};
    EXPECT_THROW(wasserstein1_empirical(g, std::vector<double>{}, std::vector<double>(10, 0.1)), Error);
    EXPECT_THROW(wasserstein1_empirical(g, std::vector<double>{0.5}, std::vector<double>(9, 0.1)), Error);
}

class MeanSteeringMc : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        problem_ = new Problem(mean_steering());
        solution_ = new KktSolution(solve_kkt(*problem_));
    }
    static void TearDownTestSuite() {
        delete solution_;
        delete problem_;
    }
    static Problem* problem_;
    static KktSolution* solution_;
};
Problem* MeanSteeringMc::problem_ = nullptr;
KktSolution* MeanSteeringMc::solution_ = nullptr;

TEST_F(MeanSteeringMc, VerifyWithinBudgets) {
    const auto r = verify(*solution_, *problem_, 100000, 42);
    EXPECT_LE(r.w1_terminal, 0.02);
    EXPECT_LE(std::abs(r.cost_mc - solution_->primal), 0.01);
    EXPECT_LE(r.psi_mc, 0.01);
    EXPECT_GE(r.cost_mc_stderr, 0.0);
    EXPECT_EQ(r.n_particles, 100000);
    EXPECT_EQ(r.seed, 42u);
}

TEST_F(MeanSteeringMc, Reproducible) {
    const auto a = verify(*solution_, *problem_, 2000, 11);
    const auto b = verify(*solution_, *problem_, 2000, 11);
    EXPECT_EQ(a.w1_terminal, b.w1_terminal);
    EXPECT_EQ(a.w1_max_over_t, b.w1_max_over_t);
    EXPECT_EQ(a.cost_mc, b.cost_mc);
    EXPECT_EQ(a.cost_mc_stderr, b.cost_mc_stderr);
    EXPECT_EQ(a.psi_mc, b.psi_mc);
}

TEST_F(MeanSteeringMc, PerturbedPolicyDetected) {
    auto pol = solution_->policy();
    for (double& b : pol.drift.values) b += 0.5;
    const auto r = verify(*problem_, pol, solution_->m(), 20000, 8);
    EXPECT_NEAR(r.cost_mc - solution_->primal, 0.625, 0.02);
    EXPECT_LT(r.psi_mc, solution_->psi_T - 0.4);
}

TEST_F(MeanSteeringMc, OneSidedGap) {
    const double w1_budget = 0.02;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto r = verify(*solution_, *problem_, 20000, seed);
        EXPECT_GE(r.cost_mc, solution_->primal - 3.0 * r.cost_mc_stderr - w1_budget);
    }
}

TEST_F(MeanSteeringMc, W1ShrinksLikeInverseRootN) {
    auto mean_w1 = [&](std::int64_t n) {
        double s = 0.0;
        for (std::uint64_t seed = 100; seed < 105; ++seed) s += verify(*solution_, *problem_, n, seed).w1_terminal;
        return s / 5.0;
    };
    const double ratio = mean_w1(1000) / mean_w1(31623);
    EXPECT_GE(ratio, 2.0);
    EXPECT_LE(ratio, 5.0);
}

TEST(Verify, ZeroDataCostIsZero) {
    const GridSpec g{-6.0, 6.0, 120, 1.0, 50};
    auto p = diffusion_only(g);
    p.initial = Gaussian{0.0, 0.01};
    const auto sol = solve_kkt(p);
    const auto r = verify(sol, p, 2000, 1);
    EXPECT_EQ(r.cost_mc, 0.0);
    EXPECT_EQ(r.cost_mc_stderr, 0.0);
}

TEST(Verify, UnsolvedRejected) {
    EXPECT_THROW(verify(KktSolution{}, mean_steering(1.0, 100, 50), 10, 1), Error);
}
