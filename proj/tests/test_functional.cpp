#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fpc;

namespace {

const GridSpec kGrid{-4.0, 6.0, 400, 1.0, 200};

std::vector<double> gaussian(double mu, double var) { return project_initial(Gaussian{mu, var}, kGrid); }

} // namespace

TEST(EvalFunctional, MeanShortfallOnPointMass) {
    const auto m = project_initial(PointMass{0.0}, kGrid);
    // The cell containing 0 has center h/2.
    EXPECT_NEAR(eval_functional(MeasureFunctional::mean_shortfall(1.0), kGrid, m), 1.0, kGrid.h());
}

TEST(EvalFunctional, VarianceCapOnPointMass) {
    const auto m = project_initial(PointMass{0.3}, kGrid);
    EXPECT_NEAR(eval_functional(MeasureFunctional::variance_cap(1.0), kGrid, m), -1.0, 1e-14);
}

TEST(EvalFunctional, LinearSquareKernelOnGaussian) {
    const auto m = gaussian(0.0, 0.25);
    EXPECT_NEAR(eval_functional(MeasureFunctional::linear(KernelTag::X2), kGrid, m), 0.25, 0.0025);
    std::vector<double> h(kGrid.cells());
    for (int i = 0; i < kGrid.nx; ++i) h[i] = kGrid.x(i) * kGrid.x(i);
    EXPECT_DOUBLE_EQ(eval_functional(MeasureFunctional::linear_table(h), kGrid, m),
                     eval_functional(MeasureFunctional::linear(KernelTag::X2), kGrid, m));
}

TEST(EvalFunctional, QuadraticMeanAndZero) {
    const auto m = gaussian(1.5, 0.1);
    EXPECT_NEAR(eval_functional(MeasureFunctional::quadratic_mean(), kGrid, m), 2.25, 1e-10);
    EXPECT_EQ(eval_functional(MeasureFunctional::zero(), kGrid, m), 0.0);
}

TEST(FunctionalDerivative, MeanShortfallRawIsMinusX) {
    const auto d = functional_derivative(MeasureFunctional::mean_shortfall(2.0), kGrid, gaussian(0.0, 0.5), false);
    for (int i = 0; i < kGrid.nx; ++i) EXPECT_EQ(d[i], -kGrid.x(i));
}

TEST(FunctionalDerivative, VarianceCapRawAndNormalized) {
    const auto m = gaussian(0.7, 0.3);
    const auto F = MeasureFunctional::variance_cap(0.5);
    const double mu = mean(kGrid, m);
    double ex2 = 0.0;
    for (int i = 0; i < kGrid.nx; ++i) ex2 += kGrid.x(i) * kGrid.x(i) * m[i];
    const auto raw = functional_derivative(F, kGrid, m, false);
    const auto nrm = functional_derivative(F, kGrid, m, true);
    for (int i = 0; i < kGrid.nx; ++i) {
        const double x = kGrid.x(i);
        EXPECT_NEAR(raw[i], x * x - 2.0 * x * mu, 1e-12);
        EXPECT_NEAR(nrm[i], x * x - 2.0 * x * mu - (ex2 - 2.0 * mu * mu), 1e-12);
    }
}

TEST(FunctionalDerivative, QuadraticMeanNormalized) {
    const auto m = gaussian(-0.4, 0.2);
    const double mu = mean(kGrid, m);
    const auto d = functional_derivative(MeasureFunctional::quadratic_mean(), kGrid, m, true);
    for (int i = 0; i < kGrid.nx; ++i) EXPECT_NEAR(d[i], 2.0 * mu * (kGrid.x(i) - mu), 1e-13);
}

TEST(FunctionalDerivative, NormalizedIntegratesToZero) {
    const auto m = gaussian(0.2, 0.6);
    for (const auto& F : {MeasureFunctional::mean_shortfall(1.0), MeasureFunctional::variance_cap(0.5),
                          MeasureFunctional::quadratic_mean(), MeasureFunctional::linear(KernelTag::X2)}) {
        const auto d = functional_derivative(F, kGrid, m, true);
        EXPECT_NEAR(integrate(d, m), 0.0, 1e-12);
    }
}

TEST(FunctionalDerivative, LinearIsIndependentOfM) {
    const auto F = MeasureFunctional::linear(KernelTag::CMinusX, 0.5);
    EXPECT_EQ(functional_derivative(F, kGrid, gaussian(0.0, 0.5), false),
              functional_derivative(F, kGrid, gaussian(2.0, 0.1), false));
    EXPECT_EQ(functional_derivative(MeasureFunctional::zero(), kGrid, gaussian(0.0, 0.5), true),
              std::vector<double>(kGrid.cells(), 0.0));
}

TEST(LinearKernel, MeanShortfallKernelIsCMinusX) {
    const auto h = linear_kernel(MeasureFunctional::mean_shortfall(1.0), kGrid);
    for (int i = 0; i < kGrid.nx; ++i) EXPECT_EQ(h[i], 1.0 - kGrid.x(i));
    EXPECT_THROW(linear_kernel(MeasureFunctional::variance_cap(1.0), kGrid), Error);
}

TEST(LinearKernel, TableSizeMustMatchGrid) {
    const auto F = MeasureFunctional::linear_table(std::vector<double>(10, 1.0));
    try {
        linear_kernel(F, kGrid);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
    }
    EXPECT_THROW(MeasureFunctional::linear_table({1.0, NAN}), Error);
}

TEST(GateauxCheck, LinearIsExact) {
    const auto F = MeasureFunctional::linear(KernelTag::X2);
    const std::vector<double> eps{1e-1, 1e-2, 1e-3};
    EXPECT_NEAR(gateaux_check(F, kGrid, gaussian(0.0, 0.5), gaussian(1.0, 0.5), eps), 0.0, 1e-6);
    EXPECT_EQ(gateaux_check(MeasureFunctional::zero(), kGrid, gaussian(0.0, 0.5), gaussian(1.0, 0.5), eps), 0.0);
}

TEST(GateauxCheck, VarianceCapSecondOrderRatioIsBounded) {
    // Var(m + e(mu - m)) - Var(m) - e dVar = -e^2 (mean(mu) - mean(m))^2 exactly.
    const auto m = gaussian(0.0, 0.5), mu = gaussian(1.0, 0.5);
    const auto F = MeasureFunctional::variance_cap(0.5);
    const double shift = mean(kGrid, mu) - mean(kGrid, m);
    for (double e : {1e-1, 1e-2, 1e-3}) {
        const std::vector<double> eps{e};
        EXPECT_NEAR(gateaux_check(F, kGrid, m, mu, eps), shift * shift, 1e-4);
    }
}

TEST(EmpiricalFunctional, MatchesSampleFormulas) {
    const std::vector<double> xs{0.0, 1.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(eval_functional_samples(MeasureFunctional::mean_shortfall(2.0), kGrid, xs), 0.5);
    EXPECT_DOUBLE_EQ(eval_functional_samples(MeasureFunctional::variance_cap(1.0), kGrid, xs), 0.25);
    EXPECT_DOUBLE_EQ(eval_functional_samples(MeasureFunctional::quadratic_mean(), kGrid, xs), 2.25);
    EXPECT_DOUBLE_EQ(eval_functional_samples(MeasureFunctional::linear(KernelTag::X2), kGrid, xs), 3.5);
    EXPECT_THROW(eval_functional_samples(MeasureFunctional::zero(), kGrid, {}), Error);
}
