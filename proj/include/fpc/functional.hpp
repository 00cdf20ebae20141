#pragma once

// Functionals of probability measures (constraint, running and terminal
// costs) with their linear functional derivatives on the grid.

#include "fpc/error.hpp"
#include "fpc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace fpc {

enum class FunctionalKind { Zero, Linear, MeanShortfall, VarianceCap, QuadraticMean };
enum class FunctionalRole { Constraint, RunningCost, TerminalCost };

/// Closed-form vocabulary of the Linear kind's kernel h.
enum class KernelTag { X, X2, CMinusX, Table };

struct MeasureFunctional {
    FunctionalKind kind = FunctionalKind::Zero;
    FunctionalRole role = FunctionalRole::Constraint;
    KernelTag tag = KernelTag::X;
    double param = 0.0;         // c (MeanShortfall, c-x kernel) or v (VarianceCap)
    std::vector<double> table;  // nodal values of h for KernelTag::Table

    static MeasureFunctional zero() { return {}; }
    static MeasureFunctional linear(KernelTag tag, double c = 0.0) {
        MeasureFunctional f;
        f.kind = FunctionalKind::Linear;
        f.tag = tag;
        f.param = c;
        return f;
    }
    static MeasureFunctional linear_table(std::vector<double> h) {
        MeasureFunctional f = linear(KernelTag::Table);
        f.table = std::move(h);
        for (double v : f.table)
            if (!std::isfinite(v)) throw Error(ErrorKind::Config, "linear kernel table must be finite");
        return f;
    }
    static MeasureFunctional mean_shortfall(double c) {
        MeasureFunctional f;
        f.kind = FunctionalKind::MeanShortfall;
        f.param = c;
        return f;
    }
    static MeasureFunctional variance_cap(double v) {
        MeasureFunctional f;
        f.kind = FunctionalKind::VarianceCap;
        f.param = v;
        return f;
    }
    static MeasureFunctional quadratic_mean() {
        MeasureFunctional f;
        f.kind = FunctionalKind::QuadraticMean;
        return f;
    }

    MeasureFunctional with_role(FunctionalRole r) const {
        auto f = *this;
        f.role = r;
        return f;
    }

    /// Zero, Linear and MeanShortfall are affine in m.
    bool is_linear() const {
        return kind == FunctionalKind::Zero || kind == FunctionalKind::Linear || kind == FunctionalKind::MeanShortfall;
    }

    friend bool operator==(const MeasureFunctional&, const MeasureFunctional&) = default;
};

namespace detail {

inline void check_table(const MeasureFunctional& F, const GridSpec& g) {
    if (F.kind == FunctionalKind::Linear && F.tag == KernelTag::Table)
        require_same_size(F.table.size(), g.cells(), "linear kernel table");
}

// Kernel value of a Linear functional at an arbitrary position; tables are
// interpolated linearly between cell centers and clamped at the ends.
inline double kernel_at(const MeasureFunctional& F, const GridSpec& g, double x) {
    switch (F.tag) {
    case KernelTag::X: return x;
    case KernelTag::X2: return x * x;
    case KernelTag::CMinusX: return F.param - x;
    case KernelTag::Table: {
        const double s = (x - g.x(0)) / g.h();
        if (s <= 0.0) return F.table.front();
        if (s >= g.nx - 1) return F.table.back();
        const int i = static_cast<int>(s);
        const double w = s - i;
        return (1.0 - w) * F.table[i] + w * F.table[i + 1];
    }
    }
    return 0.0;
}

} // namespace detail

/// Nodal h with F(m) = sum_i h_i m_i, for functionals in the linear class.
/// MeanShortfall(c) has h(x) = c - x.
inline std::vector<double> linear_kernel(const MeasureFunctional& F, const GridSpec& g) {
    std::vector<double> h(g.cells(), 0.0);
    switch (F.kind) {
    case FunctionalKind::Zero: break;
    case FunctionalKind::Linear:
        detail::check_table(F, g);
        if (F.tag == KernelTag::Table) h = F.table;
        else
            for (int i = 0; i < g.nx; ++i) h[i] = detail::kernel_at(F, g, g.x(i));
        break;
    case FunctionalKind::MeanShortfall:
        for (int i = 0; i < g.nx; ++i) h[i] = F.param - g.x(i);
        break;
    default: throw Error(ErrorKind::Precondition, "linear_kernel on a nonlinear functional");
    }
    return h;
}

inline double eval_functional(const MeasureFunctional& F, const GridSpec& g, std::span<const double> m) {
    require_same_size(g.cells(), m.size(), "eval_functional");
    switch (F.kind) {
    case FunctionalKind::Zero: return 0.0;
    case FunctionalKind::Linear: return integrate(linear_kernel(F, g), m);
    case FunctionalKind::MeanShortfall: return F.param - mean(g, m);
    case FunctionalKind::VarianceCap: {
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < g.nx; ++i) {
            m1 += g.x(i) * m[i];
            m2 += g.x(i) * g.x(i) * m[i];
        }
        return m2 - m1 * m1 - F.param;
    }
    case FunctionalKind::QuadraticMean: {
        const double mu = mean(g, m);
        return mu * mu;
    }
    }
    return 0.0;
}

/// x -> dF/dm(m, x) at the cell centers. With `normalize` the discrete
/// integral against m is subtracted so that sum_i dF_i m_i = 0.
inline std::vector<double> functional_derivative(const MeasureFunctional& F, const GridSpec& g,
                                                 std::span<const double> m, bool normalize) {
    require_same_size(g.cells(), m.size(), "functional_derivative");
    std::vector<double> d(g.cells(), 0.0);
    switch (F.kind) {
    case FunctionalKind::Zero: break;
    case FunctionalKind::Linear: d = linear_kernel(F, g); break;
    case FunctionalKind::MeanShortfall:
        for (int i = 0; i < g.nx; ++i) d[i] = -g.x(i);
        break;
    case FunctionalKind::VarianceCap: {
        const double mu = mean(g, m);
        for (int i = 0; i < g.nx; ++i) d[i] = g.x(i) * g.x(i) - 2.0 * g.x(i) * mu;
        break;
    }
    case FunctionalKind::QuadraticMean: {
        const double mu = mean(g, m);
        for (int i = 0; i < g.nx; ++i) d[i] = 2.0 * mu * g.x(i);
        break;
    }
    }
    if (normalize && F.kind != FunctionalKind::Zero) {
        const double c = integrate(d, m);
        for (double& v : d) v -= c;
    }
    return d;
}

/// Worst |F(m + e(mu - m)) - F(m) - e <dF/dm(m), mu - m>| / e^2 over the e list.
inline double gateaux_check(const MeasureFunctional& F, const GridSpec& g, std::span<const double> m,
                            std::span<const double> mu, std::span<const double> epsilons) {
    require_same_size(m.size(), mu.size(), "gateaux_check");
    const auto d = functional_derivative(F, g, m, false);
    const double F0 = eval_functional(F, g, m);
    double first = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) first += d[i] * (mu[i] - m[i]);
    double worst = 0.0;
    std::vector<double> me(m.size());
    for (double e : epsilons) {
        for (std::size_t i = 0; i < m.size(); ++i) me[i] = m[i] + e * (mu[i] - m[i]);
        const double r = std::abs(eval_functional(F, g, me) - F0 - e * first);
        worst = std::max(worst, r / (e * e));
    }
    return worst;
}

/// F evaluated on the empirical measure of `samples`.
inline double eval_functional_samples(const MeasureFunctional& F, const GridSpec& g, std::span<const double> samples) {
    if (samples.empty()) throw Error(ErrorKind::Precondition, "empirical measure needs at least one sample");
    const double n = static_cast<double>(samples.size());
    switch (F.kind) {
    case FunctionalKind::Zero: return 0.0;
    case FunctionalKind::Linear: {
        detail::check_table(F, g);
        double s = 0.0;
        for (double x : samples) s += detail::kernel_at(F, g, x);
        return s / n;
    }
    case FunctionalKind::MeanShortfall: {
        double s = 0.0;
        for (double x : samples) s += x;
        return F.param - s / n;
    }
    case FunctionalKind::VarianceCap: {
        double s = 0.0;
        for (double x : samples) s += x;
        const double mu = s / n;
        double v = 0.0;
        for (double x : samples) v += (x - mu) * (x - mu);
        return v / n - F.param;
    }
    case FunctionalKind::QuadraticMean: {
        double s = 0.0;
        for (double x : samples) s += x;
        return (s / n) * (s / n);
    }
    }
    return 0.0;
}

} // namespace fpc
