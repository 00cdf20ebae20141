#pragma once

// Backward HJB solve
//
//   -d_t u + H(t, x, D u, D^2 u) = source(t, x),   u(T, .) = terminal
//
// fully implicit in time, upwind in the gradient, centered second
// differences, reflecting ends. Each backward step is solved by policy
// iteration: freeze the upwind argmax, solve the tridiagonal linear step,
// re-extract the argmax, repeat.

#include "fpc/error.hpp"
#include "fpc/grid.hpp"
#include "fpc/model.hpp"
#include "fpc/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace fpc {

/// Terminal condition split into nodal values and an additive constant.
/// The constant is carried analytically: it shifts u and never enters the
/// policy, which is the discrete form of the normalization freedom of
/// functional derivatives.
struct TerminalData {
    std::vector<double> values;
    double offset = 0.0;
};

struct HjbOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
};

struct HjbSolution {
    ScalarField u;
    FluxFields policy;
    double residual_sup = 0.0;
    double lipschitz_x = 0.0;
    double lipschitz_t = 0.0;
    int max_policy_iterations = 0;
};

namespace detail {

struct LevelStencil {
    double p_back, p_fwd, M;
};

inline LevelStencil stencil(std::span<const double> u, int i, double h) {
    const int n = static_cast<int>(u.size());
    const double um = i > 0 ? u[i - 1] : u[i];
    const double up = i + 1 < n ? u[i + 1] : u[i];
    return {(u[i] - um) / h, (up - u[i]) / h, (up - 2.0 * u[i] + um) / (h * h)};
}

// Upwind argmax at every node of one level.
inline void extract_policy(const ControlModel& model, const GridSpec& g, double t, std::span<const double> u,
                           std::span<double> drift, std::span<double> diffusion, std::span<double> cost) {
    const double h = g.h();
    for (int i = 0; i < g.nx; ++i) {
        const auto s = stencil(u, i, h);
        const auto c = hamiltonian_upwind(model, t, g.x(i), s.p_back, s.p_fwd, s.M).control;
        drift[i] = c.drift;
        diffusion[i] = c.diffusion;
        cost[i] = c.cost;
    }
}

inline void require_finite(std::span<const double> v, const char* what, int level) {
    for (double x : v)
        if (!std::isfinite(x))
            throw Error(ErrorKind::Blowup, std::string(what) + " non-finite at level " + std::to_string(level));
}

} // namespace detail

/// Pointwise residual of the discrete equation at levels 0..nt-1
///   -(u^{n+1} - u^n)/dt + H_upwind(t_n, x, u^n) - source^n;
/// level nt is left at zero.
inline ScalarField hjb_residual(const ControlModel& model, const GridSpec& g, const ScalarField& u,
                                const ScalarField& source) {
    require_same_size(u.values.size(), g.levels() * g.cells(), "hjb_residual u");
    require_same_size(source.values.size(), g.levels() * g.cells(), "hjb_residual source");
    ScalarField r(g);
    const double dt = g.dt(), h = g.h();
    for (int n = 0; n < g.nt; ++n) {
        const auto un = u.level(n);
        for (int i = 0; i < g.nx; ++i) {
            const auto s = detail::stencil(un, i, h);
            const double H = hamiltonian_upwind(model, g.t(n), g.x(i), s.p_back, s.p_fwd, s.M).value;
            r.at(n, i) = -(u.at(n + 1, i) - un[i]) / dt + H - source.at(n, i);
        }
    }
    return r;
}

/// Largest |value| over levels 0..nt-1, skipping `margin` cells at each end.
inline double sup_abs(const ScalarField& f, int margin = 0, bool include_last_level = false) {
    double s = 0.0;
    const int last = include_last_level ? f.grid.nt : f.grid.nt - 1;
    for (int n = 0; n <= last; ++n)
        for (int i = margin; i < f.grid.nx - margin; ++i) s = std::max(s, std::abs(f.at(n, i)));
    return s;
}

/// One frozen-policy backward step (I - dt G)^{-1} phi.
inline std::vector<double> hjb_linear_step(const GridSpec& g, std::span<const double> drift,
                                           std::span<const double> diffusion, std::span<const double> phi) {
    return solve(implicit_step_matrix(generator(drift, diffusion, g.h()), g.dt()), phi);
}

/// Interior Lipschitz constants of u: max |centered D_x u| and max |D_t u|.
inline std::pair<double, double> lipschitz_constants(const ScalarField& u) {
    const auto& g = u.grid;
    double lx = 0.0, lt = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 1; i + 1 < g.nx; ++i)
            lx = std::max(lx, std::abs(u.at(n, i + 1) - u.at(n, i - 1)) / (2.0 * g.h()));
        if (n < g.nt)
            for (int i = 0; i < g.nx; ++i) lt = std::max(lt, std::abs(u.at(n + 1, i) - u.at(n, i)) / g.dt());
    }
    return {lx, lt};
}

inline HjbSolution solve_hjb_backward(const ControlModel& model, const GridSpec& g, const ScalarField& source,
                                      const TerminalData& terminal, const HjbOptions& opt = {}) {
    g.validate();
    model.validate();
    require_same_size(source.values.size(), g.levels() * g.cells(), "hjb source");
    require_same_size(terminal.values.size(), g.cells(), "hjb terminal");
    detail::require_finite(terminal.values, "terminal data", g.nt);
    detail::require_finite(source.values, "source", 0);

    const double dt = g.dt(), h = g.h();
    const std::size_t nx = g.cells();
    HjbSolution sol;
    sol.u = ScalarField(g);
    sol.policy = FluxFields(g);
    std::vector<double> cost(nx), rhs(nx);

    std::copy(terminal.values.begin(), terminal.values.end(), sol.u.level(g.nt).begin());
    detail::extract_policy(model, g, g.t(g.nt), sol.u.level(g.nt), sol.policy.drift.level(g.nt),
                           sol.policy.diffusion.level(g.nt), cost);

    std::vector<double> w(nx), drift(nx), diffusion(nx);
    for (int n = g.nt - 1; n >= 0; --n) {
        const double t = g.t(n);
        const auto next = sol.u.level(n + 1);
        const auto src = source.level(n);
        std::copy(next.begin(), next.end(), w.begin());
        double change = 0.0;
        int it = 0;
        for (; it < opt.max_iterations; ++it) {
            detail::extract_policy(model, g, t, w, drift, diffusion, cost);
            for (std::size_t i = 0; i < nx; ++i) rhs[i] = next[i] + dt * (src[i] + cost[i]);
            auto w_new = solve(implicit_step_matrix(generator(drift, diffusion, h), dt), rhs);
            detail::require_finite(w_new, "value function", n);
            change = 0.0;
            for (std::size_t i = 0; i < nx; ++i) change = std::max(change, std::abs(w_new[i] - w[i]));
            w = std::move(w_new);
            if (change < opt.tolerance) break;
        }
        if (it == opt.max_iterations) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "policy iteration stalled at level %d after %d iterations (last change %.3g)",
                          n, opt.max_iterations, change);
            throw Error(ErrorKind::NonConvergence, buf);
        }
        sol.max_policy_iterations = std::max(sol.max_policy_iterations, it + 1);
        std::copy(w.begin(), w.end(), sol.u.level(n).begin());
        detail::extract_policy(model, g, t, w, sol.policy.drift.level(n), sol.policy.diffusion.level(n), cost);
    }

    sol.residual_sup = sup_abs(hjb_residual(model, g, sol.u, source));
    std::tie(sol.lipschitz_x, sol.lipschitz_t) = lipschitz_constants(sol.u);
    if (terminal.offset != 0.0)
        for (double& v : sol.u.values) v += terminal.offset;
    return sol;
}

/// Convenience: zero source at every level.
inline ScalarField zero_source(const GridSpec& g) { return ScalarField(g, 0.0); }

struct BernsteinReport {
    std::vector<double> lipschitz_x;     // one per refinement level
    std::vector<bool> growth_flag;       // growth > 20% between consecutive refinements
    double max_relative_variation = 0.0; // max |L_k - L_0| / L_0
    bool stable() const { return std::none_of(growth_flag.begin(), growth_flag.end(), [](bool b) { return b; }); }
};

/// Lipschitz-in-space stability of a family of solutions on refined grids.
inline BernsteinReport bernstein_diagnostic(std::span<const HjbSolution> solutions) {
    if (solutions.size() < 2) throw Error(ErrorKind::Precondition, "bernstein diagnostic needs >= 2 refinements");
    BernsteinReport rep;
    for (const auto& s : solutions) rep.lipschitz_x.push_back(s.lipschitz_x);
    const double base = rep.lipschitz_x.front();
    for (std::size_t k = 1; k < rep.lipschitz_x.size(); ++k) {
        const double prev = rep.lipschitz_x[k - 1], cur = rep.lipschitz_x[k];
        rep.growth_flag.push_back(cur > 1.2 * prev && cur - prev > 1e-14);
        if (base > 0.0) rep.max_relative_variation = std::max(rep.max_relative_variation, std::abs(cur - base) / base);
        else rep.max_relative_variation = std::max(rep.max_relative_variation, std::abs(cur));
    }
    return rep;
}

} // namespace fpc
