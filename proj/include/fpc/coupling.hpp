#pragma once

// Coupled HJB / Fokker-Planck system at a fixed multiplier, with the
// mean-field linearization loop for functionals that depend on m, and the
// primal and dual values of the resulting candidate.

#include "fpc/error.hpp"
#include "fpc/fpe.hpp"
#include "fpc/functional.hpp"
#include "fpc/grid.hpp"
#include "fpc/hjb.hpp"
#include "fpc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace fpc {

struct CoupledSolution {
    double lambda = 0.0;
    HjbSolution hjb;
    FpeSolution fpe;
    double fixed_point_residual = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
    bool linear_class = true;

    const ScalarField& u() const { return hjb.u; }
    const DensityField& m() const { return fpe.m; }
    const FluxFields& policy() const { return hjb.policy; }
};

namespace detail {

inline HjbOptions hjb_options(const Tolerances& tol) { return {tol.hjb, tol.hjb_max_iterations}; }

inline DensityField constant_in_time(const GridSpec& g, std::span<const double> m0) {
    DensityField m(g);
    for (int n = 0; n <= g.nt; ++n) std::copy(m0.begin(), m0.end(), m.level(n).begin());
    return m;
}

inline double sup_w1(const DensityField& a, const DensityField& b) {
    double s = 0.0;
    for (int n = 0; n <= a.grid.nt; ++n) s = std::max(s, wasserstein1(a.grid, a.level(n), b.level(n)));
    return s;
}

} // namespace detail

/// Solve the optimality system at multiplier `lambda`.
///
/// Linear class: source f2' and terminal lambda h + g' are m-independent
/// (raw kernels), one HJB and one FPE solve suffice.
///
/// Otherwise iterate on m^k: source^n = normalized df2/dm(m^k(t_{n+1})),
/// terminal = lambda normalized dPsi/dm(m^k(T)) + normalized dg/dm(m^k(T)),
/// solve HJB then FPE, and relax m^{k+1} = (1 - tau) m^k + tau m_new. tau
/// starts at the configured damping, halves whenever the defect
/// sup_t W1(m_new, m^k) grows, and never drops below damping_min.
inline CoupledSolution solve_coupled(const Problem& problem, double lambda, const DensityField* warm_start = nullptr) {
    problem.validate();
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::Precondition, "lambda must be finite and >= 0");
    const auto& g = problem.grid;
    const auto& tol = problem.tol;
    const auto m0 = project_initial(problem.initial, g);

    CoupledSolution sol;
    sol.lambda = lambda;
    sol.linear_class = problem.is_linear_class();

    if (sol.linear_class) {
        ScalarField source(g);
        const auto f2 = linear_kernel(problem.running_cost, g);
        for (int n = 0; n <= g.nt; ++n) std::copy(f2.begin(), f2.end(), source.level(n).begin());
        TerminalData terminal{linear_kernel(problem.terminal_cost, g), 0.0};
        const auto h = linear_kernel(problem.constraint, g);
        for (std::size_t i = 0; i < h.size(); ++i) terminal.values[i] += lambda * h[i];
        sol.hjb = solve_hjb_backward(problem.model, g, source, terminal, detail::hjb_options(tol));
        sol.fpe = solve_fpe_forward(sol.hjb.policy, m0, g);
        sol.iterations = 1;
        sol.fixed_point_residual = 0.0;
        return sol;
    }

    DensityField mk = warm_start && warm_start->grid == g ? *warm_start : detail::constant_in_time(g, m0);
    double tau = tol.damping;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= tol.fixed_point_max_iterations; ++k) {
        ScalarField source(g);
        for (int n = 0; n < g.nt; ++n) {
            const auto d = functional_derivative(problem.running_cost, g, mk.level(n + 1), true);
            std::copy(d.begin(), d.end(), source.level(n).begin());
        }
        {
            const auto d = functional_derivative(problem.running_cost, g, mk.level(g.nt), true);
            std::copy(d.begin(), d.end(), source.level(g.nt).begin());
        }
        TerminalData terminal{functional_derivative(problem.terminal_cost, g, mk.level(g.nt), true), 0.0};
        const auto dpsi = functional_derivative(problem.constraint, g, mk.level(g.nt), true);
        for (std::size_t i = 0; i < dpsi.size(); ++i) terminal.values[i] += lambda * dpsi[i];

        sol.hjb = solve_hjb_backward(problem.model, g, source, terminal, detail::hjb_options(tol));
        sol.fpe = solve_fpe_forward(sol.hjb.policy, m0, g);
        const double defect = detail::sup_w1(sol.fpe.m, mk);
        sol.residual_history.push_back(defect);
        sol.iterations = k;
        sol.fixed_point_residual = defect;
        if (defect < tol.fixed_point) return sol;
        if (defect > previous) tau = std::max(0.5 * tau, tol.damping_min);
        previous = defect;
        for (std::size_t j = 0; j < mk.values.size(); ++j)
            mk.values[j] = (1.0 - tau) * mk.values[j] + tau * sol.fpe.m.values[j];
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean-field loop did not converge in %d iterations (last defect %.3g)",
                  tol.fixed_point_max_iterations, previous);
    std::string msg = buf;
    msg += "; history:";
    for (double r : sol.residual_history) {
        std::snprintf(buf, sizeof buf, " %.3g", r);
        msg += buf;
    }
    throw Error(ErrorKind::NonConvergence, msg);
}

/// Psi(m(T)).
inline double terminal_constraint_value(const Problem& problem, const DensityField& m) {
    return eval_functional(problem.constraint, problem.grid, m.level(problem.grid.nt));
}

/// Relaxed-problem cost of (m, b* m, D* m):
///   sum_{n<nt} dt [ sum_i L(t_n, x_i, b^n_i, D^n_i) m^{n+1}_i + f2(m^{n+1}) ] + g(m^{nt}).
/// Step n of the implicit scheme moves m^n to m^{n+1} under level-n controls,
/// so its running cost is charged on m^{n+1}; this is the pairing under
/// which the discrete HJB and FPE steps are exact adjoints.
inline double primal_value(const Problem& problem, const FluxFields& policy, const DensityField& m) {
    const auto& g = problem.grid;
    double running = 0.0;
    for (int n = 0; n < g.nt; ++n) {
        const auto next = m.level(n + 1);
        double level_cost = 0.0;
        for (int i = 0; i < g.nx; ++i) {
            if (next[i] <= 0.0) continue;
            const double L = lagrangian(problem.model, g.t(n), g.x(i), policy.drift.at(n, i), policy.diffusion.at(n, i));
            if (!std::isfinite(L)) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "L = +inf at occupied node (level %d, x = %.6g)", n, g.x(i));
                throw Error(ErrorKind::Representation, buf);
            }
            level_cost += L * next[i];
        }
        running += g.dt() * (level_cost + eval_functional(problem.running_cost, g, next));
    }
    return running + eval_functional(problem.terminal_cost, g, m.level(g.nt));
}

inline double primal_value(const CoupledSolution& sol, const Problem& problem) {
    return primal_value(problem, sol.policy(), sol.m());
}

/// Linear class: int u(0) dm0. Mean-field class (normalized data):
/// int u(0) dm0 + sum dt f2(m^{n+1}) + g(m(T)).
inline double dual_value(const CoupledSolution& sol, const Problem& problem) {
    const auto& g = problem.grid;
    double v = integrate(sol.u().level(0), sol.m().level(0));
    if (!sol.linear_class) {
        for (int n = 0; n < g.nt; ++n) v += g.dt() * eval_functional(problem.running_cost, g, sol.m().level(n + 1));
        v += eval_functional(problem.terminal_cost, g, sol.m().level(g.nt));
    }
    return v;
}

/// A policy evaluated through the FPE: its law, cost and constraint value.
struct PolicyCandidate {
    FluxFields policy;
    DensityField m;
    double primal = 0.0;
    double psi_T = 0.0;
};

inline FluxFields constant_policy(const GridSpec& g, double drift, double diffusion) {
    FluxFields f(g);
    std::fill(f.drift.values.begin(), f.drift.values.end(), drift);
    std::fill(f.diffusion.values.begin(), f.diffusion.values.end(), diffusion);
    return f;
}

inline PolicyCandidate evaluate_policy(const Problem& problem, FluxFields policy) {
    PolicyCandidate c;
    c.m = solve_fpe_forward(policy, project_initial(problem.initial, problem.grid), problem.grid).m;
    c.primal = primal_value(problem, policy, c.m);
    c.psi_T = terminal_constraint_value(problem, c.m);
    c.policy = std::move(policy);
    return c;
}

} // namespace fpc
