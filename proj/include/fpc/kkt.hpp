#pragma once

// Multiplier search for the scalar terminal constraint Psi(m(T)) <= 0.

#include "fpc/coupling.hpp"
#include "fpc/error.hpp"
#include "fpc/fpe.hpp"
#include "fpc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <vector>

namespace fpc {

struct KktVisit {
    double lambda, psi_T, primal, dual;
};

struct KktSolution {
    bool solved = false;
    double lambda = 0.0;
    CoupledSolution coupled;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double psi_T = 0.0;
    double complementarity = 0.0;
    std::optional<double> lambda_bound; // Slater bound, once a strictly feasible iterate was seen
    int iterations = 0;                 // coupled solves performed
    std::vector<KktVisit> visited;

    const ScalarField& u() const { return coupled.u(); }
    const DensityField& m() const { return coupled.m(); }
    const FluxFields& policy() const { return coupled.policy(); }
};

/// (J(candidate) - dual_lower) / (-Psi(candidate)) for a strictly feasible candidate.
inline double lambda_upper_bound(double candidate_primal, double candidate_psi, double dual_lower,
                                 double slater_margin = 1e-3) {
    if (!(candidate_psi < -slater_margin)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "Slater candidate not strictly feasible (psi_T = %.3g)", candidate_psi);
        throw Error(ErrorKind::Precondition, buf);
    }
    return (candidate_primal - dual_lower) / (-candidate_psi);
}

inline double lambda_upper_bound(const Problem& problem, const PolicyCandidate& slater, double dual_lower) {
    return lambda_upper_bound(slater.primal, slater.psi_T, dual_lower, problem.tol.slater_margin);
}

namespace detail {

class KktSearch {
public:
    explicit KktSearch(const Problem& p) : problem_(p) {}

    KktSolution run() {
        auto at0 = evaluate(0.0);
        if (at0.psi_T <= problem_.tol.feasibility) return finish(std::move(at0));

        double lo = 0.0;
        std::optional<double> hi;
        double rho = 1.0;
        KktSolution current = std::move(at0);
        while (!hi) {
            const double next = std::max(0.0, current.lambda + rho * current.psi_T);
            current = evaluate(next);
            if (done(current)) return finish(std::move(current));
            if (current.psi_T > 0.0) {
                lo = current.lambda;
                rho *= 2.0;
            } else {
                hi = current.lambda;
            }
        }
        double h = *hi;
        while (true) {
            current = evaluate(0.5 * (lo + h));
            if (done(current)) return finish(std::move(current));
            if (current.psi_T > 0.0) lo = current.lambda;
            else h = current.lambda;
        }
    }

private:
    const Problem& problem_;
    int evaluations_ = 0;
    std::vector<KktVisit> visited_;
    double best_dual_ = -std::numeric_limits<double>::infinity();
    std::optional<double> bound_;
    std::optional<DensityField> warm_;

    bool done(const KktSolution& s) const {
        const auto& tol = problem_.tol;
        return s.psi_T <= tol.feasibility && std::abs(s.lambda * s.psi_T) <= tol.complementarity * (1.0 + s.lambda);
    }

    KktSolution evaluate(double lambda) {
        const auto& tol = problem_.tol;
        if (lambda > tol.lambda_max) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "lambda search exceeded lambda_max = %.3g", tol.lambda_max);
            throw Error(ErrorKind::Infeasible, buf);
        }
        if (bound_ && lambda > 10.0 * std::max(*bound_, 0.0) && lambda > 0.0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "lambda = %.6g exceeds 10x the Slater bound %.6g; constraint likely infeasible",
                          lambda, *bound_);
            throw Error(ErrorKind::Infeasible, buf);
        }
        if (++evaluations_ > tol.kkt_max_iterations)
            throw Error(ErrorKind::NonConvergence, "multiplier search hit the iteration cap");

        KktSolution s;
        s.lambda = lambda;
        s.coupled = solve_coupled(problem_, lambda, warm_ ? &*warm_ : nullptr);
        if (!s.coupled.linear_class) warm_ = s.coupled.m();
        s.primal = primal_value(s.coupled, problem_);
        s.dual = dual_value(s.coupled, problem_);
        s.gap = s.primal - s.dual;
        s.psi_T = terminal_constraint_value(problem_, s.coupled.m());
        visited_.push_back({lambda, s.psi_T, s.primal, s.dual});

        best_dual_ = std::max(best_dual_, s.dual);
        for (const auto& v : visited_) {
            if (v.psi_T < -tol.slater_margin) {
                const double b = lambda_upper_bound(v.primal, v.psi_T, best_dual_, tol.slater_margin);
                bound_ = bound_ ? std::min(*bound_, b) : b;
            }
        }
        return s;
    }

    KktSolution finish(KktSolution s) {
        s.solved = true;
        s.complementarity = s.lambda == 0.0 ? 0.0 : s.lambda * s.psi_T;
        s.lambda_bound = bound_;
        s.iterations = evaluations_;
        s.visited = visited_;
        return s;
    }
};

} // namespace detail

/// lambda = 0 when the unconstrained solution is feasible; otherwise Uzawa
/// ascent lambda <- max(0, lambda + rho psi_T) with rho doubling while
/// psi_T stays positive, then bisection once psi_T changes sign. Stops when
/// psi_T <= tol_feas and |lambda psi_T| <= tol_comp (1 + lambda).
inline KktSolution solve_kkt(const Problem& problem) {
    problem.validate();
    return detail::KktSearch(problem).run();
}

struct KktResidualReport {
    double lambda = 0.0;
    double feasibility = 0.0;      // max(psi_T, 0)
    double complementarity = 0.0;  // |lambda psi_T|
    double gap = 0.0;
    double relative_gap = 0.0;     // |gap| / (1 + |primal|)
    double boundary_mass_max = 0.0;
    double mass_drift = 0.0;
    double min_density = 0.0;
    double hjb_residual = 0.0;
    double fixed_point_residual = 0.0;
    double lipschitz_x = 0.0;
    double continuity = 0.0;
    bool sign_conditions_ok = false;
    bool psi_monotone = true;      // psi_T nonincreasing in lambda over the visited set
};

inline KktResidualReport kkt_residual_report(const KktSolution& sol, const Tolerances& tol = {}) {
    if (!sol.solved) throw Error(ErrorKind::Precondition, "residual report on an unsolved KKT placeholder");
    KktResidualReport r;
    r.lambda = sol.lambda;
    r.feasibility = std::max(sol.psi_T, 0.0);
    r.complementarity = std::abs(sol.complementarity);
    r.gap = sol.gap;
    r.relative_gap = std::abs(sol.gap) / (1.0 + std::abs(sol.primal));
    r.boundary_mass_max = sol.coupled.fpe.boundary_mass_max;
    r.mass_drift = sol.coupled.fpe.mass_drift;
    r.min_density = sol.coupled.fpe.min_value;
    r.hjb_residual = sol.coupled.hjb.residual_sup;
    r.fixed_point_residual = sol.coupled.fixed_point_residual;
    r.lipschitz_x = sol.coupled.hjb.lipschitz_x;
    r.continuity = continuity_diagnostic(sol.m());
    r.sign_conditions_ok = sol.lambda >= 0.0 && sol.psi_T <= tol.feasibility &&
                           r.complementarity <= tol.complementarity * (1.0 + sol.lambda);
    auto v = sol.visited;
    std::sort(v.begin(), v.end(), [](const KktVisit& a, const KktVisit& b) { return a.lambda < b.lambda; });
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k].psi_T > v[k - 1].psi_T + 1e-9) r.psi_monotone = false;
    return r;
}

} // namespace fpc
