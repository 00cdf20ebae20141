#pragma once

// Forward Fokker-Planck solve d_t m + d_x(b* m) - d_xx(D* m) = 0 on cell
// masses. The step matrix is the transpose of the frozen-policy HJB step,
// so <phi, fpe_step(m)> = <hjb_linear_step(phi), m> holds to round-off;
// reflecting ends give zero boundary flux and exact mass conservation.

#include "fpc/error.hpp"
#include "fpc/grid.hpp"
#include "fpc/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace fpc {

struct FpeSolution {
    DensityField m;
    double boundary_mass_max = 0.0;
    double min_value = 0.0;
    double mass_drift = 0.0; // max_n |sum m^n - sum m^0|
};

/// m^{n+1} = (I - dt G^T)^{-1} m^n for one level's drift and diffusion.
inline std::vector<double> fpe_step(const GridSpec& g, std::span<const double> drift,
                                    std::span<const double> diffusion, std::span<const double> m) {
    return solve(implicit_step_matrix(generator(drift, diffusion, g.h()), g.dt()).transposed(), m);
}

/// Level n of the policy drives the step from t_n to t_{n+1}.
inline FpeSolution solve_fpe_forward(const FluxFields& policy, std::span<const double> m0, const GridSpec& g) {
    g.validate();
    require_same_size(policy.drift.values.size(), g.levels() * g.cells(), "fpe policy");
    require_same_size(m0.size(), g.cells(), "fpe initial density");
    FpeSolution sol;
    sol.m = DensityField(g);
    std::copy(m0.begin(), m0.end(), sol.m.level(0).begin());
    const double mass0 = total_mass(m0);
    for (int n = 0; n < g.nt; ++n) {
        std::vector<double> next;
        try {
            next = fpe_step(g, policy.drift.level(n), policy.diffusion.level(n), sol.m.level(n));
        } catch (const Error& e) {
            throw Error(ErrorKind::LinearSolve, "fpe step " + std::to_string(n) + ": " + e.what());
        }
        std::copy(next.begin(), next.end(), sol.m.level(n + 1).begin());
    }
    sol.min_value = *std::min_element(sol.m.values.begin(), sol.m.values.end());
    for (int n = 0; n <= g.nt; ++n) {
        const auto lvl = sol.m.level(n);
        sol.boundary_mass_max = std::max(sol.boundary_mass_max, boundary_mass(lvl));
        sol.mass_drift = std::max(sol.mass_drift, std::abs(total_mass(lvl) - mass0));
    }
    return sol;
}

/// max_n W1(m^n, m^{n+1}) / sqrt(dt): discrete Hoelder-1/2 modulus in time.
inline double continuity_diagnostic(const DensityField& m) {
    const auto& g = m.grid;
    double worst = 0.0;
    for (int n = 0; n < g.nt; ++n) worst = std::max(worst, wasserstein1(g, m.level(n), m.level(n + 1)));
    return worst / std::sqrt(g.dt());
}

} // namespace fpc
