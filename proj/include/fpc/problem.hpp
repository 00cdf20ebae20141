#pragma once

#include "fpc/functional.hpp"
#include "fpc/grid.hpp"
#include "fpc/model.hpp"

namespace fpc {

struct Tolerances {
    double feasibility = 1e-3;           // psi_T <= feasibility
    double complementarity = 1e-3;       // |lambda psi_T| <= complementarity (1 + lambda)
    double fixed_point = 1e-6;           // sup_t W1 defect of the mean-field loop
    int fixed_point_max_iterations = 200;
    double damping = 0.5;
    double damping_min = 1.0 / 64.0;
    double hjb = 1e-10;                  // policy-iteration step change
    int hjb_max_iterations = 50;
    double slater_margin = 1e-3;         // psi_T below -margin counts as strictly feasible
    double lambda_max = 1e6;
    int kkt_max_iterations = 200;

    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

/// Everything that defines one constrained control problem.
struct Problem {
    ControlModel model;
    GridSpec grid;
    InitialSpec initial = Gaussian{};
    MeasureFunctional running_cost = MeasureFunctional::zero().with_role(FunctionalRole::RunningCost);
    MeasureFunctional terminal_cost = MeasureFunctional::zero().with_role(FunctionalRole::TerminalCost);
    MeasureFunctional constraint = MeasureFunctional::zero();
    Tolerances tol;

    /// f2, g and Psi all affine in m: the HJB data do not depend on m.
    bool is_linear_class() const {
        return running_cost.is_linear() && terminal_cost.is_linear() && constraint.is_linear();
    }

    void validate() const {
        grid.validate();
        model.validate();
        for (const auto* f : {&running_cost, &terminal_cost, &constraint})
            if (f->kind == FunctionalKind::Linear && f->tag == KernelTag::Table)
                require_same_size(f->table.size(), grid.cells(), "linear kernel table");
        const double positives[] = {tol.feasibility, tol.complementarity, tol.fixed_point, tol.damping,
                                    tol.damping_min, tol.hjb, tol.slater_margin, tol.lambda_max};
        for (double v : positives)
            if (!(v > 0.0)) throw Error(ErrorKind::Config, "tolerances must be positive");
        if (tol.fixed_point_max_iterations < 1 || tol.hjb_max_iterations < 1 || tol.kkt_max_iterations < 1)
            throw Error(ErrorKind::Config, "iteration caps must be positive");
        project_initial(initial, grid);
    }
};

} // namespace fpc
