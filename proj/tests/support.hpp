#pragma once

#include "fpc/fpc.hpp"

#include <vector>

namespace fpc::fixtures {

/// Mean steering: QuadraticDrift s = 1, m0 = N(0, 0.01), Psi = c - E[X_T].
inline Problem mean_steering(double c = 1.0, int nx = 400, int nt = 200) {
    Problem p;
    p.model = ControlModel::quadratic(1.0);
    p.grid = {-4.0, 6.0, nx, 1.0, nt};
    p.initial = Gaussian{0.0, 0.01};
    p.constraint = MeasureFunctional::mean_shortfall(c);
    return p;
}

inline std::vector<double> point_mass_at(const GridSpec& g, int cell) {
    std::vector<double> m(g.cells(), 0.0);
    m[cell] = 1.0;
    return m;
}

} // namespace fpc::fixtures
