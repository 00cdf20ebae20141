#pragma once

// Tridiagonal systems and the frozen-policy generator shared by the HJB and
// Fokker-Planck steps.

#include "fpc/error.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace fpc {

/// Row i reads lower[i] * v[i-1] + diag[i] * v[i] + upper[i] * v[i+1].
struct Tridiagonal {
    std::vector<double> lower, diag, upper;

    explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
    std::size_t size() const { return diag.size(); }

    Tridiagonal transposed() const {
        const std::size_t n = size();
        Tridiagonal t(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.diag[i] = diag[i];
            if (i > 0) t.lower[i] = upper[i - 1];
            if (i + 1 < n) t.upper[i] = lower[i + 1];
        }
        return t;
    }

    std::vector<double> apply(std::span<const double> v) const {
        const std::size_t n = size();
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * v[i];
            if (i > 0) s += lower[i] * v[i - 1];
            if (i + 1 < n) s += upper[i] * v[i + 1];
            out[i] = s;
        }
        return out;
    }
};

/// Thomas algorithm. For M-matrices (positive diagonal, nonpositive
/// off-diagonals, diagonal dominance) every intermediate stays signed, so a
/// nonnegative right-hand side yields a nonnegative solution.
inline std::vector<double> solve(const Tridiagonal& A, std::span<const double> rhs) {
    const std::size_t n = A.size();
    if (rhs.size() != n) throw Error(ErrorKind::GridMismatch, "tridiagonal rhs size mismatch");
    std::vector<double> c(n), d(n), x(n);
    double den = A.diag[0];
    if (den == 0.0 || !std::isfinite(den)) throw Error(ErrorKind::LinearSolve, "zero pivot at row 0");
    c[0] = n > 1 ? A.upper[0] / den : 0.0;
    d[0] = rhs[0] / den;
    for (std::size_t i = 1; i < n; ++i) {
        den = A.diag[i] - A.lower[i] * c[i - 1];
        if (den == 0.0 || !std::isfinite(den))
            throw Error(ErrorKind::LinearSolve, "zero pivot at row " + std::to_string(i));
        c[i] = i + 1 < n ? A.upper[i] / den : 0.0;
        d[i] = (rhs[i] - A.lower[i] * d[i - 1]) / den;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

/// Generator of the upwind Markov chain for drift/diffusion at one level:
///   (G u)_i = b_i Dup u_i + D_i (u_{i+1} - 2 u_i + u_{i-1}) / h^2
/// with reflecting (copy-out ghost) ends, so every row sums to zero.
inline Tridiagonal generator(std::span<const double> drift, std::span<const double> diffusion, double h) {
    const std::size_t n = drift.size();
    Tridiagonal G(n);
    const double ih = 1.0 / h, ih2 = 1.0 / (h * h);
    for (std::size_t i = 0; i < n; ++i) {
        const double up = diffusion[i] * ih2 + std::max(drift[i], 0.0) * ih;
        const double lo = diffusion[i] * ih2 + std::max(-drift[i], 0.0) * ih;
        const double to_up = i + 1 < n ? up : 0.0;
        const double to_lo = i > 0 ? lo : 0.0;
        G.lower[i] = to_lo;
        G.upper[i] = to_up;
        G.diag[i] = -(to_lo + to_up);
    }
    return G;
}

/// I - dt G, the implicit step matrix.
inline Tridiagonal implicit_step_matrix(const Tridiagonal& G, double dt) {
    Tridiagonal A(G.size());
    for (std::size_t i = 0; i < G.size(); ++i) {
        A.lower[i] = -dt * G.lower[i];
        A.upper[i] = -dt * G.upper[i];
        A.diag[i] = 1.0 - dt * G.diag[i];
    }
    return A;
}

} // namespace fpc
