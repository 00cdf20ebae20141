#pragma once

// Uniform space-time grid, field containers, discrete quadrature and the
// one-dimensional Wasserstein distance.
//
// Space is cut into nx cells of width h on [x_min, x_max]. Densities are
// stored as cell masses; scalar fields (value function, kernels) are point
// values at the cell centers. Time levels are t_n = n * dt, n = 0..nt.

#include "fpc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace fpc {

struct GridSpec {
    double x_min = -1.0;
    double x_max = 1.0;
    int nx = 8;
    double T = 1.0;
    int nt = 2;

    double h() const { return (x_max - x_min) / nx; }
    double dt() const { return T / nt; }
    double x(int i) const { return x_min + (i + 0.5) * h(); }
    double edge(int i) const { return x_min + i * h(); }
    double t(int n) const { return n * dt(); }
    std::size_t cells() const { return static_cast<std::size_t>(nx); }
    std::size_t levels() const { return static_cast<std::size_t>(nt) + 1; }

    void validate() const {
        if (!(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min))
            throw Error(ErrorKind::Config, "grid requires finite x_max > x_min");
        if (nx < 8) throw Error(ErrorKind::Config, "grid requires nx >= 8");
        if (nt < 2) throw Error(ErrorKind::Config, "grid requires nt >= 2");
        if (!(std::isfinite(T) && T > 0.0)) throw Error(ErrorKind::Config, "grid requires T > 0");
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline std::vector<double> cell_centers(const GridSpec& g) {
    std::vector<double> xs(g.cells());
    for (int i = 0; i < g.nx; ++i) xs[i] = g.x(i);
    return xs;
}

/// Space-time array indexed (level, cell), row-major by level.
struct ScalarField {
    GridSpec grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double fill = 0.0)
        : grid(g), values(g.levels() * g.cells(), fill) {}

    double& at(int n, int i) { return values[static_cast<std::size_t>(n) * grid.cells() + i]; }
    double at(int n, int i) const { return values[static_cast<std::size_t>(n) * grid.cells() + i]; }

    std::span<double> level(int n) {
        return {values.data() + static_cast<std::size_t>(n) * grid.cells(), grid.cells()};
    }
    std::span<const double> level(int n) const {
        return {values.data() + static_cast<std::size_t>(n) * grid.cells(), grid.cells()};
    }
};

/// Cell masses of a probability law at every time level.
struct DensityField : ScalarField {
    using ScalarField::ScalarField;
};

/// Drift b*(t,x) and diffusion D*(t,x) = sigma sigma^T at every node.
struct FluxFields {
    ScalarField drift;
    ScalarField diffusion;

    FluxFields() = default;
    explicit FluxFields(const GridSpec& g) : drift(g), diffusion(g) {}
    const GridSpec& grid() const { return drift.grid; }
};

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw Error(ErrorKind::GridMismatch,
                    std::string(what) + ": sizes " + std::to_string(a) + " and " + std::to_string(b));
}

/// Discrete integral of a nodal function against cell masses.
inline double integrate(std::span<const double> phi, std::span<const double> m) {
    require_same_size(phi.size(), m.size(), "integrate");
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * m[i];
    return s;
}

inline double total_mass(std::span<const double> m) {
    double s = 0.0;
    for (double v : m) s += v;
    return s;
}

inline double mean(const GridSpec& g, std::span<const double> m) {
    require_same_size(g.cells(), m.size(), "mean");
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) s += g.x(i) * m[i];
    return s;
}

inline double variance(const GridSpec& g, std::span<const double> m) {
    const double mu = mean(g, m);
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) s += (g.x(i) - mu) * (g.x(i) - mu) * m[i];
    return s;
}

/// Absolute moment sum |x_i|^r m_i.
inline double moment(const GridSpec& g, std::span<const double> m, double r) {
    if (!(r >= 1.0)) throw Error(ErrorKind::Precondition, "moment order must be >= 1");
    require_same_size(g.cells(), m.size(), "moment");
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) s += std::pow(std::abs(g.x(i)), r) * m[i];
    return s;
}

/// Signed central moment sum (x_i - mean)^k m_i.
inline double central_moment(const GridSpec& g, std::span<const double> m, int k) {
    const double mu = mean(g, m);
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) s += std::pow(g.x(i) - mu, k) * m[i];
    return s;
}

/// W1 between two cell-mass vectors on the same grid: h * sum |F1 - F2|.
inline double wasserstein1(const GridSpec& g, std::span<const double> m1, std::span<const double> m2) {
    require_same_size(m1.size(), m2.size(), "wasserstein1");
    require_same_size(g.cells(), m1.size(), "wasserstein1");
    double c1 = 0.0, c2 = 0.0, s = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        c1 += m1[i];
        c2 += m2[i];
        s += std::abs(c1 - c2);
    }
    return g.h() * s;
}

// ---------------------------------------------------------------------------
// Initial laws

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
    friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

struct PointMass {
    double x0 = 0.0;
    friend bool operator==(const PointMass&, const PointMass&) = default;
};

struct MixtureComponent {
    double weight = 1.0;
    std::variant<Gaussian, PointMass> dist;
    friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

struct Mixture {
    std::vector<MixtureComponent> components;
    friend bool operator==(const Mixture&, const Mixture&) = default;
};

using InitialSpec = std::variant<Gaussian, PointMass, Mixture>;

/// Mass leaking outside [x_min, x_max] allowed before projection refuses.
inline constexpr double kMaxOutsideMass = 1e-6;

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline int containing_cell(const GridSpec& g, double x) {
    if (x < g.x_min || x > g.x_max) return -1;
    int i = static_cast<int>(std::floor((x - g.x_min) / g.h()));
    return std::clamp(i, 0, g.nx - 1);
}

// Unnormalized cell masses; returns the mass found outside the domain.
inline double add_component(const GridSpec& g, const Gaussian& d, double w, std::vector<double>& out) {
    if (!(d.variance > 0.0)) throw Error(ErrorKind::Config, "gaussian variance must be positive");
    const double sd = std::sqrt(d.variance);
    double prev = normal_cdf((g.edge(0) - d.mean) / sd);
    const double below = prev;
    for (int i = 0; i < g.nx; ++i) {
        const double next = normal_cdf((g.edge(i + 1) - d.mean) / sd);
        out[i] += w * std::max(next - prev, 0.0);
        prev = next;
    }
    const double above = 0.5 * std::erfc((g.x_max - d.mean) / (sd * std::sqrt(2.0)));
    return w * (below + above);
}

inline double add_component(const GridSpec& g, const PointMass& d, double w, std::vector<double>& out) {
    const int i = containing_cell(g, d.x0);
    if (i < 0) return w;
    out[i] += w;
    return 0.0;
}

} // namespace detail

/// Project an initial law onto cell masses, renormalized to unit mass.
inline std::vector<double> project_initial(const InitialSpec& spec, const GridSpec& g) {
    g.validate();
    std::vector<double> m(g.cells(), 0.0);
    double outside = 0.0;
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Mixture>) {
                if (d.components.empty()) throw Error(ErrorKind::Config, "mixture has no components");
                double wsum = 0.0;
                for (const auto& c : d.components) {
                    if (!(c.weight > 0.0)) throw Error(ErrorKind::Config, "mixture weights must be positive");
                    wsum += c.weight;
                }
                for (const auto& c : d.components)
                    outside += std::visit(
                        [&](const auto& cd) { return detail::add_component(g, cd, c.weight / wsum, m); }, c.dist);
            } else {
                outside += detail::add_component(g, d, 1.0, m);
            }
        },
        spec);
    if (outside >= kMaxOutsideMass) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "initial law has mass %.3g outside [%g, %g]", outside, g.x_min, g.x_max);
        throw Error(ErrorKind::DomainTooSmall, buf);
    }
    const double s = total_mass(m);
    for (double& v : m) v /= s;
    return m;
}

/// Mass held in the two outermost cells.
inline double boundary_mass(std::span<const double> m) {
    if (m.empty()) return 0.0;
    return m.size() == 1 ? m[0] : m.front() + m.back();
}

// ---------------------------------------------------------------------------
// CSV export: header `t,x,value`, rows by level then cell, 17 significant digits.

inline void write_field_csv(std::ostream& os, const ScalarField& f) {
    os << "t,x,value\n";
    char buf[96];
    for (int n = 0; n <= f.grid.nt; ++n)
        for (int i = 0; i < f.grid.nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.grid.t(n), f.grid.x(i), f.at(n, i));
            os << buf;
        }
}

} // namespace fpc
