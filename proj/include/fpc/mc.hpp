#pragma once

// Particle verification of a PDE solution: simulate the controlled SDE
// under the recovered Markov policy, then compare law, cost and constraint.

#include "fpc/error.hpp"
#include "fpc/functional.hpp"
#include "fpc/grid.hpp"
#include "fpc/kkt.hpp"
#include "fpc/model.hpp"
#include "fpc/problem.hpp"
#include "fpc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace fpc {

struct Ensemble {
    GridSpec grid;
    std::int64_t n_particles = 0;
    std::uint64_t seed = 0;
    std::vector<double> positions; // level-major, (nt + 1) x n_particles

    std::span<const double> level(int n) const {
        return {positions.data() + static_cast<std::size_t>(n) * n_particles, static_cast<std::size_t>(n_particles)};
    }
    std::span<double> level(int n) {
        return {positions.data() + static_cast<std::size_t>(n) * n_particles, static_cast<std::size_t>(n_particles)};
    }
};

struct VerifyReport {
    double w1_terminal = 0.0;
    double w1_max_over_t = 0.0;
    double cost_mc = 0.0;
    double cost_mc_stderr = 0.0;
    double psi_mc = 0.0;
    std::int64_t n_particles = 0;
    std::uint64_t seed = 0;
};

/// Linear interpolation of one level between cell centers, clamped at the ends.
inline double interpolate_level(const GridSpec& g, std::span<const double> v, double x) {
    const double s = (x - g.x(0)) / g.h();
    if (s <= 0.0) return v.front();
    if (s >= g.nx - 1) return v.back();
    const int i = static_cast<int>(s);
    const double w = s - i;
    return (1.0 - w) * v[i] + w * v[i + 1];
}

namespace detail {

inline double sample_component(const Gaussian& d, double z, double) { return d.mean + std::sqrt(d.variance) * z; }
inline double sample_component(const PointMass& d, double, double) { return d.x0; }

inline double sample_initial(const InitialSpec& spec, const CounterRng& rng, std::uint64_t particle) {
    const auto [z, unused] = rng.normals(particle, 0, RngStream::Initial);
    const auto [u, unused2] = rng.uniforms(particle, 1, RngStream::Initial);
    (void)unused;
    (void)unused2;
    return std::visit(
        [&](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Mixture>) {
                if (d.components.empty()) throw Error(ErrorKind::Config, "mixture has no components");
                double total = 0.0;
                for (const auto& c : d.components) total += c.weight;
                double acc = 0.0;
                for (const auto& c : d.components) {
                    acc += c.weight / total;
                    if (u < acc || &c == &d.components.back())
                        return std::visit([&](const auto& cd) { return sample_component(cd, z, u); }, c.dist);
                }
                return 0.0;
            } else {
                if constexpr (std::is_same_v<D, Gaussian>)
                    if (!(d.variance > 0.0)) throw Error(ErrorKind::Config, "gaussian variance must be positive");
                return sample_component(d, z, u);
            }
        },
        spec);
}

// Sufficient statistics of an empirical measure for every functional kind.
struct SampleSums {
    double count = 0.0, kernel = 0.0, s1 = 0.0, s2 = 0.0;

    SampleSums& operator+=(const SampleSums& o) {
        count += o.count;
        kernel += o.kernel;
        s1 += o.s1;
        s2 += o.s2;
        return *this;
    }
    SampleSums operator-(const SampleSums& o) const { return {count - o.count, kernel - o.kernel, s1 - o.s1, s2 - o.s2}; }
};

inline SampleSums sample_sums(const MeasureFunctional& F, const GridSpec& g, std::span<const double> xs) {
    SampleSums s;
    const bool linear = F.kind == FunctionalKind::Linear;
    for (double x : xs) {
        s.count += 1.0;
        if (linear) s.kernel += kernel_at(F, g, x);
        s.s1 += x;
        s.s2 += x * x;
    }
    return s;
}

inline double functional_from_sums(const MeasureFunctional& F, const SampleSums& s) {
    const double mu = s.s1 / s.count;
    switch (F.kind) {
    case FunctionalKind::Zero: return 0.0;
    case FunctionalKind::Linear: return s.kernel / s.count;
    case FunctionalKind::MeanShortfall: return F.param - mu;
    case FunctionalKind::VarianceCap: return s.s2 / s.count - mu * mu - F.param;
    case FunctionalKind::QuadraticMean: return mu * mu;
    }
    return 0.0;
}

} // namespace detail

/// Euler-Maruyama with the grid's dt:
///   X_{n+1} = X_n + b(t_n, X_n) dt + sqrt(2 D(t_n, X_n) dt) xi_n,
/// xi_n keyed by (seed, particle, n). X_0 is drawn from the initial law
/// itself, not from its grid projection.
inline Ensemble simulate(const FluxFields& policy, const InitialSpec& m0, std::int64_t n_particles, std::uint64_t seed) {
    const GridSpec& g = policy.drift.grid;
    g.validate();
    if (n_particles < 1) throw Error(ErrorKind::Config, "need at least one particle");
    require_same_size(policy.drift.values.size(), g.levels() * g.cells(), "mc drift");
    require_same_size(policy.diffusion.values.size(), g.levels() * g.cells(), "mc diffusion");
    for (std::size_t j = 0; j < policy.drift.values.size(); ++j) {
        const double b = policy.drift.values[j], D = policy.diffusion.values[j];
        if (!std::isfinite(b) || !std::isfinite(D) || D < 0.0)
            throw Error(ErrorKind::Precondition, "policy fields must be finite with nonnegative diffusion");
    }

    Ensemble ens;
    ens.grid = g;
    ens.n_particles = n_particles;
    ens.seed = seed;
    ens.positions.resize(static_cast<std::size_t>(g.levels()) * n_particles);
    const CounterRng rng(seed);
    const double dt = g.dt(), sqdt = std::sqrt(dt);

    auto x0 = ens.level(0);
    for (std::int64_t p = 0; p < n_particles; ++p) x0[p] = detail::sample_initial(m0, rng, p);
    for (int n = 0; n < g.nt; ++n) {
        const auto drift = policy.drift.level(n), diff = policy.diffusion.level(n);
        const auto cur = std::span<const double>(ens.level(n));
        auto next = ens.level(n + 1);
        for (std::int64_t p = 0; p < n_particles; ++p) {
            const double x = cur[p];
            const double b = interpolate_level(g, drift, x);
            const double D = interpolate_level(g, diff, x);
            const double xi = rng.normals(p, static_cast<std::uint32_t>(n), RngStream::Increment).first;
            const double y = x + b * dt + std::sqrt(2.0 * D) * sqdt * xi;
            if (!std::isfinite(y)) {
                char buf[128];
                std::snprintf(buf, sizeof buf, "particle %lld non-finite at step %d", static_cast<long long>(p), n);
                throw Error(ErrorKind::Blowup, buf);
            }
            next[p] = y;
        }
    }
    return ens;
}

/// W1 between an empirical measure and grid masses spread uniformly over
/// their cells, integrated exactly over the merged breakpoints.
inline double wasserstein1_empirical(const GridSpec& g, std::span<const double> samples, std::span<const double> m) {
    require_same_size(m.size(), g.cells(), "wasserstein1_empirical");
    if (samples.empty()) throw Error(ErrorKind::Precondition, "empirical measure needs at least one sample");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    const double total = total_mass(m);

    // Grid CDF at x, given the cell cursor and the mass to its left.
    auto grid_cdf = [&](double x, int cell, double left) {
        if (cell < 0) return 0.0;
        if (cell >= g.nx) return 1.0;
        const double frac = std::clamp((x - g.edge(cell)) / g.h(), 0.0, 1.0);
        return (left + frac * m[cell]) / total;
    };
    auto piece = [](double d0, double d1, double len) {
        if ((d0 >= 0.0) == (d1 >= 0.0)) return 0.5 * (std::abs(d0) + std::abs(d1)) * len;
        const double a = std::abs(d0), b = std::abs(d1);
        return 0.5 * (a * a + b * b) / (a + b) * len;
    };

    double w = 0.0;
    std::size_t k = 0; // samples strictly left of the cursor
    int cell = -1;     // -1 left of the domain, nx right of it
    double left = 0.0; // grid mass in cells < cell
    double x = std::min(xs.front(), g.x_min);
    while (k < xs.size()) {
        if (xs[k] <= x) {
            ++k;
            continue;
        }
        const double next_edge = cell < 0 ? g.x_min : (cell < g.nx ? g.edge(cell + 1) : xs.back() + 1.0);
        const double b = std::min(xs[k], next_edge);
        const double fe = k / n;
        w += piece(grid_cdf(x, cell, left) - fe, grid_cdf(b, cell, left) - fe, b - x);
        x = b;
        if (b == next_edge && cell < g.nx) {
            if (cell >= 0) left += m[cell];
            ++cell;
        }
    }
    // Past the last sample the empirical CDF is 1; integrate the grid tail.
    while (cell < g.nx) {
        const double next_edge = cell < 0 ? g.x_min : g.edge(cell + 1);
        if (next_edge > x) w += piece(grid_cdf(x, cell, left) - 1.0, grid_cdf(next_edge, cell, left) - 1.0, next_edge - x);
        x = std::max(x, next_edge);
        if (cell >= 0) left += m[cell];
        ++cell;
    }
    return w;
}

struct EmpiricalCost {
    double cost = 0.0;
    double stderr_ = 0.0;
    double running_f1 = 0.0;
    double mean_field = 0.0; // f2 and g parts
};

/// Per-particle sum_n dt L(t_n, X_n, b, D) at the interpolated policy, plus
/// sum_n dt f2(empirical law at n+1) and g(empirical terminal law). The
/// standard error combines the f1 sample error with a 50-group jackknife of
/// the measure functionals.
inline EmpiricalCost empirical_cost(const Ensemble& ens, const Problem& problem, const FluxFields& policy) {
    const auto& g = ens.grid;
    if (!(g == problem.grid)) throw Error(ErrorKind::GridMismatch, "ensemble grid differs from problem grid");
    const double dt = g.dt();
    const std::int64_t np = ens.n_particles;

    std::vector<double> running(static_cast<std::size_t>(np), 0.0);
    for (int n = 0; n < g.nt; ++n) {
        const auto xs = ens.level(n);
        const auto drift = policy.drift.level(n), diff = policy.diffusion.level(n);
        for (std::int64_t p = 0; p < np; ++p) {
            const double x = xs[p];
            const double L = lagrangian(problem.model, g.t(n), x, interpolate_level(g, drift, x), interpolate_level(g, diff, x));
            if (!std::isfinite(L)) {
                char buf[128];
                std::snprintf(buf, sizeof buf, "L = +inf along particle %lld at step %d", static_cast<long long>(p), n);
                throw Error(ErrorKind::Representation, buf);
            }
            running[p] += dt * L;
        }
    }

    EmpiricalCost out;
    const double mean_f1 = std::accumulate(running.begin(), running.end(), 0.0) / np;
    double var = 0.0;
    for (double r : running) var += (r - mean_f1) * (r - mean_f1);
    const double se_f1 = np > 1 ? std::sqrt(var / (np - 1) / np) : 0.0;
    out.running_f1 = mean_f1;

    const bool has_f2 = problem.running_cost.kind != FunctionalKind::Zero;
    const bool has_g = problem.terminal_cost.kind != FunctionalKind::Zero;
    const int groups = static_cast<int>(std::min<std::int64_t>(50, np));
    // [level][group] sums; level index n+1 for f2, nt for g.
    auto group_sums = [&](const MeasureFunctional& F, int level) {
        std::vector<detail::SampleSums> s(groups);
        const auto xs = ens.level(level);
        for (int j = 0; j < groups; ++j) {
            const std::int64_t a = np * j / groups, b = np * (j + 1) / groups;
            s[j] = detail::sample_sums(F, g, xs.subspan(a, b - a));
        }
        return s;
    };
    auto total_of = [](const std::vector<detail::SampleSums>& s) {
        detail::SampleSums t;
        for (const auto& v : s) t += v;
        return t;
    };

    std::vector<double> jack(groups, 0.0);
    double full = 0.0;
    if (has_f2) {
        for (int n = 0; n < g.nt; ++n) {
            const auto s = group_sums(problem.running_cost, n + 1);
            const auto t = total_of(s);
            full += dt * detail::functional_from_sums(problem.running_cost, t);
            if (groups > 1)
                for (int j = 0; j < groups; ++j) jack[j] += dt * detail::functional_from_sums(problem.running_cost, t - s[j]);
        }
    }
    if (has_g) {
        const auto s = group_sums(problem.terminal_cost, g.nt);
        const auto t = total_of(s);
        full += detail::functional_from_sums(problem.terminal_cost, t);
        if (groups > 1)
            for (int j = 0; j < groups; ++j) jack[j] += detail::functional_from_sums(problem.terminal_cost, t - s[j]);
    }
    double se_jack = 0.0;
    if ((has_f2 || has_g) && groups > 1) {
        const double jm = std::accumulate(jack.begin(), jack.end(), 0.0) / groups;
        double acc = 0.0;
        for (double v : jack) acc += (v - jm) * (v - jm);
        se_jack = std::sqrt((groups - 1.0) / groups * acc);
    }
    out.mean_field = full;
    out.cost = mean_f1 + full;
    out.stderr_ = std::sqrt(se_f1 * se_f1 + se_jack * se_jack);
    return out;
}

/// Simulate `policy`, then compare against the grid law `m`.
inline VerifyReport verify(const Problem& problem, const FluxFields& policy, const DensityField& m,
                           std::int64_t n_particles, std::uint64_t seed) {
    problem.validate();
    if (!(m.grid == problem.grid) || !(policy.drift.grid == problem.grid))
        throw Error(ErrorKind::GridMismatch, "solution fields do not match the problem grid");
    const auto ens = simulate(policy, problem.initial, n_particles, seed);
    VerifyReport r;
    r.n_particles = n_particles;
    r.seed = seed;
    const auto& g = problem.grid;
    for (int n = 0; n <= g.nt; ++n)
        r.w1_max_over_t = std::max(r.w1_max_over_t, wasserstein1_empirical(g, ens.level(n), m.level(n)));
    r.w1_terminal = wasserstein1_empirical(g, ens.level(g.nt), m.level(g.nt));
    const auto c = empirical_cost(ens, problem, policy);
    r.cost_mc = c.cost;
    r.cost_mc_stderr = c.stderr_;
    r.psi_mc = eval_functional_samples(problem.constraint, g, ens.level(g.nt));
    return r;
}

inline VerifyReport verify(const KktSolution& sol, const Problem& problem, std::int64_t n_particles, std::uint64_t seed) {
    if (!sol.solved) throw Error(ErrorKind::Precondition, "verify needs a solved problem");
    return verify(problem, sol.policy(), sol.m(), n_particles, seed);
}

} // namespace fpc
