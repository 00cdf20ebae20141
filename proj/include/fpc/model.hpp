#pragma once

// Control-model families and their Hamiltonian
//
//   H(t,x,p,M) = sup_a { -b(t,x,a) p - sigma sigma^T(t,x,a) M - f1(t,x,a) }
//
// together with the maximizing control, the envelope derivatives
// dH/dp = -b(a*), dH/dM = -sigma sigma^T(a*), and the Lagrangian
// L(t,x,q,N) = H*(t,x,-q,-N).

#include "fpc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fpc {

enum class ModelKind { QuadraticDrift, PowerDrift, Custom };

/// Growth and ellipticity constants audited against H.
struct ModelBounds {
    double r1 = 2.0;
    double r2 = 2.0;
    double alpha1 = 0.5;
    double alpha2 = 0.5;
    double C_H = 0.0;
    double lambda_minus = 1.0;
    double lambda_plus = 1.0;
    double delta_coercivity = 1.0;
    double nu_dpH_growth = 1.0;

    void validate() const {
        if (!(r1 > 1.0)) throw Error(ErrorKind::Config, "bounds: r1 must exceed 1");
        if (!(r2 >= r1)) throw Error(ErrorKind::Config, "bounds: r2 must be >= r1");
        if (!(alpha1 > 0.0 && alpha2 > 0.0)) throw Error(ErrorKind::Config, "bounds: alpha1, alpha2 must be positive");
        if (!(C_H >= 0.0)) throw Error(ErrorKind::Config, "bounds: C_H must be nonnegative");
        if (!(lambda_minus > 0.0 && lambda_plus >= lambda_minus))
            throw Error(ErrorKind::Config, "bounds: need lambda_plus >= lambda_minus > 0");
        if (!(delta_coercivity > 0.0)) throw Error(ErrorKind::Config, "bounds: delta must be positive");
        if (!(nu_dpH_growth >= 1.0)) throw Error(ErrorKind::Config, "bounds: nu must be >= 1");
    }

    friend bool operator==(const ModelBounds&, const ModelBounds&) = default;
};

using ControlFn = std::function<double(double t, double x, double a)>;

/// Tabulated (x-independent) custom data, kept for config round trips.
struct CustomTables {
    std::vector<double> drift;
    std::vector<double> sigma;
    std::vector<double> cost;
    friend bool operator==(const CustomTables&, const CustomTables&) = default;
};

struct ControlModel {
    ModelKind kind = ModelKind::QuadraticDrift;
    double volatility_s = 1.0;
    double exponent = 2.0; // PowerDrift only: f1 = |a|^r / r
    std::vector<double> control_grid;
    ControlFn drift;   // Custom: b(t,x,a)
    ControlFn sigma;   // Custom: sigma(t,x,a)
    ControlFn cost;    // Custom: f1(t,x,a)
    std::optional<CustomTables> tables;
    ModelBounds bounds;

    static ControlModel quadratic(double s) {
        ControlModel m;
        m.kind = ModelKind::QuadraticDrift;
        m.volatility_s = s;
        m.bounds.lambda_minus = m.bounds.lambda_plus = s * s;
        m.validate();
        return m;
    }

    static ControlModel power(double s, double r) {
        ControlModel m;
        m.kind = ModelKind::PowerDrift;
        m.volatility_s = s;
        m.exponent = r;
        const double rs = r / (r - 1.0);
        m.bounds.r1 = m.bounds.r2 = rs;
        m.bounds.alpha1 = m.bounds.alpha2 = 1.0 / rs;
        m.bounds.lambda_minus = m.bounds.lambda_plus = s * s;
        m.bounds.delta_coercivity = r - 1.0;
        m.bounds.nu_dpH_growth = std::max(1.0, rs - 1.0);
        m.validate();
        return m;
    }

    static ControlModel custom(std::vector<double> grid, ControlFn b, ControlFn sig, ControlFn f1, ModelBounds bnds) {
        ControlModel m;
        m.kind = ModelKind::Custom;
        m.control_grid = std::move(grid);
        m.drift = std::move(b);
        m.sigma = std::move(sig);
        m.cost = std::move(f1);
        m.bounds = bnds;
        m.volatility_s = std::sqrt(bnds.lambda_minus);
        m.validate();
        return m;
    }

    /// Custom model from per-control tables (x- and t-independent).
    static ControlModel custom_table(std::vector<double> grid, CustomTables tab, ModelBounds bnds) {
        if (tab.drift.size() != grid.size() || tab.sigma.size() != grid.size() || tab.cost.size() != grid.size())
            throw Error(ErrorKind::Config, "custom model tables must match the control grid length");
        auto lookup = [grid](const std::vector<double>& col) {
            return [grid, col](double, double, double a) {
                auto it = std::lower_bound(grid.begin(), grid.end(), a);
                if (it == grid.end() || *it != a) throw Error(ErrorKind::Precondition, "control not on grid");
                return col[static_cast<std::size_t>(it - grid.begin())];
            };
        };
        auto m = custom(grid, lookup(tab.drift), lookup(tab.sigma), lookup(tab.cost), bnds);
        m.tables = std::move(tab);
        return m;
    }

    void validate() const {
        bounds.validate();
        if (kind == ModelKind::Custom) {
            if (control_grid.empty()) throw Error(ErrorKind::Config, "custom model needs a nonempty control grid");
            for (std::size_t k = 1; k < control_grid.size(); ++k)
                if (!(control_grid[k] > control_grid[k - 1]))
                    throw Error(ErrorKind::Config, "control grid must be strictly increasing");
            if (!drift || !sigma || !cost) throw Error(ErrorKind::Config, "custom model needs b, sigma and f1");
        } else {
            if (!(volatility_s > 0.0)) throw Error(ErrorKind::Config, "volatility_s must be positive");
            if (kind == ModelKind::PowerDrift && !(exponent > 1.0))
                throw Error(ErrorKind::Config, "power drift exponent must exceed 1");
        }
    }
};

/// b, sigma sigma^T and f1 of one control at one (t, x).
struct ControlPoint {
    double a = 0.0;
    double drift = 0.0;
    double diffusion = 0.0;
    double cost = 0.0;
};

inline ControlPoint control_point(const ControlModel& m, double t, double x, double a) {
    switch (m.kind) {
    case ModelKind::QuadraticDrift:
        return {a, a, m.volatility_s * m.volatility_s, 0.5 * a * a};
    case ModelKind::PowerDrift:
        return {a, a, m.volatility_s * m.volatility_s, std::pow(std::abs(a), m.exponent) / m.exponent};
    case ModelKind::Custom: {
        const double s = m.sigma(t, x, a);
        return {a, m.drift(t, x, a), s * s, m.cost(t, x, a)};
    }
    }
    return {};
}

struct HamiltonianEval {
    double value = 0.0;
    double dp = 0.0;    // dH/dp = -b(a*)
    double dM = 0.0;    // dH/dM = -sigma sigma^T(a*)
    double astar = 0.0; // maximizing control
};

namespace detail {

// Maximizer of -a p - |a|^r / r over a in R.
inline double power_argmax(double p, double r) {
    if (p == 0.0) return 0.0;
    const double mag = r == 2.0 ? std::abs(p) : std::pow(std::abs(p), 1.0 / (r - 1.0));
    return p > 0.0 ? -mag : mag;
}

inline double power_cost(double a, double r) {
    return r == 2.0 ? 0.5 * a * a : std::pow(std::abs(a), r) / r;
}

inline void require_custom_grid(const ControlModel& m) {
    if (m.kind == ModelKind::Custom && m.control_grid.empty())
        throw Error(ErrorKind::Config, "custom model has an empty control grid");
}

} // namespace detail

inline HamiltonianEval hamiltonian(const ControlModel& m, double t, double x, double p, double M) {
    detail::require_custom_grid(m);
    if (m.kind != ModelKind::Custom) {
        const double r = m.kind == ModelKind::QuadraticDrift ? 2.0 : m.exponent;
        const double a = detail::power_argmax(p, r);
        const double D = m.volatility_s * m.volatility_s;
        return {-a * p - D * M - detail::power_cost(a, r), -a, -D, a};
    }
    HamiltonianEval best{-std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
    for (double a : m.control_grid) {
        const auto c = control_point(m, t, x, a);
        const double v = -c.drift * p - c.diffusion * M - c.cost;
        if (v > best.value) best = {v, -c.drift, -c.diffusion, a};
    }
    return best;
}

inline double argmax_control(const ControlModel& m, double t, double x, double p, double M) {
    return hamiltonian(m, t, x, p, M).astar;
}

/// Result of the upwinded discrete Hamiltonian at one node.
struct UpwindChoice {
    ControlPoint control;
    double value = 0.0;
};

/// Discrete Hamiltonian of the monotone scheme: each control sees the
/// one-sided gradient in the direction of its own drift (forward difference
/// for b > 0, backward for b < 0). Ties go to the smallest control.
inline UpwindChoice hamiltonian_upwind(const ControlModel& m, double t, double x, double p_back, double p_fwd,
                                       double M) {
    if (m.kind != ModelKind::Custom) {
        const double r = m.kind == ModelKind::QuadraticDrift ? 2.0 : m.exponent;
        const double D = m.volatility_s * m.volatility_s;
        const double a_fwd = std::max(detail::power_argmax(p_fwd, r), 0.0);
        const double a_back = std::min(detail::power_argmax(p_back, r), 0.0);
        const double v_fwd = -a_fwd * p_fwd - detail::power_cost(a_fwd, r);
        const double v_back = -a_back * p_back - detail::power_cost(a_back, r);
        const double a = v_back >= v_fwd ? a_back : a_fwd;
        const double v = v_back >= v_fwd ? v_back : v_fwd;
        return {{a, a, D, detail::power_cost(a, r)}, v - D * M};
    }
    detail::require_custom_grid(m);
    UpwindChoice best{{}, -std::numeric_limits<double>::infinity()};
    for (double a : m.control_grid) {
        const auto c = control_point(m, t, x, a);
        const double p = c.drift > 0.0 ? p_fwd : p_back;
        const double v = -c.drift * p - c.diffusion * M - c.cost;
        if (v > best.value) best = {c, v};
    }
    return best;
}

inline constexpr double kPlusInfinity = std::numeric_limits<double>::infinity();

namespace detail {

inline bool same_diffusion(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Lower convex envelope of points (b_k, f_k) evaluated at q; +inf outside the hull.
inline double lower_envelope_1d(std::vector<std::pair<double, double>> pts, double q) {
    std::sort(pts.begin(), pts.end());
    if (q < pts.front().first || q > pts.back().first) return kPlusInfinity;
    double best = kPlusInfinity;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].first == q) best = std::min(best, pts[i].second);
        if (pts[i].first > q) continue;
        for (std::size_t j = pts.size(); j-- > i + 1;) {
            if (pts[j].first < q) break;
            if (pts[j].first == pts[i].first) continue;
            const double w = (q - pts[i].first) / (pts[j].first - pts[i].first);
            best = std::min(best, (1.0 - w) * pts[i].second + w * pts[j].second);
        }
    }
    return best;
}

// Minimal cost of a relaxed control (probability weights on the grid) with
// mean drift q and mean diffusion N; at most three atoms are needed.
inline double relaxed_min_cost_2d(const std::vector<ControlPoint>& c, double q, double N) {
    const std::size_t K = c.size();
    const double tol = 1e-12;
    double best = kPlusInfinity;
    for (std::size_t i = 0; i < K; ++i) {
        if (std::abs(c[i].drift - q) <= tol && same_diffusion(c[i].diffusion, N)) best = std::min(best, c[i].cost);
        for (std::size_t j = i + 1; j < K; ++j) {
            const double db = c[j].drift - c[i].drift, dD = c[j].diffusion - c[i].diffusion;
            const double den = db * db + dD * dD;
            if (den == 0.0) continue;
            const double w = ((q - c[i].drift) * db + (N - c[i].diffusion) * dD) / den;
            const double rb = c[i].drift + w * db - q, rD = c[i].diffusion + w * dD - N;
            if (w >= -tol && w <= 1.0 + tol && std::abs(rb) <= 1e-10 && std::abs(rD) <= 1e-10)
                best = std::min(best, (1.0 - w) * c[i].cost + w * c[j].cost);
        }
    }
    // O(K^3) scan of triangles; custom grids with varying sigma are small.
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j)
            for (std::size_t k = j + 1; k < K; ++k) {
                const double e1b = c[j].drift - c[i].drift, e1D = c[j].diffusion - c[i].diffusion;
                const double e2b = c[k].drift - c[i].drift, e2D = c[k].diffusion - c[i].diffusion;
                const double det = e1b * e2D - e2b * e1D;
                if (std::abs(det) < 1e-14) continue;
                const double pb = q - c[i].drift, pD = N - c[i].diffusion;
                const double wj = (pb * e2D - e2b * pD) / det;
                const double wk = (e1b * pD - pb * e1D) / det;
                const double wi = 1.0 - wj - wk;
                if (wi < -tol || wj < -tol || wk < -tol) continue;
                best = std::min(best, wi * c[i].cost + wj * c[j].cost + wk * c[k].cost);
            }
    return best;
}

} // namespace detail

/// L(t,x,q,N); +infinity when (q,N) is not the mean (drift, diffusion) of
/// any relaxed control.
inline double lagrangian(const ControlModel& m, double t, double x, double q, double N) {
    if (m.kind != ModelKind::Custom) {
        const double D = m.volatility_s * m.volatility_s;
        if (!detail::same_diffusion(N, D)) return kPlusInfinity;
        const double r = m.kind == ModelKind::QuadraticDrift ? 2.0 : m.exponent;
        return detail::power_cost(q, r);
    }
    detail::require_custom_grid(m);
    std::vector<ControlPoint> pts;
    pts.reserve(m.control_grid.size());
    for (double a : m.control_grid) pts.push_back(control_point(m, t, x, a));
    const bool constant_sigma = std::all_of(pts.begin(), pts.end(), [&](const ControlPoint& c) {
        return detail::same_diffusion(c.diffusion, pts.front().diffusion);
    });
    if (constant_sigma) {
        if (!detail::same_diffusion(N, pts.front().diffusion)) return kPlusInfinity;
        std::vector<std::pair<double, double>> bf;
        bf.reserve(pts.size());
        for (const auto& c : pts) bf.emplace_back(c.drift, c.cost);
        return detail::lower_envelope_1d(std::move(bf), q);
    }
    return detail::relaxed_min_cost_2d(pts, q, N);
}

/// Central difference of H in x with step 1e-5 (1 + |x|).
inline double hamiltonian_x_derivative(const ControlModel& m, double t, double x, double p, double M) {
    const double h = 1e-5 * (1.0 + std::abs(x));
    return (hamiltonian(m, t, x + h, p, M).value - hamiltonian(m, t, x - h, p, M).value) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Growth / ellipticity audit

struct AuditViolation {
    enum class Kind { GrowthLower, GrowthUpper, EllipticityLower, EllipticityUpper };
    Kind kind;
    double t, x, p;
    double value; // H(t,x,p,0) or -dH/dM
    double bound;
};

inline const char* to_string(AuditViolation::Kind k) {
    switch (k) {
    case AuditViolation::Kind::GrowthLower: return "growth_lower";
    case AuditViolation::Kind::GrowthUpper: return "growth_upper";
    case AuditViolation::Kind::EllipticityLower: return "ellipticity_lower";
    case AuditViolation::Kind::EllipticityUpper: return "ellipticity_upper";
    }
    return "?";
}

struct AuditReport {
    int samples = 0;
    std::vector<AuditViolation> violations;
    bool ok() const { return violations.empty(); }
};

struct AuditRanges {
    double t_max = 1.0;
    double x_abs = 5.0;
    double p_abs = 50.0;
};

/// Samples (t,x,p) uniformly and checks
///   alpha1 |p|^r1 - C_H <= H(t,x,p,0) <= alpha2 |p|^r2 + C_H,
///   lambda_minus <= -dH/dM <= lambda_plus.
inline AuditReport audit_model(const ControlModel& m, int sample_count, std::uint64_t seed, AuditRanges ranges = {}) {
    if (sample_count < 1) throw Error(ErrorKind::Precondition, "audit needs at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, ranges.t_max), ux(-ranges.x_abs, ranges.x_abs),
        up(-ranges.p_abs, ranges.p_abs);
    const auto& b = m.bounds;
    const double slack = 1e-12;
    AuditReport rep;
    rep.samples = sample_count;
    for (int s = 0; s < sample_count; ++s) {
        const double t = ut(rng), x = ux(rng), p = up(rng);
        const auto H = hamiltonian(m, t, x, p, 0.0);
        const double lo = b.alpha1 * std::pow(std::abs(p), b.r1) - b.C_H;
        const double hi = b.alpha2 * std::pow(std::abs(p), b.r2) + b.C_H;
        using K = AuditViolation::Kind;
        if (H.value < lo - slack * (1.0 + std::abs(lo))) rep.violations.push_back({K::GrowthLower, t, x, p, H.value, lo});
        if (H.value > hi + slack * (1.0 + std::abs(hi))) rep.violations.push_back({K::GrowthUpper, t, x, p, H.value, hi});
        const double D = -H.dM;
        if (D < b.lambda_minus * (1.0 - slack)) rep.violations.push_back({K::EllipticityLower, t, x, p, D, b.lambda_minus});
        if (D > b.lambda_plus * (1.0 + slack)) rep.violations.push_back({K::EllipticityUpper, t, x, p, D, b.lambda_plus});
    }
    return rep;
}

} // namespace fpc
