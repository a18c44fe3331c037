#pragma once

// =============================================================================
// ckstab - unstable branches, their endpoints and critical couplings
// =============================================================================
// Branch endpoints are located numerically along the steady-state curve
// parametrized by the scaled occupation n:
//   B, C: fold of s(n). Two detectors: roots of the fold polynomial and sign
//         changes of a0 of the exact Jacobian (a0 = det A vanishes exactly
//         at a fold). They must agree.
//   D, E: sign changes of a3 a2 a1 - (a1^2 + a3^2 a0) in the selected
//         linearization.
// The closed-form endpoint approximations are evaluated for comparison.
// =============================================================================

#include "ckstab/linstab.hpp"
#include "ckstab/model.hpp"
#include "ckstab/numerics.hpp"
#include "ckstab/parallel.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ckstab {

enum class BranchLabel { B, C, D, E };
enum class PointSource { Numeric, Eq7, Eq10, Eq5, Eq13 };

inline std::string_view to_string(BranchLabel l) {
    constexpr std::string_view names[] = {"B", "C", "D", "E"};
    return names[static_cast<int>(l)];
}
inline std::string_view to_string(PointSource s) {
    constexpr std::string_view names[] = {"numeric", "eq7", "eq10", "eq5", "eq13"};
    return names[static_cast<int>(s)];
}

class BranchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BranchPoint {
    BranchLabel label = BranchLabel::B;
    double n = 0.0;      // scaled occupation
    double drive = 0.0;  // scaled drive
    PointSource source = PointSource::Numeric;
    bool degenerate = false;
};

// =============================================================================
// Stability diagram
// =============================================================================

struct DiagramSample {
    double n = 0.0;
    double drive = 0.0;
    StabilityClass verdict = StabilityClass::Stable;
    double a0_margin = 0.0;
    double rh_margin = 0.0;
    double max_re_lambda = 0.0;
};

struct StabilityDiagram {
    std::vector<DiagramSample> samples;
    SystemParams params;
    Linearization mode = Linearization::ExactJacobian;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return v;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
    std::vector<double> v = linspace(std::log(lo), std::log(hi), count);
    for (double& x : v) x = std::exp(x);
    return v;
}

/// Classifies the steady state at every grid occupation. Grid points are
/// evaluated in parallel and assembled in grid order.
inline StabilityDiagram trace_diagram(const SystemParams& p, std::span<const double> n_grid,
                                      Linearization mode = Linearization::ExactJacobian) {
    p.validate();
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (!(n_grid[i] >= 0.0)) throw BranchError("trace_diagram: grid must be nonnegative");
        if (i > 0 && !(n_grid[i] > n_grid[i - 1])) throw BranchError("trace_diagram: grid must be strictly increasing");
    }
    StabilityDiagram d;
    d.params = p;
    d.mode = mode;
    d.samples = parallel_map(n_grid.size(), [&](std::size_t i) {
        const SteadyState ss = steady_state_at_occupation(p, n_grid[i]);
        const StabilityVerdict v = classify(p, ss, mode);
        return DiagramSample{n_grid[i], ss.drive, v.klass, v.a0_margin, v.rh_margin, v.max_re_lambda};
    });
    return d;
}

// =============================================================================
// Numeric endpoints
// =============================================================================

struct ScanOptions {
    double n_min = 1e-4;
    double n_max = 1e3;
    std::size_t points = 2000;
    double rel_tol = 1e-12;        // bisection width relative to n
    double detector_tol = 1e-6;    // fold vs a0 agreement
    unsigned threads = 0;
};

struct EndpointReport {
    std::vector<BranchPoint> points;          // numeric endpoints, ascending within each branch
    bool bc_present = false;
    bool de_present = false;
    bool de_unbounded = false;                // unstable up to the end of the scan
    bool degenerate = false;                  // B and C merged (critical coupling)
    double detector_gap = 0.0;                // max |fold - a0| over B, C
    std::vector<double> fold_roots;           // fold-polynomial turning points
    std::vector<double> a0_sign_changes;      // exact-Jacobian a0 sign changes
    std::vector<std::pair<double, double>> de_intervals;  // rh < 0 intervals (upper = inf if unbounded)

    [[nodiscard]] std::optional<BranchPoint> find(BranchLabel l) const {
        for (const auto& bp : points)
            if (bp.label == l) return bp;
        return std::nullopt;
    }
};

namespace detail {

/// Sign changes of f sampled on the grid, refined by bisection.
template <typename F>
std::vector<double> sign_changes(F&& f, const std::vector<double>& grid, const std::vector<double>& values,
                                 double rel_tol) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if ((values[i] > 0.0) != (values[i + 1] > 0.0)) {
            const double tol = rel_tol * std::max(1.0, grid[i + 1]);
            out.push_back(bisect(f, grid[i], grid[i + 1], tol));
        }
    }
    return out;
}

}  // namespace detail

/// Turning points of s(n) from the fold polynomial, inside [n_min, n_max].
inline std::vector<RealRoot> fold_points(const SystemParams& p, double n_min = 0.0,
                                         double n_max = std::numeric_limits<double>::infinity()) {
    const Polynomial f = fold_poly(p);
    if (f.degree() < 1) return {};
    auto clusters = nonneg_real_root_clusters(poly_roots(f));
    std::vector<RealRoot> out;
    for (const auto& c : clusters)
        if (c.value > n_min && c.value < n_max) out.push_back(c);
    return out;
}

/// Locates B, C, D, E along the n-parametrized steady-state curve.
inline EndpointReport find_endpoints(const SystemParams& p, Linearization mode = Linearization::ExactJacobian,
                                     const ScanOptions& opt = {}) {
    p.validate();
    EndpointReport rep;
    const std::vector<double> grid = logspace(opt.n_min, opt.n_max, opt.points);

    const auto scan = parallel_map(
        grid.size(),
        [&](std::size_t i) {
            const Margins exact = margins_at_occupation(p, grid[i], Linearization::ExactJacobian);
            const double rh = mode == Linearization::ExactJacobian ? exact.rh
                                                                   : margins_at_occupation(p, grid[i], mode).rh;
            return std::pair<double, double>{exact.a0, rh};
        },
        opt.threads);
    std::vector<double> a0v(grid.size()), rhv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        a0v[i] = scan[i].first;
        rhv[i] = scan[i].second;
    }

    // --- B, C ---------------------------------------------------------------
    const auto folds = fold_points(p, opt.n_min, opt.n_max);
    for (const auto& f : folds) rep.fold_roots.push_back(f.value);
    rep.a0_sign_changes = detail::sign_changes(
        [&](double n) { return margins_at_occupation(p, n, Linearization::ExactJacobian).a0; }, grid, a0v,
        opt.rel_tol);

    const bool fold_degenerate = folds.size() == 1 && folds.front().degenerate();
    if (fold_degenerate) {
        rep.degenerate = true;
    } else if (!folds.empty() || !rep.a0_sign_changes.empty()) {
        if (folds.size() != rep.a0_sign_changes.size()) {
            // A near-tangent pair can straddle a coarse grid cell; both
            // detectors then see a vanishing branch.
            const bool tiny = folds.size() == 2 && std::abs(folds[1].value - folds[0].value) < 1e-3;
            if (!tiny) {
                throw BranchError("find_endpoints: fold detector found " + std::to_string(folds.size()) +
                                  " turning points but a0 changes sign " +
                                  std::to_string(rep.a0_sign_changes.size()) + " times");
            }
            rep.degenerate = true;
        } else {
            for (std::size_t i = 0; i < folds.size(); ++i)
                rep.detector_gap = std::max(rep.detector_gap, std::abs(folds[i].value - rep.a0_sign_changes[i]));
            const bool enforce = p.susceptibility == Susceptibility::Full;
            if (enforce && rep.detector_gap > opt.detector_tol) {
                throw BranchError("find_endpoints: fold and a0 detectors disagree by " +
                                  std::to_string(rep.detector_gap));
            }
        }
        if (folds.size() >= 2) {
            rep.bc_present = true;
            const double nb = folds[0].value, nc = folds[1].value;
            rep.points.push_back({BranchLabel::B, nb, drive_for_occupation(p, nb), PointSource::Numeric,
                                  rep.degenerate});
            rep.points.push_back({BranchLabel::C, nc, drive_for_occupation(p, nc), PointSource::Numeric,
                                  rep.degenerate});
        }
    }

    // --- D, E ---------------------------------------------------------------
    const auto rh_of = [&](double n) { return margins_at_occupation(p, n, mode).rh; };
    const auto rh_changes = detail::sign_changes(rh_of, grid, rhv, opt.rel_tol);
    // Walk the sign changes to build rh < 0 intervals.
    bool inside = rhv.front() < 0.0;
    double start = inside ? grid.front() : 0.0;
    for (double x : rh_changes) {
        if (!inside) {
            start = x;
            inside = true;
        } else {
            rep.de_intervals.emplace_back(start, x);
            inside = false;
        }
    }
    if (inside) {
        rep.de_intervals.emplace_back(start, std::numeric_limits<double>::infinity());
        rep.de_unbounded = true;
    }
    if (!rep.de_intervals.empty()) {
        rep.de_present = true;
        const auto [nd, ne] = rep.de_intervals.back();
        rep.points.push_back({BranchLabel::D, nd, drive_for_occupation(p, nd), PointSource::Numeric, false});
        if (std::isfinite(ne))
            rep.points.push_back({BranchLabel::E, ne, drive_for_occupation(p, ne), PointSource::Numeric, false});
    }
    return rep;
}

/// Largest occupation at which the upper branch is still unstable, or +inf
/// if it is unstable up to the end of the scan; 0 if there is no D-E branch.
inline double upper_unstable_end(const SystemParams& p, Linearization mode, const ScanOptions& opt) {
    const std::vector<double> grid = logspace(opt.n_min, opt.n_max, opt.points);
    double last_negative = 0.0;
    std::size_t last_idx = grid.size();
    for (std::size_t i = grid.size(); i-- > 0;) {
        if (margins_at_occupation(p, grid[i], mode).rh < 0.0) {
            last_idx = i;
            break;
        }
    }
    if (last_idx == grid.size()) return 0.0;
    if (last_idx + 1 == grid.size()) return std::numeric_limits<double>::infinity();
    last_negative = bisect([&](double n) { return margins_at_occupation(p, n, mode).rh; }, grid[last_idx],
                           grid[last_idx + 1], opt.rel_tol * grid[last_idx + 1]);
    return last_negative;
}

// =============================================================================
// Closed-form endpoint approximations (scaled units)
// =============================================================================

struct AnalyticPair {
    double lower = 0.0;
    double upper = 0.0;
    bool valid = false;
    std::string note;
};

/// n_{B,C} = -Delta0/3 [1 -/+ 1/2 sqrt(1 - 3 kappa^2 / (4 Delta0^2))].
inline AnalyticPair eq7_endpoints(const SystemParams& p) {
    AnalyticPair r;
    const double d0 = p.delta0_s(), kap = p.kappa_s();
    if (!(d0 < 0.0)) {
        r.note = "no B-C branch: requires negative detuning";
        return r;
    }
    const double disc = 1.0 - 3.0 * kap * kap / (4.0 * d0 * d0);
    if (disc < 0.0) {
        r.note = "no B-C branch: negative discriminant";
        return r;
    }
    const double root = 0.5 * std::sqrt(disc);
    r.lower = -d0 / 3.0 * (1.0 - root);
    r.upper = -d0 / 3.0 * (1.0 + root);
    r.valid = true;
    return r;
}

/// First order in g_ck around the resolved-sideband pure-RP result.
inline AnalyticPair eq10_endpoints(const SystemParams& p) {
    AnalyticPair r;
    const double d0 = p.delta0_s(), kap = p.kappa_s(), k = p.gck_s();
    if (!(d0 < 0.0)) {
        r.note = "no B-C branch: requires negative detuning";
        return r;
    }
    const double k2 = kap * kap;
    r.lower = -d0 / 6.0 - k2 / (16.0 * d0) - k * d0 / 4.0 * (d0 * d0 + 0.75 * k2);
    r.upper = -d0 / 2.0 + k2 / (16.0 * d0) - k * d0 / 4.0 * (d0 * d0 - 0.25 * k2);
    r.valid = true;
    if (kap > 0.5 * std::abs(d0) || std::abs(std::abs(d0) - 1.0) > 1e-12)
        r.note = "outside resolved-sideband regime kappa << |Delta0| = omega_m";
    return r;
}

struct UpperBranchAnalytic {
    double eps = 0.0;  // gamma / kappa
    double n_d_eq5 = 0.0, n_e_eq5 = 0.0;
    double n_d_eq13 = 0.0, n_e_eq13 = 0.0;
    double eta_d = 0.0, eta_e = 0.0;
    double lambda_d = 0.0, lambda_e = 0.0;
    bool d_converged = false, e_converged = false;
    int d_iterations = 0, e_iterations = 0;
    std::string note;
};

inline double eq13_lambda(double eta) {
    return (3.0 * (1.0 + eta) * (1.0 + 2.0 * eta) - eta * eta) /
           (8.0 * (1.0 + eta) * (1.0 + 2.0 * eta) * (1.0 + 2.0 * eta));
}

inline double eq13_n_d(double eta) {
    return (1.0 + eta) * (1.0 + eta) / (2.0 * (1.0 + 3.0 * eta + eta * eta));
}

inline double eq13_n_e(double eta, double kappa, double gamma) {
    const double lam = eq13_lambda(eta);
    return 3.0 * (1.0 + eta) * (1.0 + eta) / (32.0 * lam * (1.0 + 2.0 * eta) * (1.0 + 2.0 * eta)) *
           (std::sqrt(3.0 * kappa / (gamma * lam)) + 3.0);
}

/// D-E endpoints to first order in gamma/kappa (pure RP) and their cross-Kerr
/// corrections. The implicit eta = k n dependence is resolved by fixed-point
/// iteration seeded from the pure-RP values.
inline UpperBranchAnalytic eq5_eq13_endpoints(const SystemParams& p, double tol = 1e-10, int max_iter = 100) {
    UpperBranchAnalytic r;
    const double kap = p.kappa_s(), gam = p.gamma_s(), k = p.gck_s();
    const double e = gam / kap;
    r.eps = e;
    r.n_d_eq5 = 0.5 + e / 8.0;
    r.n_e_eq5 = std::sqrt(1.0 / (2.0 * e)) + 0.75 + 19.0 / 32.0 * std::sqrt(2.0 * e) - e / 16.0;
    if (e > 0.3) r.note = "gamma/kappa not small";
    if (std::abs(p.delta0_s() + 1.0) > 1e-12) r.note += std::string(r.note.empty() ? "" : "; ") + "derived at Delta0 = -omega_m";

    auto iterate = [&](double seed, auto&& map, double& n_out, double& eta_out, bool& ok, int& iters) {
        double n = seed;
        ok = false;
        for (iters = 1; iters <= max_iter; ++iters) {
            const double next = map(k * n);
            if (!std::isfinite(next)) break;
            if (std::abs(next - n) <= tol * std::max(1.0, std::abs(next))) {
                n = next;
                ok = true;
                break;
            }
            n = next;
        }
        n_out = n;
        eta_out = k * n;
    };
    iterate(r.n_d_eq5, [](double eta) { return eq13_n_d(eta); }, r.n_d_eq13, r.eta_d, r.d_converged, r.d_iterations);
    iterate(r.n_e_eq5, [&](double eta) { return eq13_n_e(eta, kap, gam); }, r.n_e_eq13, r.eta_e, r.e_converged,
            r.e_iterations);
    r.lambda_d = eq13_lambda(r.eta_d);
    r.lambda_e = eq13_lambda(r.eta_e);
    return r;
}

struct AsymptoticCoeffs {
    double c3_inf = 0.0;
    double c4_inf = 0.0;
};

/// Leading coefficients of the large-occupation expansion of the upper
/// branch stability condition (scaled units).
inline AsymptoticCoeffs asymptotic_coeffs(const SystemParams& p) {
    const double kap = p.kappa_s(), gam = p.gamma_s(), d0 = p.delta0_s(), k = p.gck_s();
    AsymptoticCoeffs c;
    c.c3_inf = -32.0 * (gam * kap * d0 + k * (k * gam * kap * d0 / 4.0 + (gam + kap)));
    const double t = k * k - 4.0;
    c.c4_inf = gam * kap * t * t;
    return c;
}

// =============================================================================
// Critical couplings
// =============================================================================

struct CriticalOptions {
    double k_step_lower = 0.05;   // scan step for the B-C search
    double k_step_star = 0.005;   // scan step for the divergence search
    double k_step_upper = 0.1;    // scan step for the D-E disappearance search
    double k_max = 60.0;
    double tol = 1e-4;            // bisection width in scaled g_ck
    double divergence_n = 1e6;
    ScanOptions scan{1e-4, 1e8, 3000, 1e-10, 1e-6, 0};
};

struct CriticalCouplings {
    Linearization mode = Linearization::ExactJacobian;
    std::optional<double> g_c1;     // B-C vanishes
    std::optional<double> g_star;   // n_E exceeds the divergence threshold
    std::optional<double> g_c2;     // D-E vanishes
    double n_e_at_g_star = 0.0;
    // Closed-form candidates, for comparison only.
    double eq11_omega_m = 0.0;      // in units of omega_m
    double eq11_scaled = 0.0;       // same value divided by g0^2 / omega_m
    double eq16_scaled = 0.0;       // -2 (g + k)^2 / (g k Delta0)
    double eq16_alt_scaled = 0.0;   // 2 g* + 2 kappa / gamma with g* = 2
    double g_star_c4_zero = 2.0;    // zero of c4_inf
    double g_star_text_scaled = 0.0;  // 2 g0 / omega_m expressed in g0^2 / omega_m
};

inline bool has_bc_branch(const SystemParams& p) {
    const auto f = fold_points(p);
    return f.size() >= 2;
}

inline bool has_de_branch(const SystemParams& p, Linearization mode, const ScanOptions& scan) {
    return upper_unstable_end(p, mode, scan) > 0.0;
}

inline CriticalCouplings critical_couplings(const SystemParams& base, Linearization mode = Linearization::ExactJacobian,
                                            const CriticalOptions& opt = {}) {
    base.validate();
    if (!(base.delta0 < 0.0)) throw BranchError("critical_couplings: requires negative detuning");
    CriticalCouplings cc;
    cc.mode = mode;
    const double kap = base.kappa_s(), gam = base.gamma_s(), d0 = base.delta0_s();
    cc.eq11_omega_m = 8.0 / kap * std::sqrt(16.0 - gam * gam / 4.0);
    cc.eq11_scaled = cc.eq11_omega_m * base.omega_m * base.omega_m / (base.g0 * base.g0);
    cc.eq16_scaled = -2.0 * (gam + kap) * (gam + kap) / (gam * kap * d0);
    cc.eq16_alt_scaled = 2.0 * 2.0 + 2.0 * kap / gam;
    cc.g_star_text_scaled = 2.0 * base.omega_m / base.g0;

    auto with_k = [&](double k) {
        SystemParams p = base;
        p.set_gck_scaled(k);
        return p;
    };
    auto scan_k = [&](double k0, double step, auto&& pred) -> std::optional<std::pair<double, double>> {
        // First k >= k0 (on the step grid) where pred flips relative to k0;
        // evaluated in parallel blocks.
        const bool p0 = pred(k0);
        const std::size_t block = 64;
        for (std::size_t start = 1;; start += block) {
            const double first = k0 + step * static_cast<double>(start);
            if (first > opt.k_max) return std::nullopt;
            const auto vals = parallel_map(block, [&](std::size_t i) {
                return pred(k0 + step * static_cast<double>(start + i));
            }, opt.scan.threads);
            for (std::size_t i = 0; i < block; ++i) {
                const double k = k0 + step * static_cast<double>(start + i);
                if (k > opt.k_max) return std::nullopt;
                if (vals[i] != p0) return std::pair{k - step, k};
            }
        }
    };

    // g_c1: B-C disappears.
    if (has_bc_branch(with_k(0.0))) {
        if (auto br = scan_k(0.0, opt.k_step_lower, [&](double k) { return has_bc_branch(with_k(k)); })) {
            const auto [lo, hi] = bisect_predicate([&](double k) { return has_bc_branch(with_k(k)); }, br->first,
                                                   br->second, opt.tol);
            cc.g_c1 = 0.5 * (lo + hi);
        }
    } else {
        cc.g_c1 = 0.0;
    }

    // g_star: n_E crosses the divergence threshold.
    auto diverged = [&](double k) { return upper_unstable_end(with_k(k), mode, opt.scan) > opt.divergence_n; };
    double upper_start = 0.0;
    if (!diverged(0.0)) {
        if (auto br = scan_k(0.0, opt.k_step_star, diverged)) {
            const auto [lo, hi] = bisect_predicate(diverged, br->first, br->second, opt.tol);
            cc.g_star = hi;
            cc.n_e_at_g_star = upper_unstable_end(with_k(hi), mode, opt.scan);
            upper_start = hi;
        }
    }

    // g_c2: D-E disappears above g_star (or above 0 if it never diverges).
    auto de = [&](double k) { return has_de_branch(with_k(k), mode, opt.scan); };
    if (de(upper_start)) {
        if (auto br = scan_k(upper_start, opt.k_step_upper, de)) {
            const auto [lo, hi] = bisect_predicate(de, br->first, br->second, opt.tol);
            cc.g_c2 = 0.5 * (lo + hi);
        }
    }
    return cc;
}

// =============================================================================
// Drive range of the B-C branch and n-width of D-E
// =============================================================================

/// |s(n_B) - s(n_C)|, zero when the branch is absent.
inline double bc_drive_width(const EndpointReport& r) {
    const auto b = r.find(BranchLabel::B), c = r.find(BranchLabel::C);
    return (b && c) ? std::abs(b->drive - c->drive) : 0.0;
}

inline double de_n_width(const EndpointReport& r) {
    if (r.de_unbounded) return std::numeric_limits<double>::infinity();
    const auto d = r.find(BranchLabel::D), e = r.find(BranchLabel::E);
    return (d && e) ? e->n - d->n : 0.0;
}

}  // namespace ckstab
