#pragma once

// =============================================================================
// ckstab - driven optomechanical cavity with radiation-pressure and
// cross-Kerr coupling: parameters, scaling and steady states
// =============================================================================
// Internally everything runs in scaled variables:
//   frequencies in units of omega_m,
//   n      = g0^2 |alpha|^2 / omega_m^2     (scaled cavity occupation)
//   s      = g0 alpha_in / omega_m^(3/2)    (scaled drive, "omega_m/g0")
//   k      = g_ck omega_m / g0^2            (scaled cross-Kerr coupling)
//   a~, b~ = g0 alpha / omega_m, g0 beta / omega_m
// In these variables the steady-state problem does not depend on g0.
// =============================================================================

#include "ckstab/numerics.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ckstab {

/// Sign convention of the mechanical radiation-pressure drive.
///  Eq14Consistent: db/dt contains -i g0 |a|^2 (Hamiltonian form);
///  AsPrinted:      db/dt contains   -g0 |a|^2.
enum class Convention { Eq14Consistent, AsPrinted };

/// Whether gamma enters the static mechanical susceptibility.
enum class Susceptibility { GammaNeglected, Full };

inline std::string_view to_string(Convention c) {
    return c == Convention::Eq14Consistent ? "eq14" : "printed";
}
inline std::string_view to_string(Susceptibility s) {
    return s == Susceptibility::Full ? "full" : "quintic";
}

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SystemParams {
    double omega_m = 1.0;
    double kappa = 0.6;
    double gamma = 0.12;
    double g0 = 1e-5;
    double gck = 0.0;
    double delta0 = -1.0;
    Convention convention = Convention::Eq14Consistent;
    Susceptibility susceptibility = Susceptibility::Full;

    /// Plot parameters of the reference bistability diagram:
    /// Delta0 = -omega_m, g0 = 1e-5 omega_m, kappa = 0.6, gamma = 0.12.
    static SystemParams reference() { return {}; }

    /// Builds a parameter set from scaled inputs (omega_m = 1).
    static SystemParams from_scaled(double kappa, double gamma, double delta0, double gck_scaled, double g0 = 1e-5) {
        SystemParams p;
        p.kappa = kappa;
        p.gamma = gamma;
        p.delta0 = delta0;
        p.g0 = g0;
        p.gck = gck_scaled * g0 * g0;
        return p;
    }

    void validate() const {
        const double v[] = {omega_m, kappa, gamma, g0, gck, delta0};
        for (double x : v)
            if (!std::isfinite(x)) throw ModelError("SystemParams: non-finite value");
        if (!(omega_m > 0.0)) throw ModelError("SystemParams: omega_m must be positive");
        if (!(kappa > 0.0)) throw ModelError("SystemParams: kappa must be positive");
        if (!(gamma > 0.0)) throw ModelError("SystemParams: gamma must be positive");
        if (!(g0 > 0.0)) throw ModelError("SystemParams: g0 must be positive");
        if (gck < 0.0) throw ModelError("SystemParams: gck must be nonnegative");
    }

    // Scaled views.
    [[nodiscard]] double kappa_s() const { return kappa / omega_m; }
    [[nodiscard]] double gamma_s() const { return gamma / omega_m; }
    [[nodiscard]] double delta0_s() const { return delta0 / omega_m; }
    [[nodiscard]] double gck_s() const { return gck * omega_m / (g0 * g0); }
    /// gamma as it enters the static susceptibility.
    [[nodiscard]] double gamma_static_s() const {
        return susceptibility == Susceptibility::Full ? gamma_s() : 0.0;
    }

    void set_gck_scaled(double k) { gck = k * g0 * g0 / omega_m; }

    [[nodiscard]] double occupation_to_scaled(double n_a) const { return g0 * g0 * n_a / (omega_m * omega_m); }
    [[nodiscard]] double occupation_from_scaled(double n) const { return n * omega_m * omega_m / (g0 * g0); }
    /// Amplitude scale factor: a~ = amplitude_scale() * alpha.
    [[nodiscard]] double amplitude_scale() const { return g0 / omega_m; }
};

enum class DriveUnits { Raw, Scaled };

struct DriveSpec {
    double alpha_in = 0.0;
    DriveUnits units = DriveUnits::Scaled;

    static DriveSpec scaled(double s) { return {s, DriveUnits::Scaled}; }
    static DriveSpec raw(double a) { return {a, DriveUnits::Raw}; }

    void validate() const {
        if (!std::isfinite(alpha_in) || alpha_in < 0.0) throw ModelError("DriveSpec: alpha_in must be finite and >= 0");
    }

    /// Scaled drive s = g0 alpha_in / omega_m^(3/2).
    [[nodiscard]] double scaled_value(const SystemParams& p) const {
        return units == DriveUnits::Scaled ? alpha_in : p.g0 * alpha_in / std::pow(p.omega_m, 1.5);
    }
};

struct SteadyState {
    cdouble alpha;           // raw cavity amplitude
    cdouble beta;            // raw mechanical amplitude
    double n_a = 0.0;        // |alpha|^2
    double n = 0.0;          // scaled occupation
    double residual = 0.0;   // max relative residual of the two fixed-point equations
    double drive = 0.0;      // scaled drive this state belongs to
    bool degenerate = false; // merged double root (turning point)

    cdouble alpha_s;         // g0 alpha / omega_m
    cdouble beta_s;          // g0 beta / omega_m
};

inline constexpr double steady_state_tol = 1e-9;

// =============================================================================
// Mechanical response and effective detuning
// =============================================================================

/// Scaled mechanical amplitude b~ for scaled occupation n:
///  Eq14Consistent: b~ = -i n / (gamma'/2 + i omega_e)
///  AsPrinted:      b~ =   -n / (gamma'/2 + i omega_e)
/// with omega_e = 1 + k n and gamma' per the susceptibility switch.
inline cdouble beta_scaled(const SystemParams& p, double n) {
    if (n < 0.0) throw ModelError("beta: negative occupation");
    const cdouble denom(0.5 * p.gamma_static_s(), 1.0 + p.gck_s() * n);
    const cdouble num = p.convention == Convention::Eq14Consistent ? cdouble(0.0, -n) : cdouble(-n, 0.0);
    return num / denom;
}

/// Raw beta for raw occupation n_a.
inline cdouble beta_of_occupation(const SystemParams& p, double n_a) {
    if (n_a < 0.0) throw ModelError("beta_of_occupation: negative occupation");
    return beta_scaled(p, p.occupation_to_scaled(n_a)) / p.amplitude_scale();
}

/// Delta0 - (b~ + b~*) - k |b~|^2 for a given scaled mechanical amplitude.
inline double detuning_from_beta(const SystemParams& p, cdouble b) {
    return p.delta0_s() - 2.0 * b.real() - p.gck_s() * std::norm(b);
}

/// Effective detuning (units of omega_m) at scaled occupation n.
inline double effective_detuning_scaled(const SystemParams& p, double n) {
    return detuning_from_beta(p, beta_scaled(p, n));
}

/// Effective detuning in raw frequency units at raw occupation n_a.
inline double effective_detuning(const SystemParams& p, double n_a) {
    if (n_a < 0.0) throw ModelError("effective_detuning: negative occupation");
    return p.omega_m * effective_detuning_scaled(p, p.occupation_to_scaled(n_a));
}

// =============================================================================
// Self-consistency polynomial
// =============================================================================

/// n [(kappa/2)^2 + Delta(n)^2] = kappa s^2 with Delta = Delta0 + N1(n)/D(n),
/// cleared of denominators, is P(n) - kappa s^2 Q(n) = 0 where
///   D  = gamma'^2/4 + (1 + k n)^2,
///   N  = Delta0 D + N1,   N1 = 2 n (1 + k n) - k n^2   (Eq14Consistent)
///                         N1 = gamma' n - k n^2         (AsPrinted)
///   P  = n [(kappa/2)^2 D^2 + N^2],   Q = D^2.
struct SelfConsistencyParts {
    Polynomial P;
    Polynomial Q;
};

inline SelfConsistencyParts selfconsistency_parts(const SystemParams& p) {
    p.validate();
    const double k = p.gck_s();
    const double gs = p.gamma_static_s();
    const double kap = p.kappa_s();
    const Polynomial n({0.0, 1.0});
    const Polynomial omega_e({1.0, k});
    const Polynomial D = 0.25 * gs * gs + omega_e * omega_e;
    const Polynomial N1 = p.convention == Convention::Eq14Consistent
                              ? 2.0 * (n * omega_e) - k * (n * n)
                              : gs * n - k * (n * n);
    const Polynomial N = p.delta0_s() * D + N1;
    const Polynomial D2 = D * D;
    return {n * (0.25 * kap * kap * D2 + N * N), D2};
}

/// Polynomial in scaled occupation whose nonnegative real roots are the
/// steady-state occupations at the given drive. Degree 5 for k > 0,
/// degree 3 for k = 0 (the vanishing leading coefficients are trimmed).
inline Polynomial selfconsistency_poly(const SystemParams& p, const DriveSpec& drive) {
    drive.validate();
    const auto parts = selfconsistency_parts(p);
    const double s = drive.scaled_value(p);
    return parts.P - (p.kappa_s() * s * s) * parts.Q;
}

/// Numerator of d(s^2)/dn: roots are the turning points of the
/// steady-state curve s(n). Degree <= 8.
inline Polynomial fold_poly(const SystemParams& p) {
    const auto parts = selfconsistency_parts(p);
    return parts.P.derivative() * parts.Q - parts.P * parts.Q.derivative();
}

/// Scaled drive that puts a steady state at scaled occupation n.
inline double drive_for_occupation(const SystemParams& p, double n) {
    if (n < 0.0) throw ModelError("drive_for_occupation: negative occupation");
    const double kap = p.kappa_s();
    const double d = effective_detuning_scaled(p, n);
    return std::sqrt(n * (0.25 * kap * kap + d * d) / kap);
}

// =============================================================================
// Steady states
// =============================================================================

namespace detail {

/// Rebuilds (alpha, beta) from an occupation estimate and measures the
/// fixed-point residuals.
inline SteadyState reconstruct(const SystemParams& p, double s, double n_root) {
    const double kap = p.kappa_s();
    const double sqk_s = std::sqrt(kap) * s;

    SteadyState ss;
    ss.drive = s;
    const double d_root = effective_detuning_scaled(p, n_root);
    const cdouble a = sqk_s / cdouble(0.5 * kap, -d_root);
    const double n = std::norm(a);
    const cdouble b = beta_scaled(p, n);

    // Cavity equation with beta evaluated at |alpha|^2.
    const double d = detuning_from_beta(p, b);
    const cdouble a_check = sqk_s / cdouble(0.5 * kap, -d);
    const double r1 = std::abs(a - a_check) / std::max(std::abs(a), 1e-300);
    // Mechanical equation: b is the closed form at |a|^2 by construction.
    const double r2 = std::abs(b - beta_scaled(p, std::norm(a))) / std::max(std::abs(b), 1e-300);

    ss.alpha_s = a;
    ss.beta_s = b;
    ss.n = n;
    ss.alpha = a / p.amplitude_scale();
    ss.beta = b / p.amplitude_scale();
    ss.n_a = p.occupation_from_scaled(n);
    ss.residual = (s == 0.0) ? 0.0 : std::max(r1, r2);
    return ss;
}

/// A few Newton steps on the real polynomial, in long double.
inline double polish_real_root(const Polynomial& poly, double x) {
    long double xl = x;
    for (int i = 0; i < 4; ++i) {
        long double v = 0.0L, dv = 0.0L;
        const auto& c = poly.coeffs();
        for (std::size_t j = c.size(); j-- > 0;) {
            dv = dv * xl + v;
            v = v * xl + static_cast<long double>(c[j]);
        }
        if (dv == 0.0L) break;
        const long double next = xl - v / dv;
        if (!std::isfinite(static_cast<double>(next)) || next < 0.0L) break;
        if (std::fabs(next - xl) > 1e-6L * std::max(1.0L, std::fabs(xl))) break;  // near-double root
        xl = next;
    }
    return static_cast<double>(xl);
}

}  // namespace detail

struct SteadyStateSet {
    std::vector<SteadyState> states;  // ascending in n
    bool anomalous_count = false;     // count not in {1, 3} without a degenerate flag
    bool degenerate = false;          // a merged double root is present
};

/// The physical steady states at the given drive: roots of the
/// self-consistency polynomial first, then alpha with its phase, then beta.
/// Throws ModelError if a reconstructed state violates the fixed-point
/// equations beyond the solver tolerance.
inline SteadyStateSet steady_states(const SystemParams& p, const DriveSpec& drive, const RootOptions& opt = {}) {
    p.validate();
    drive.validate();
    const double s = drive.scaled_value(p);

    SteadyStateSet out;
    if (s == 0.0) {
        out.states.push_back(detail::reconstruct(p, 0.0, 0.0));
        return out;
    }

    const Polynomial poly = selfconsistency_poly(p, drive);
    const RootSet roots = poly_roots(poly, opt);
    const auto clusters = nonneg_real_root_clusters(roots, opt);
    for (const auto& c : clusters) {
        const double n = c.degenerate() ? c.value : detail::polish_real_root(poly, c.value);
        SteadyState ss = detail::reconstruct(p, s, n);
        ss.degenerate = c.degenerate();
        if (!(ss.residual <= steady_state_tol)) {
            throw ModelError("steady_states: residual " + std::to_string(ss.residual) + " at n = " +
                             std::to_string(n) + " exceeds tolerance (drive " + std::to_string(s) + ")");
        }
        out.degenerate = out.degenerate || ss.degenerate;
        out.states.push_back(ss);
    }
    const std::size_t count = out.states.size();
    out.anomalous_count = !(count == 1 || count == 3 || (count == 2 && out.degenerate));
    return out;
}

/// Steady state sitting at scaled occupation n (drive chosen accordingly).
/// Used to parametrize branches by n, which avoids root selection.
inline SteadyState steady_state_at_occupation(const SystemParams& p, double n) {
    p.validate();
    const double s = drive_for_occupation(p, n);
    return detail::reconstruct(p, s, n);
}

}  // namespace ckstab
