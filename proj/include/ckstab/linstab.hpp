#pragma once

// =============================================================================
// ckstab - linear stability of steady states
// =============================================================================
// Fluctuations v = (da, da^dag, db', db'^dag) obey dv/dt = A v, with
// db' = -db. With couplings (u, v, p, q):
//
//   [ i D - k/2      0            i u           i v        ]
//   [ 0             -i D - k/2   -i v*         -i u*       ]
//   [ i p            i q         -i w - g/2     0          ]
//   [ -i q*         -i p*         0             i w - g/2  ]
//
// Symmetric shape: u = v = q = G, p = G*.
// =============================================================================

#include "ckstab/model.hpp"
#include "ckstab/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <string_view>

namespace ckstab {

enum class Linearization {
    ExactJacobian,  // first-order expansion of the full equations of motion
    ClosedForm,      // closed-form G, Delta, omega_e; symmetric matrix
};

inline std::string_view to_string(Linearization m) {
    return m == Linearization::ExactJacobian ? "exact" : "eq14";
}

class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Matrix4 = std::array<std::array<cdouble, 4>, 4>;

struct Couplings {
    cdouble cav_b;      // u: da  <- db'
    cdouble cav_bdag;   // v: da  <- db'^dag
    cdouble mech_a;     // p: db' <- da
    cdouble mech_adag;  // q: db' <- da^dag

    static Couplings symmetric(cdouble G) { return {G, G, std::conj(G), G}; }
};

struct EffectiveParams {
    cdouble G;             // reported linearized coupling (scaled, units omega_m)
    double delta = 0.0;    // effective detuning
    double omega_e = 1.0;  // effective mechanical frequency
    Couplings couplings;
    double asymmetry = 0.0;  // |G_a - G_b|, zero for the symmetric shape
    Linearization mode = Linearization::ExactJacobian;
};

struct CharPoly {
    double a3 = 0.0, a2 = 0.0, a1 = 0.0, a0 = 0.0;

    /// Characteristic rate: coefficients scale as rate^(degree).
    [[nodiscard]] double rate() const {
        return std::max({std::abs(a3), std::sqrt(std::abs(a2)), std::cbrt(std::abs(a1)),
                         std::sqrt(std::sqrt(std::abs(a0))), 1e-300});
    }
};

struct LinearizedSystem {
    EffectiveParams eff;
    Matrix4 A{};
    CharPoly charpoly;
    double kappa = 0.0;
    double gamma = 0.0;
};

enum class StabilityClass { Stable, UnstableStatic, UnstableOscillatory, Marginal };

inline std::string_view to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::Stable: return "Stable";
        case StabilityClass::UnstableStatic: return "UnstableStatic";
        case StabilityClass::UnstableOscillatory: return "UnstableOscillatory";
        case StabilityClass::Marginal: return "Marginal";
    }
    return "?";
}

struct StabilityVerdict {
    StabilityClass klass = StabilityClass::Stable;
    double a0_margin = 0.0;
    double rh_margin = 0.0;
    double max_re_lambda = 0.0;
    bool degenerate = false;
    std::array<cdouble, 4> eigenvalues{};
};

inline constexpr double marginal_band = 1e-9;
inline constexpr double eigen_band = 1e-8;

// =============================================================================
// Effective parameters
// =============================================================================

/// Linearization data at a steady state, in scaled units.
inline EffectiveParams effective_params(const SystemParams& p, const SteadyState& ss,
                                        Linearization mode = Linearization::ExactJacobian) {
    if (!(ss.residual <= 10.0 * steady_state_tol)) {
        throw StabilityError("effective_params: steady state residual " + std::to_string(ss.residual) +
                             " above tolerance");
    }
    const double k = p.gck_s();
    const cdouble a = ss.alpha_s;
    const cdouble b = ss.beta_s;
    const double n = std::norm(a);

    EffectiveParams eff;
    eff.mode = mode;
    eff.omega_e = 1.0 + k * n;
    if (mode == Linearization::ExactJacobian) {
        eff.delta = detuning_from_beta(p, b);
        const cdouble Ga = a * (1.0 + k * std::conj(b));
        const cdouble Gb = a * (1.0 + k * b);
        // db'/dt picks up i X (a* da + a da^dag); X depends on the convention.
        const cdouble X = p.convention == Convention::Eq14Consistent ? 1.0 + k * b : k * b - cdouble(0.0, 1.0);
        eff.couplings = {Ga, Gb, X * std::conj(a), X * a};
        eff.G = Gb;
        eff.asymmetry = std::abs(Ga - Gb);
    } else {
        const double kn = k * n;
        eff.G = a * (1.0 + kn / (1.0 + kn));
        eff.delta = p.delta0_s() + 2.0 * n * (1.0 + kn / ((1.0 + kn) * (1.0 + kn)));
        eff.couplings = Couplings::symmetric(eff.G);
    }
    return eff;
}

// =============================================================================
// Dynamical matrix and characteristic polynomial
// =============================================================================

inline Matrix4 build_matrix(const SystemParams& p, const EffectiveParams& eff) {
    const cdouble I(0.0, 1.0);
    const double kap = p.kappa_s();
    const double gam = p.gamma_s();
    const auto& c = eff.couplings;
    Matrix4 A{};
    A[0] = {I * eff.delta - 0.5 * kap, 0.0, I * c.cav_b, I * c.cav_bdag};
    A[1] = {0.0, -I * eff.delta - 0.5 * kap, -I * std::conj(c.cav_bdag), -I * std::conj(c.cav_b)};
    A[2] = {I * c.mech_a, I * c.mech_adag, -I * eff.omega_e - 0.5 * gam, 0.0};
    A[3] = {-I * std::conj(c.mech_adag), -I * std::conj(c.mech_a), 0.0, I * eff.omega_e - 0.5 * gam};
    return A;
}

namespace detail {

inline Matrix4 matmul(const Matrix4& X, const Matrix4& Y) {
    Matrix4 Z{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            cdouble s = 0.0;
            for (int l = 0; l < 4; ++l) s += X[i][l] * Y[l][j];
            Z[i][j] = s;
        }
    return Z;
}

inline cdouble trace(const Matrix4& X) { return X[0][0] + X[1][1] + X[2][2] + X[3][3]; }

}  // namespace detail

/// Coefficients of det(l I - A) by the Faddeev-LeVerrier recursion.
/// Throws if the coefficients are not real to 1e-10 (relative to the
/// natural scale of each coefficient).
inline CharPoly charpoly(const Matrix4& A) {
    std::array<cdouble, 5> c{};  // c[4] = 1, c[3] = a3, ...
    c[4] = 1.0;
    Matrix4 M{};  // M_0 = 0
    for (int k = 1; k <= 4; ++k) {
        Matrix4 prev = M;
        for (int i = 0; i < 4; ++i) prev[i][i] += c[5 - k];
        M = detail::matmul(A, prev);
        c[4 - k] = -detail::trace(M) / static_cast<double>(k);
    }
    CharPoly cp{c[3].real(), c[2].real(), c[1].real(), c[0].real()};
    const double r = cp.rate();
    for (int k = 1; k <= 4; ++k) {
        if (std::abs(c[4 - k].imag()) > 1e-10 * std::pow(r, k)) {
            throw StabilityError("charpoly: imaginary residue " + std::to_string(c[4 - k].imag()) +
                                 " in coefficient of degree " + std::to_string(4 - k));
        }
    }
    return cp;
}

/// det(A) by Gaussian elimination with partial pivoting.
inline cdouble determinant(Matrix4 A) {
    cdouble det = 1.0;
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (A[piv][col] == 0.0) return 0.0;
        if (piv != col) {
            std::swap(A[piv], A[col]);
            det = -det;
        }
        det *= A[col][col];
        for (int r = col + 1; r < 4; ++r) {
            const cdouble f = A[r][col] / A[col][col];
            for (int j = col; j < 4; ++j) A[r][j] -= f * A[col][j];
        }
    }
    return det;
}

/// The three coupling-free or symmetric-coupling combinations
///   G1 = g^2/4 + D^2 + g k + k^2/4 + w^2
///   G2 = g^2 k/4 + g D^2 + g k^2/4 + k w^2
///   G3 = g^2 D^2/4 + g^2 k^2/16 + D^2 w^2 + 4 D |G|^2 w + k^2 w^2/4
struct GammaTerms {
    double g1 = 0.0, g2 = 0.0, g3 = 0.0;
};

inline GammaTerms gamma_terms(double kappa, double gamma, double delta, double omega_e, double G_abs2) {
    const double d2 = delta * delta, w2 = omega_e * omega_e, k2 = kappa * kappa, g2 = gamma * gamma;
    GammaTerms t;
    t.g1 = g2 / 4 + d2 + gamma * kappa + k2 / 4 + w2;
    t.g2 = g2 * kappa / 4 + gamma * d2 + gamma * k2 / 4 + kappa * w2;
    t.g3 = g2 * d2 / 4 + g2 * k2 / 16 + d2 * w2 + 4 * delta * G_abs2 * omega_e + k2 * w2 / 4;
    return t;
}

/// Characteristic polynomial from closed forms in the effective parameters.
/// With P = p u and Q = q v*:
///   a3 = g + k
///   a2 = G1 + 2 (Re P - Re Q)
///   a1 = G2 + (g + k)(Re P - Re Q) + 2 w (Im P - Im Q) - 2 D (Im P + Im Q)
///   a0 = G3|_{G=0} + 2 D w (Re P + Re Q) + (g k / 2)(Re P - Re Q)
///        + k w (Im P - Im Q) - D g (Im P + Im Q) + (|p|^2 - |q|^2)(|u|^2 - |v|^2)
/// For the symmetric shape these reduce to a2 = G1, a1 = G2, a0 = G3.
inline CharPoly closed_form_charpoly(const SystemParams& p, const EffectiveParams& eff) {
    const double kap = p.kappa_s(), gam = p.gamma_s();
    const double D = eff.delta, w = eff.omega_e;
    const auto& c = eff.couplings;
    const cdouble P = c.mech_a * c.cav_b;
    const cdouble Q = c.mech_adag * std::conj(c.cav_bdag);
    const GammaTerms t = gamma_terms(kap, gam, D, w, 0.0);
    CharPoly cp;
    cp.a3 = gam + kap;
    cp.a2 = t.g1 + 2.0 * (P.real() - Q.real());
    cp.a1 = t.g2 + (gam + kap) * (P.real() - Q.real()) + 2.0 * w * (P.imag() - Q.imag()) -
            2.0 * D * (P.imag() + Q.imag());
    cp.a0 = t.g3 + 2.0 * D * w * (P.real() + Q.real()) + 0.5 * gam * kap * (P.real() - Q.real()) +
            kap * w * (P.imag() - Q.imag()) - D * gam * (P.imag() + Q.imag()) +
            (std::norm(c.mech_a) - std::norm(c.mech_adag)) * (std::norm(c.cav_b) - std::norm(c.cav_bdag));
    return cp;
}

inline LinearizedSystem linearize(const SystemParams& p, const SteadyState& ss,
                                  Linearization mode = Linearization::ExactJacobian) {
    LinearizedSystem ls;
    ls.eff = effective_params(p, ss, mode);
    ls.A = build_matrix(p, ls.eff);
    ls.charpoly = charpoly(ls.A);
    ls.kappa = p.kappa_s();
    ls.gamma = p.gamma_s();
    return ls;
}

// =============================================================================
// Routh-Hurwitz
// =============================================================================

struct RouthHurwitz {
    double cond_a0 = 0.0;        // a0
    double cond_rh = 0.0;        // a3 a2 a1 - (a1^2 + a3^2 a0)
    double cond_a3 = 0.0;        // a3
    double cond_a3a2_a1 = 0.0;   // a3 a2 - a1
    double gamma_form_rh = 0.0;  // [(g+k) G1 - G2] G2 - (g+k)^2 G3
    double a0_scale = 1.0;       // rate^4
    double rh_scale = 1.0;       // rate^6

    [[nodiscard]] bool stable() const { return cond_a0 > 0 && cond_rh > 0 && cond_a3 > 0 && cond_a3a2_a1 > 0; }
};

/// Routh-Hurwitz conditions of a monic real quartic.
inline RouthHurwitz routh_hurwitz(const CharPoly& cp) {
    RouthHurwitz rh;
    rh.cond_a0 = cp.a0;
    rh.cond_rh = cp.a3 * cp.a2 * cp.a1 - (cp.a1 * cp.a1 + cp.a3 * cp.a3 * cp.a0);
    rh.cond_a3 = cp.a3;
    rh.cond_a3a2_a1 = cp.a3 * cp.a2 - cp.a1;
    const double r = cp.rate();
    rh.a0_scale = std::pow(r, 4);
    rh.rh_scale = std::pow(r, 6);
    rh.gamma_form_rh = rh.cond_rh;
    return rh;
}

/// Routh-Hurwitz conditions of a linearized system, cross-checked against
/// the closed-form (Gamma) evaluation. A mismatch beyond 1e-9 relative is a
/// construction bug and throws.
inline RouthHurwitz routh_hurwitz(const SystemParams& p, const LinearizedSystem& ls) {
    RouthHurwitz rh = routh_hurwitz(ls.charpoly);
    const CharPoly cf = closed_form_charpoly(p, ls.eff);
    const double s = cf.a3;
    rh.gamma_form_rh = (s * cf.a2 - cf.a1) * cf.a1 - s * s * cf.a0;
    if (std::abs(rh.gamma_form_rh - rh.cond_rh) > 1e-9 * rh.rh_scale) {
        throw StabilityError("routh_hurwitz: closed-form mismatch " + std::to_string(rh.gamma_form_rh) + " vs " +
                             std::to_string(rh.cond_rh));
    }
    return rh;
}

inline double max_real_part(const std::array<cdouble, 4>& ev) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& z : ev) m = std::max(m, z.real());
    return m;
}

/// Verdict from Routh-Hurwitz margins with an eigenvalue cross-check.
inline StabilityVerdict classify(const RouthHurwitz& rh, const CharPoly& cp) {
    StabilityVerdict v;
    v.a0_margin = rh.cond_a0;
    v.rh_margin = rh.cond_rh;
    v.eigenvalues = quartic_roots(cp.a3, cp.a2, cp.a1, cp.a0);
    v.max_re_lambda = max_real_part(v.eigenvalues);

    const bool a0_marginal = std::abs(rh.cond_a0) < marginal_band * rh.a0_scale;
    const bool rh_marginal = std::abs(rh.cond_rh) < marginal_band * rh.rh_scale;
    if (a0_marginal || rh_marginal) {
        v.klass = StabilityClass::Marginal;
        return v;
    }
    if (rh.cond_a0 < 0.0) v.klass = StabilityClass::UnstableStatic;
    else if (!rh.stable()) v.klass = StabilityClass::UnstableOscillatory;
    else v.klass = StabilityClass::Stable;

    if (std::abs(v.max_re_lambda) > eigen_band && (v.klass == StabilityClass::Stable) != (v.max_re_lambda < 0.0)) {
        throw StabilityError("classify: Routh-Hurwitz verdict " + std::string(to_string(v.klass)) +
                             " disagrees with max Re(lambda) = " + std::to_string(v.max_re_lambda));
    }
    return v;
}

inline StabilityVerdict classify(const SystemParams& p, const SteadyState& ss,
                                 Linearization mode = Linearization::ExactJacobian) {
    const LinearizedSystem ls = linearize(p, ss, mode);
    StabilityVerdict v = classify(routh_hurwitz(p, ls), ls.charpoly);
    v.degenerate = ss.degenerate;
    return v;
}

/// (a0, rh) margins at scaled occupation n from the closed forms only.
/// Cheap; used for scans along a branch.
struct Margins {
    double a0 = 0.0;
    double rh = 0.0;
};

inline Margins margins_at_occupation(const SystemParams& p, double n,
                                     Linearization mode = Linearization::ExactJacobian) {
    const SteadyState ss = steady_state_at_occupation(p, n);
    const CharPoly cp = closed_form_charpoly(p, effective_params(p, ss, mode));
    const RouthHurwitz rh = routh_hurwitz(cp);
    return {rh.cond_a0, rh.cond_rh};
}

// =============================================================================
// Eigenvectors
// =============================================================================

/// A null vector of (A - lambda I), normalized. Used to pick perturbation
/// directions; returns the zero vector when elimination is degenerate.
inline std::array<cdouble, 4> eigenvector(const Matrix4& A, cdouble lambda) {
    Matrix4 M = A;
    for (int i = 0; i < 4; ++i) M[i][i] -= lambda;
    // Row echelon with full pivoting on a 4x4; the last pivot is ~0.
    std::array<int, 4> colperm{0, 1, 2, 3};
    for (int k = 0; k < 3; ++k) {
        int pr = k, pc = k;
        double best = -1.0;
        for (int r = k; r < 4; ++r)
            for (int c = k; c < 4; ++c)
                if (std::abs(M[r][colperm[c]]) > best) { best = std::abs(M[r][colperm[c]]); pr = r; pc = c; }
        if (best <= 0.0) return {};
        std::swap(M[pr], M[k]);
        std::swap(colperm[pc], colperm[k]);
        const cdouble piv = M[k][colperm[k]];
        for (int r = k + 1; r < 4; ++r) {
            const cdouble f = M[r][colperm[k]] / piv;
            for (int c = k; c < 4; ++c) M[r][colperm[c]] -= f * M[k][colperm[c]];
        }
    }
    std::array<cdouble, 4> x{};
    x[colperm[3]] = 1.0;
    for (int k = 2; k >= 0; --k) {
        cdouble s = 0.0;
        for (int c = k + 1; c < 4; ++c) s += M[k][colperm[c]] * x[colperm[c]];
        x[colperm[k]] = -s / M[k][colperm[k]];
    }
    double nrm = 0.0;
    for (const auto& z : x) nrm += std::norm(z);
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) return {};
    for (auto& z : x) z /= nrm;
    return x;
}

}  // namespace ckstab
