#pragma once

// =============================================================================
// ckstab - numerical kernels
// =============================================================================
// Polynomial arithmetic and root finding (Aberth iteration + Newton polish),
// a fixed-step RK4 integrator and a bracketed bisection. Everything here is a
// pure function of its inputs.
// =============================================================================

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckstab {

using cdouble = std::complex<double>;

/// Thrown by the numerical kernels when a precondition or convergence
/// requirement cannot be met.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// =============================================================================
// Polynomial
// =============================================================================

/// Real polynomial with ascending coefficients, c[0] + c[1] x + ... .
/// Degree is capped at 8, which covers every polynomial the model produces.
class Polynomial {
public:
    static constexpr std::size_t max_degree = 8;

    Polynomial() : coeffs_{0.0} {}
    Polynomial(std::initializer_list<double> c) : Polynomial(std::vector<double>(c)) {}
    explicit Polynomial(std::vector<double> c) : coeffs_(std::move(c)) {
        if (coeffs_.empty()) coeffs_.push_back(0.0);
        for (double v : coeffs_) {
            if (!std::isfinite(v)) throw NumericalError("Polynomial: non-finite coefficient");
        }
        trim();
        if (degree() > static_cast<int>(max_degree)) {
            throw NumericalError("Polynomial: degree " + std::to_string(degree()) + " exceeds 8");
        }
    }

    static Polynomial constant(double c) { return Polynomial({c}); }
    static Polynomial monomial(double c, std::size_t power) {
        std::vector<double> v(power + 1, 0.0);
        v[power] = c;
        return Polynomial(std::move(v));
    }

    /// Degree after trailing-zero trim; the zero polynomial has degree 0.
    [[nodiscard]] int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    [[nodiscard]] const std::vector<double>& coeffs() const { return coeffs_; }
    [[nodiscard]] double operator[](std::size_t i) const { return i < coeffs_.size() ? coeffs_[i] : 0.0; }
    [[nodiscard]] bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }

    [[nodiscard]] double max_abs_coeff() const {
        double m = 0.0;
        for (double c : coeffs_) m = std::max(m, std::abs(c));
        return m;
    }

    template <typename T>
    [[nodiscard]] T operator()(T x) const {
        T acc = T(coeffs_.back());
        for (std::size_t i = coeffs_.size() - 1; i-- > 0;) acc = acc * x + T(coeffs_[i]);
        return acc;
    }

    /// Value and first derivative by Horner's scheme.
    [[nodiscard]] std::pair<cdouble, cdouble> eval_with_derivative(cdouble x) const {
        cdouble p = coeffs_.back();
        cdouble dp = 0.0;
        for (std::size_t i = coeffs_.size() - 1; i-- > 0;) {
            dp = dp * x + p;
            p = p * x + coeffs_[i];
        }
        return {p, dp};
    }

    [[nodiscard]] Polynomial derivative() const {
        if (coeffs_.size() == 1) return Polynomial();
        std::vector<double> d(coeffs_.size() - 1);
        for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = static_cast<double>(i) * coeffs_[i];
        return Polynomial(std::move(d));
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + b[i];
        return Polynomial(std::move(c));
    }
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }
    friend Polynomial operator*(double s, const Polynomial& p) {
        std::vector<double> c = p.coeffs_;
        for (double& v : c) v *= s;
        return Polynomial(std::move(c));
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.degree() + b.degree() > static_cast<int>(max_degree)) {
            throw NumericalError("Polynomial: product degree exceeds 8");
        }
        std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(c));
    }
    friend Polynomial operator+(double s, const Polynomial& p) { return Polynomial::constant(s) + p; }

private:
    void trim() {
        while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    }

    std::vector<double> coeffs_;
};

// =============================================================================
// Root finding
// =============================================================================

struct RootOptions {
    double residual_tol = 1e-10;  // relative, see root_residual()
    double realness_tol = 1e-8;   // |Im r| / max(1, |r|)
    double merge_tol = 1e-6;      // roots closer than this are one degenerate root
    int max_iterations = 500;
};

struct RootSet {
    std::vector<cdouble> roots;
    std::vector<double> residuals;
    bool converged = true;
    int iterations = 0;

    [[nodiscard]] double max_residual() const {
        double m = 0.0;
        for (double r : residuals) m = std::max(m, r);
        return m;
    }
};

/// |p(r)| scaled by max|c_i| * max(1,|r|)^deg.
inline double root_residual(const Polynomial& p, cdouble r) {
    const double scale = p.max_abs_coeff() * std::pow(std::max(1.0, std::abs(r)), p.degree());
    return scale > 0.0 ? std::abs(p(r)) / scale : std::abs(p(r));
}

namespace detail {

inline double cauchy_bound(const Polynomial& p) {
    const auto& c = p.coeffs();
    const double lead = std::abs(c.back());
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) m = std::max(m, std::abs(c[i]) / lead);
    return 1.0 + m;
}

}  // namespace detail

/// All complex roots with multiplicity. Aberth simultaneous iteration on the
/// monic polynomial, followed by a few Newton steps per root. Throws for
/// degree zero; non-convergence is reported through RootSet::converged with
/// the best iterate kept.
inline RootSet poly_roots(const Polynomial& p, const RootOptions& opt = {}) {
    const int n = p.degree();
    if (n < 1) throw NumericalError("poly_roots: polynomial has degree zero");

    RootSet out;
    // Exact zero roots are split off first; Aberth handles them but the
    // relative stopping test is cleaner without them.
    std::vector<double> c = p.coeffs();
    std::size_t zeros = 0;
    while (zeros < c.size() - 1 && c[zeros] == 0.0) ++zeros;
    for (std::size_t i = 0; i < zeros; ++i) out.roots.emplace_back(0.0, 0.0);
    const Polynomial q(std::vector<double>(c.begin() + static_cast<std::ptrdiff_t>(zeros), c.end()));
    const int m = q.degree();

    if (m == 1) {
        out.roots.emplace_back(-q[0] / q[1], 0.0);
    } else if (m >= 2) {
        const double radius = detail::cauchy_bound(q);
        std::vector<cdouble> z(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            const double theta = 2.0 * std::numbers::pi * k / m + 0.4;
            z[static_cast<std::size_t>(k)] = std::polar(0.5 * radius, theta);
        }
        bool done = false;
        int it = 0;
        for (; it < opt.max_iterations && !done; ++it) {
            done = true;
            for (int k = 0; k < m; ++k) {
                auto& zk = z[static_cast<std::size_t>(k)];
                const auto [val, der] = q.eval_with_derivative(zk);
                if (val == 0.0) continue;
                const cdouble ratio = val / der;
                cdouble sum = 0.0;
                for (int j = 0; j < m; ++j) {
                    if (j != k) sum += 1.0 / (zk - z[static_cast<std::size_t>(j)]);
                }
                const cdouble step = ratio / (1.0 - ratio * sum);
                if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
                zk -= step;
                if (std::abs(step) > 1e-15 * std::max(1.0, std::abs(zk))) done = false;
            }
        }
        out.iterations = it;
        out.converged = done;
        for (auto& zk : z) {
            // Newton polish; keeps the iterate only if the residual improves.
            for (int s = 0; s < 3; ++s) {
                const auto [val, der] = q.eval_with_derivative(zk);
                if (der == 0.0 || val == 0.0) break;
                const cdouble cand = zk - val / der;
                if (std::abs(q(cand)) < std::abs(val)) zk = cand; else break;
            }
            out.roots.push_back(zk);
        }
    }

    // Real polynomial: snap conjugate partners onto exact conjugates.
    for (std::size_t i = 0; i < out.roots.size(); ++i) {
        const cdouble r = out.roots[i];
        if (r.imag() <= 0.0) continue;
        std::size_t best = out.roots.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < out.roots.size(); ++j) {
            if (j == i || out.roots[j].imag() >= 0.0) continue;
            const double d = std::abs(out.roots[j] - std::conj(r));
            if (d < best_d) { best_d = d; best = j; }
        }
        if (best < out.roots.size() && best_d < 1e-6 * std::max(1.0, std::abs(r))) {
            const cdouble avg = 0.5 * (r + std::conj(out.roots[best]));
            out.roots[i] = avg;
            out.roots[best] = std::conj(avg);
        }
    }

    std::sort(out.roots.begin(), out.roots.end(), [](cdouble a, cdouble b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (const auto& r : out.roots) out.residuals.push_back(root_residual(p, r));
    if (out.max_residual() > opt.residual_tol) out.converged = false;
    return out;
}

/// A nonnegative real root after merging near-coincident roots.
struct RealRoot {
    double value = 0.0;
    int multiplicity = 1;
    [[nodiscard]] bool degenerate() const { return multiplicity > 1; }
};

/// Physical (real, nonnegative) roots of a real polynomial. Roots within
/// merge_tol of each other form one cluster; a cluster of two or more is a
/// degenerate (turning-point) root and may be a near-real complex pair.
/// Isolated roots must satisfy the realness test. Sorted ascending.
inline std::vector<RealRoot> nonneg_real_root_clusters(const RootSet& rs, const RootOptions& opt = {}) {
    std::vector<cdouble> cand;
    for (const auto& r : rs.roots) {
        const double scale = std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= opt.merge_tol * scale && r.real() >= -opt.merge_tol * scale) cand.push_back(r);
    }
    std::sort(cand.begin(), cand.end(), [](cdouble a, cdouble b) { return a.real() < b.real(); });

    std::vector<RealRoot> out;
    std::size_t i = 0;
    while (i < cand.size()) {
        std::size_t j = i + 1;
        while (j < cand.size() && std::abs(cand[j] - cand[j - 1]) < opt.merge_tol * std::max(1.0, std::abs(cand[j]))) ++j;
        const int mult = static_cast<int>(j - i);
        double mean = 0.0;
        for (std::size_t t = i; t < j; ++t) mean += cand[t].real();
        mean /= mult;
        const double scale = std::max(1.0, std::abs(mean));
        const bool real_enough = mult > 1 || std::abs(cand[i].imag()) <= opt.realness_tol * scale;
        const bool nonneg = mean >= -opt.realness_tol * scale;
        if (real_enough && nonneg) out.push_back({std::max(0.0, mean), mult});
        i = j;
    }
    return out;
}

/// Real parts of the roots that are real to within tol (relative) and not
/// below -tol, clamped at zero, sorted and deduplicated within tol.
inline std::vector<double> real_nonneg_roots(const Polynomial& p, double tol = 1e-8) {
    const RootSet rs = poly_roots(p);
    std::vector<double> out;
    for (const auto& r : rs.roots) {
        const double scale = std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= tol * scale && r.real() >= -tol * scale) out.push_back(std::max(0.0, r.real()));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }),
              out.end());
    return out;
}

/// Roots of the monic quartic l^4 + a3 l^3 + a2 l^2 + a1 l + a0.
inline std::array<cdouble, 4> quartic_roots(double a3, double a2, double a1, double a0) {
    const RootSet rs = poly_roots(Polynomial({a0, a1, a2, a3, 1.0}));
    std::array<cdouble, 4> out{};
    std::copy(rs.roots.begin(), rs.roots.end(), out.begin());
    return out;
}

// =============================================================================
// Bisection
// =============================================================================

/// Root of a continuous f on [lo, hi] with a sign change, bracketed to
/// width <= tol. Throws if the endpoints do not bracket a root.
template <typename F>
double bisect(F&& f, double lo, double hi, double tol) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("bisect: no sign change on bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; } else { hi = mid; }
    }
    return 0.5 * (lo + hi);
}

/// Bisection on a boolean predicate: pred(lo) != pred(hi); returns the
/// bracket [a, b] of width <= tol around the switch.
template <typename Pred>
std::pair<double, double> bisect_predicate(Pred&& pred, double lo, double hi, double tol) {
    const bool plo = pred(lo);
    if (plo == pred(hi)) throw NumericalError("bisect_predicate: predicate does not change on bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid) == plo) lo = mid; else hi = mid;
    }
    return {lo, hi};
}

// =============================================================================
// Fixed-step integration
// =============================================================================

template <std::size_t N>
using StateVec = std::array<double, N>;

template <std::size_t N>
double norm(const StateVec<N>& y) {
    double s = 0.0;
    for (double v : y) s += v * v;
    return std::sqrt(s);
}

template <std::size_t N>
struct FixedStepResult {
    std::vector<double> times;
    std::vector<StateVec<N>> states;
    bool diverged = false;
};

struct IntegrationOptions {
    std::size_t stride = 1;         // keep every stride-th step
    double overflow_factor = 1e12;  // divergence guard relative to |y0|
};

/// One classical RK4 step.
template <std::size_t N, typename F>
StateVec<N> rk4_step(F& f, double t, const StateVec<N>& y, double dt) {
    auto axpy = [](const StateVec<N>& a, double s, const StateVec<N>& b) {
        StateVec<N> r;
        for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    const StateVec<N> k1 = f(t, y);
    const StateVec<N> k2 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    const StateVec<N> k3 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    const StateVec<N> k4 = f(t + dt, axpy(y, dt, k3));
    StateVec<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Integrates y' = f(t, y) from 0 to t_end with RK4 at fixed dt. The last
/// step is shortened to land on t_end. Exceeding the overflow guard stops
/// the integration and sets diverged; that is an outcome, not an error.
template <std::size_t N, typename F>
FixedStepResult<N> integrate_fixed_step(F&& f, const StateVec<N>& y0, double t_end, double dt,
                                        const IntegrationOptions& opt = {}) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw NumericalError("integrate_fixed_step: dt and t_end must be positive");
    {
        const auto f0 = f(0.0, y0);
        for (double v : f0)
            if (!std::isfinite(v)) throw NumericalError("integrate_fixed_step: vector field not finite at y0");
    }
    const double guard = opt.overflow_factor * std::max(1.0, norm(y0));
    const std::size_t stride = std::max<std::size_t>(1, opt.stride);
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));

    FixedStepResult<N> out;
    out.times.reserve(steps / stride + 2);
    out.states.reserve(steps / stride + 2);
    out.times.push_back(0.0);
    out.states.push_back(y0);

    StateVec<N> y = y0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double h = std::min(dt, t_end - t);
        y = rk4_step<N>(f, t, y, h);
        const double ny = norm(y);
        if (!std::isfinite(ny) || ny > guard) {
            out.diverged = true;
            break;
        }
        if ((i + 1) % stride == 0 || i + 1 == steps) {
            out.times.push_back(i + 1 == steps ? t_end : static_cast<double>(i + 1) * dt);
            out.states.push_back(y);
        }
    }
    return out;
}

}  // namespace ckstab
