#pragma once

// =============================================================================
// ckstab - time-domain oracle
// =============================================================================
// Noiseless mean-field equations in the frame rotating at the pump, scaled
// variables (a~, b~), time in units of 1/omega_m:
//   da/dt = i [Delta0 - (b + b*) - k |b|^2] a - kappa/2 a + sqrt(kappa) s
//   db/dt = -i (1 + k |a|^2) b - c |a|^2 - gamma/2 b
// with c = i (Eq14Consistent) or c = 1 (AsPrinted). gamma always enters the
// flow; the susceptibility switch only affects the static solution.
// =============================================================================

#include "ckstab/linstab.hpp"
#include "ckstab/model.hpp"
#include "ckstab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

namespace ckstab {

using FlowState = StateVec<4>;  // (Re a, Im a, Re b, Im b), scaled

inline FlowState to_flow_state(cdouble a, cdouble b) { return {a.real(), a.imag(), b.real(), b.imag()}; }

/// Right-hand side of the scaled equations of motion.
struct MeanFieldFlow {
    double delta0, kappa, gamma, k, drive_term;
    cdouble mech_drive;  // c

    MeanFieldFlow(const SystemParams& p, double scaled_drive)
        : delta0(p.delta0_s()), kappa(p.kappa_s()), gamma(p.gamma_s()), k(p.gck_s()),
          drive_term(std::sqrt(p.kappa_s()) * scaled_drive),
          mech_drive(p.convention == Convention::Eq14Consistent ? cdouble(0.0, 1.0) : cdouble(1.0, 0.0)) {}

    FlowState operator()(double /*t*/, const FlowState& y) const {
        const cdouble a(y[0], y[1]), b(y[2], y[3]);
        const cdouble I(0.0, 1.0);
        const double na = std::norm(a);
        const cdouble da = I * (delta0 - 2.0 * b.real() - k * std::norm(b)) * a - 0.5 * kappa * a + drive_term;
        const cdouble db = -I * (1.0 + k * na) * b - mech_drive * na - 0.5 * gamma * b;
        return {da.real(), da.imag(), db.real(), db.imag()};
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<cdouble> a;  // scaled cavity amplitude
    std::vector<cdouble> b;  // scaled mechanical amplitude
    std::vector<double> perturbation_norm;  // distance to the reference point (if any)
    bool diverged = false;
    double growth_ratio = 0.0;  // final / initial perturbation norm
};

struct SimulateOptions {
    std::size_t stride = 1;
    std::optional<FlowState> reference;  // perturbation norms are measured from here
};

/// Largest step the integrator accepts for these parameters.
inline double max_time_step(const SystemParams& p) {
    return 2.0 * std::numbers::pi / (50.0 * std::max({1.0, std::abs(p.delta0_s()), p.kappa_s()}));
}

/// Default step: 1/200 of the period of the fastest scale at the given state.
inline double default_time_step(const SystemParams& p, const SteadyState* ss = nullptr) {
    double fastest = std::max({1.0, std::abs(p.delta0_s()), p.kappa_s()});
    if (ss != nullptr) {
        fastest = std::max({fastest, std::abs(detuning_from_beta(p, ss->beta_s)), 1.0 + p.gck_s() * ss->n,
                            2.0 * std::abs(ss->alpha_s)});
    }
    return 2.0 * std::numbers::pi / (200.0 * fastest);
}

/// Integrates the mean-field flow from (a0, b0), scaled amplitudes.
inline Trajectory simulate(const SystemParams& p, cdouble a0, cdouble b0, const DriveSpec& drive, double t_end,
                           double dt, const SimulateOptions& opt = {}) {
    p.validate();
    drive.validate();
    if (!(dt > 0.0) || dt > max_time_step(p) * (1.0 + 1e-12)) {
        throw ModelError("simulate: dt must lie in (0, 2 pi / (50 max(omega_m, |Delta0|, kappa))]");
    }
    const MeanFieldFlow flow(p, drive.scaled_value(p));
    const FlowState y0 = to_flow_state(a0, b0);
    IntegrationOptions iopt;
    iopt.stride = opt.stride;
    const auto res = integrate_fixed_step<4>(flow, y0, t_end, dt, iopt);

    Trajectory tr;
    tr.times = res.times;
    tr.diverged = res.diverged;
    tr.a.reserve(res.states.size());
    tr.b.reserve(res.states.size());
    for (const auto& y : res.states) {
        tr.a.emplace_back(y[0], y[1]);
        tr.b.emplace_back(y[2], y[3]);
        if (opt.reference) {
            FlowState d;
            for (std::size_t i = 0; i < 4; ++i) d[i] = y[i] - (*opt.reference)[i];
            tr.perturbation_norm.push_back(norm(d));
        }
    }
    if (!tr.perturbation_norm.empty() && tr.perturbation_norm.front() > 0.0)
        tr.growth_ratio = tr.perturbation_norm.back() / tr.perturbation_norm.front();
    return tr;
}

// =============================================================================
// Dynamic verdict
// =============================================================================

enum class DynamicClass { Stable, Unstable, Inconclusive };

inline std::string_view to_string(DynamicClass c) {
    switch (c) {
        case DynamicClass::Stable: return "Stable";
        case DynamicClass::Unstable: return "Unstable";
        case DynamicClass::Inconclusive: return "Inconclusive";
    }
    return "?";
}

struct DynamicVerdict {
    DynamicClass verdict = DynamicClass::Inconclusive;
    double growth_ratio = 0.0;     // final / initial
    double peak_ratio = 0.0;       // max / initial
    double late_ratio = 0.0;       // max over the last tenth of the horizon / initial
    bool eigen_direction = false;  // perturbation along the dominant eigenvector
    SteadyState reference;         // fixed point actually probed
    double time_step = 0.0;
};

struct DynamicOptions {
    double rel_perturbation = 1e-3;
    std::optional<double> horizon;  // default 50 / gamma
    std::optional<double> dt;       // default default_time_step()
};

/// Exact fixed point of the flow closest to ss. With the gamma-free static
/// susceptibility the steady state is only approximately a fixed point, so
/// it is re-solved with the full susceptibility at the same drive.
inline SteadyState flow_fixed_point(const SystemParams& p, const SteadyState& ss) {
    if (p.susceptibility == Susceptibility::Full) return ss;
    SystemParams full = p;
    full.susceptibility = Susceptibility::Full;
    const auto set = steady_states(full, DriveSpec::scaled(ss.drive));
    const SteadyState* best = nullptr;
    for (const auto& cand : set.states)
        if (best == nullptr || std::abs(cand.n - ss.n) < std::abs(best->n - ss.n)) best = &cand;
    if (best == nullptr) throw ModelError("flow_fixed_point: no steady state at this drive");
    return *best;
}

/// Perturbs the steady state and classifies its fate in the time domain.
/// Unstable as soon as the perturbation exceeds 10x its initial size;
/// Stable if it stays below 0.1x over the last tenth of the horizon.
inline DynamicVerdict dynamic_verdict(const SystemParams& p, const SteadyState& ss_in, const DynamicOptions& opt = {}) {
    DynamicVerdict out;
    const SteadyState ss = flow_fixed_point(p, ss_in);
    out.reference = ss;

    SystemParams exact_p = p;
    exact_p.susceptibility = Susceptibility::Full;
    const LinearizedSystem ls = linearize(exact_p, ss, Linearization::ExactJacobian);
    const auto ev = quartic_roots(ls.charpoly.a3, ls.charpoly.a2, ls.charpoly.a1, ls.charpoly.a0);
    const auto dominant = *std::max_element(ev.begin(), ev.end(), [](cdouble x, cdouble y) { return x.real() < y.real(); });

    // Map a complex-basis vector (da, da^dag, db', db'^dag) to a real
    // perturbation; db = -db'.
    auto to_physical = [](const std::array<cdouble, 4>& v) {
        const cdouble da = 0.5 * (v[0] + std::conj(v[1]));
        const cdouble db = -0.5 * (v[2] + std::conj(v[3]));
        return std::pair{da, db};
    };
    cdouble da, db;
    const auto vec = eigenvector(ls.A, dominant);
    auto [ea, eb] = to_physical(vec);
    if (std::norm(ea) + std::norm(eb) < 1e-6) {
        std::array<cdouble, 4> iv;
        for (std::size_t i = 0; i < 4; ++i) iv[i] = cdouble(0.0, 1.0) * vec[i];
        std::tie(ea, eb) = to_physical(iv);
    }
    if (std::norm(ea) + std::norm(eb) >= 1e-6) {
        da = ea;
        db = eb;
        out.eigen_direction = true;
    } else {
        da = cdouble(1.0, 1.0);
        db = cdouble(1.0, 1.0);
    }
    const double dir_norm = std::sqrt(std::norm(da) + std::norm(db));
    const double state_norm = std::sqrt(std::norm(ss.alpha_s) + std::norm(ss.beta_s));
    const double size = opt.rel_perturbation * (state_norm > 0.0 ? state_norm : 1.0);
    da *= size / dir_norm;
    db *= size / dir_norm;

    const double horizon = opt.horizon.value_or(50.0 / p.gamma_s());
    const double dt = opt.dt.value_or(default_time_step(p, &ss));
    out.time_step = dt;

    const MeanFieldFlow flow(p, ss.drive);
    const FlowState ref = to_flow_state(ss.alpha_s, ss.beta_s);
    FlowState y = to_flow_state(ss.alpha_s + da, ss.beta_s + db);
    auto dist = [&](const FlowState& s) {
        FlowState d;
        for (std::size_t i = 0; i < 4; ++i) d[i] = s[i] - ref[i];
        return norm(d);
    };
    const double initial = dist(y);
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    const std::size_t late_start = steps - steps / 10;
    double peak = initial, late = 0.0, current = initial;
    for (std::size_t i = 0; i < steps; ++i) {
        y = rk4_step<4>(flow, static_cast<double>(i) * dt, y, dt);
        current = dist(y);
        if (!std::isfinite(current)) {
            out.verdict = DynamicClass::Unstable;
            break;
        }
        peak = std::max(peak, current);
        if (i >= late_start) late = std::max(late, current);
        if (current > 10.0 * initial) {
            out.verdict = DynamicClass::Unstable;
            break;
        }
    }
    out.growth_ratio = current / initial;
    out.peak_ratio = peak / initial;
    out.late_ratio = late / initial;
    if (out.verdict != DynamicClass::Unstable) {
        out.verdict = out.late_ratio < 0.1 ? DynamicClass::Stable : DynamicClass::Inconclusive;
    }
    return out;
}

}  // namespace ckstab
