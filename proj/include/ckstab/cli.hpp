#pragma once

// =============================================================================
// ckstab - command implementations
// =============================================================================
// Every command maps a resolved RunConfig to one or more tables. The CLI
// front end only parses flags and writes the tables out.
// =============================================================================

#include "ckstab/branches.hpp"
#include "ckstab/dynamics.hpp"
#include "ckstab/io.hpp"
#include "ckstab/linstab.hpp"
#include "ckstab/model.hpp"
#include "ckstab/parallel.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace ckstab {

struct CommandOutput {
    std::string suffix;  // appended to --out; empty for single-table commands
    Table table;
};

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

inline SystemParams params_with_gck(const RunConfig& c, double g) {
    SystemParams p = c.params();
    p.gck = c.raw ? g : g * c.g0 * c.g0;
    return p;
}

inline Cell cell(double v) { return v; }
inline Cell cell(int v) { return static_cast<std::int64_t>(v); }
inline Cell cell(std::size_t v) { return static_cast<std::int64_t>(v); }
inline Cell cell(bool v) { return static_cast<std::int64_t>(v ? 1 : 0); }
inline Cell cell(std::string_view v) { return std::string(v); }
inline Cell cell(const char* v) { return std::string(v); }

// =============================================================================
// Presets
// =============================================================================

inline const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"fig2", "fig3", "fig3b", "fig4", "fig5", "fig6", "fig7"};
    return ids;
}

/// Parameters of the reference diagram plus the per-figure sweep. Upper
/// branch figures with cross-Kerr use the closed-form (eq14) linearization.
inline void apply_preset(RunConfig& c, const std::string& id) {
    c.delta0 = -1.0;
    c.kappa = 0.6;
    c.gamma = 0.12;
    c.g0 = 1e-5;
    c.raw = false;
    c.preset = id;
    c.n_min = 0.0;
    c.n_max = 3.0;
    c.points = 3000;
    c.delta0_min = -3.0;
    c.delta0_max = 1.0;
    c.delta0_points = 801;
    if (id == "fig2") {
        c.kind = SweepKind::Occupation;
        c.gck_list = {0.0};
        c.linearization = Linearization::ExactJacobian;
    } else if (id == "fig3") {
        c.kind = SweepKind::Occupation;
        c.gck_list = {0.0, 0.2, 0.4};
        c.n_max = 6.0;
        c.points = 6000;
        c.linearization = Linearization::ClosedForm;
    } else if (id == "fig3b") {
        c.kind = SweepKind::Occupation;
        c.gck_list = {0.0, 0.95, 1.0};
        c.n_max = 30.0;
        c.points = 6000;
        c.linearization = Linearization::ClosedForm;
    } else if (id == "fig4") {
        c.kind = SweepKind::Occupation;
        c.gck_list = {0.0, 0.2};
        c.n_max = 6.0;
        c.points = 6000;
        c.linearization = Linearization::ClosedForm;
    } else if (id == "fig5") {
        c.kind = SweepKind::Detuning;
        c.gck_list = {0.0, 0.2};
        c.drive_list = {0.2, 0.28, 0.35};
        c.linearization = Linearization::ClosedForm;
    } else if (id == "fig6") {
        c.kind = SweepKind::Detuning;
        c.gck_list = {0.0};
        c.drive_list = {2.0, 4.0, 10.0};
        c.linearization = Linearization::ClosedForm;
    } else if (id == "fig7") {
        c.kind = SweepKind::Detuning;
        c.gck_list = {0.2};
        c.drive_list = {2.0, 4.0, 10.0};
        c.linearization = Linearization::ClosedForm;
    } else {
        throw ConfigError("unknown figure id '" + id + "' (expected fig2..fig7)");
    }
}

// =============================================================================
// steady / classify
// =============================================================================

inline std::vector<CommandOutput> cmd_steady(const RunConfig& c) {
    const SystemParams p = c.params();
    const auto set = steady_states(p, c.drive());
    Table t;
    t.metadata = config_metadata("steady", c);
    t.columns = {"root", "n", "n_a", "alpha_re", "alpha_im", "beta_re", "beta_im", "residual", "degenerate"};
    for (std::size_t i = 0; i < set.states.size(); ++i) {
        const auto& s = set.states[i];
        t.add_row({cell(i), s.n, s.n_a, s.alpha.real(), s.alpha.imag(), s.beta.real(), s.beta.imag(), s.residual,
                   cell(s.degenerate)});
    }
    t.footer = {{"states", std::to_string(set.states.size())},
                {"anomalous_count", set.anomalous_count ? "true" : "false"}};
    return {{"", std::move(t)}};
}

inline std::vector<SteadyState> selected_states(const RunConfig& c, const SystemParams& p) {
    if (c.n) return {steady_state_at_occupation(p, *c.n)};
    return steady_states(p, c.drive()).states;
}

inline std::vector<CommandOutput> cmd_classify(const RunConfig& c) {
    const SystemParams p = c.params();
    Table t;
    t.metadata = config_metadata("classify", c);
    t.columns = {"root", "n", "alpha_in_scaled", "verdict", "a0_margin", "rh_margin", "max_re_lambda", "degenerate"};
    const auto states = selected_states(c, p);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto v = classify(p, states[i], c.linearization);
        t.add_row({cell(i), states[i].n, states[i].drive, cell(to_string(v.klass)), v.a0_margin, v.rh_margin,
                   v.max_re_lambda, cell(v.degenerate)});
    }
    return {{"", std::move(t)}};
}

// =============================================================================
// sweep
// =============================================================================

inline Table occupation_sweep_table(const RunConfig& c, double g) {
    const SystemParams p = params_with_gck(c, g);
    const auto grid = linspace(c.n_min, c.n_max, static_cast<std::size_t>(c.points));
    const auto d = trace_diagram(p, grid, c.linearization);
    Table t;
    t.metadata = config_metadata("sweep", c);
    t.metadata.emplace_back("gck_value", format_double(g));
    t.columns = {"n", "alpha_in_scaled", "verdict", "a0_margin", "rh_margin"};
    for (const auto& s : d.samples) t.add_row({s.n, s.drive, cell(to_string(s.verdict)), s.a0_margin, s.rh_margin});
    return t;
}

struct DetuningRow {
    double delta0 = 0.0;
    std::vector<SteadyState> states;
    std::vector<StabilityVerdict> verdicts;
};

/// Steady states and verdicts over the detuning grid. The selected branch
/// is the largest-occupation root at each detuning.
inline std::vector<DetuningRow> detuning_sweep(const RunConfig& c, double g, double drive) {
    const auto grid = linspace(c.delta0_min, c.delta0_max, static_cast<std::size_t>(c.delta0_points));
    return parallel_map(grid.size(), [&](std::size_t i) {
        RunConfig ci = c;
        ci.delta0 = grid[i];
        const SystemParams p = params_with_gck(ci, g);
        DetuningRow row;
        row.delta0 = grid[i];
        const DriveSpec ds = c.raw ? DriveSpec::raw(drive) : DriveSpec::scaled(drive);
        row.states = steady_states(p, ds).states;
        for (const auto& s : row.states) row.verdicts.push_back(classify(p, s, c.linearization));
        return row;
    });
}

inline Table detuning_sweep_table(const RunConfig& c, double g, double drive) {
    Table t;
    t.metadata = config_metadata("sweep", c);
    t.metadata.emplace_back("gck_value", format_double(g));
    t.metadata.emplace_back("alpha_in_value", format_double(drive));
    t.columns = {"delta0", "root", "n", "verdict", "a0_margin", "rh_margin", "selected"};
    for (const auto& row : detuning_sweep(c, g, drive)) {
        for (std::size_t i = 0; i < row.states.size(); ++i) {
            const auto& v = row.verdicts[i];
            t.add_row({row.delta0, cell(i), row.states[i].n, cell(to_string(v.klass)), v.a0_margin, v.rh_margin,
                       cell(i + 1 == row.states.size())});
        }
    }
    return t;
}

inline std::vector<CommandOutput> cmd_sweep(const RunConfig& c) {
    std::vector<CommandOutput> out;
    for (double g : c.gck_values()) {
        if (c.kind == SweepKind::Occupation) {
            out.push_back({"_gck" + format_short(g), occupation_sweep_table(c, g)});
        } else {
            if (c.drive_list.empty()) throw ConfigError("detuning sweep needs drive_list");
            for (double s : c.drive_list)
                out.push_back({"_gck" + format_short(g) + "_drive" + format_short(s), detuning_sweep_table(c, g, s)});
        }
    }
    return out;
}

// =============================================================================
// branches
// =============================================================================

inline Table branches_table(const RunConfig& c, const SystemParams& p) {
    const auto rep = find_endpoints(p, c.linearization);
    Table t;
    t.metadata = config_metadata("branches", c);
    t.columns = {"label", "source", "n", "alpha_in_scaled", "rel_deviation", "note"};

    auto numeric_n = [&](BranchLabel l) -> double {
        const auto bp = rep.find(l);
        return bp ? bp->n : nan_value;
    };
    auto add = [&](BranchLabel l, PointSource s, double n, const std::string& note) {
        const double ref = numeric_n(l);
        const double dev = (std::isfinite(ref) && std::isfinite(n) && s != PointSource::Numeric) ? (n - ref) / ref : nan_value;
        const double drive = std::isfinite(n) && n >= 0.0 ? drive_for_occupation(p, n) : nan_value;
        t.add_row({cell(to_string(l)), cell(to_string(s)), n, drive, dev, note});
    };

    for (const auto& bp : rep.points) add(bp.label, PointSource::Numeric, bp.n, bp.degenerate ? "degenerate" : "");
    if (!rep.bc_present) {
        t.add_row({cell("B-C"), cell("numeric"), nan_value, nan_value, nan_value,
                   cell(rep.degenerate ? "no B-C branch (merged)" : "no B-C branch")});
    }
    if (!rep.de_present) {
        t.add_row({cell("D-E"), cell("numeric"), nan_value, nan_value, nan_value, cell("no D-E branch")});
    } else if (rep.de_unbounded) {
        t.add_row({cell("E"), cell("numeric"), nan_value, nan_value, nan_value, cell("unstable beyond scan")});
    }

    const auto e7 = eq7_endpoints(p);
    if (e7.valid) {
        add(BranchLabel::B, PointSource::Eq7, e7.lower, e7.note);
        add(BranchLabel::C, PointSource::Eq7, e7.upper, e7.note);
    } else {
        t.add_row({cell("B-C"), cell("eq7"), nan_value, nan_value, nan_value, e7.note});
    }
    const auto e10 = eq10_endpoints(p);
    if (e10.valid) {
        add(BranchLabel::B, PointSource::Eq10, e10.lower, e10.note);
        add(BranchLabel::C, PointSource::Eq10, e10.upper, e10.note);
    } else {
        t.add_row({cell("B-C"), cell("eq10"), nan_value, nan_value, nan_value, e10.note});
    }
    const auto up = eq5_eq13_endpoints(p);
    add(BranchLabel::D, PointSource::Eq5, up.n_d_eq5, up.note);
    add(BranchLabel::E, PointSource::Eq5, up.n_e_eq5, up.note);
    add(BranchLabel::D, PointSource::Eq13, up.n_d_eq13,
        (up.d_converged ? "" : "fixed point diverged; ") + std::string("Lambda_D = ") + format_double(up.lambda_d));
    add(BranchLabel::E, PointSource::Eq13, up.n_e_eq13,
        (up.e_converged ? "" : "fixed point diverged; ") + std::string("Lambda_E = ") + format_double(up.lambda_e));

    const auto ac = asymptotic_coeffs(p);
    t.footer = {{"bc_drive_width", format_double(bc_drive_width(rep))},
                {"de_n_width", format_double(de_n_width(rep))},
                {"detector_gap", format_double(rep.detector_gap)},
                {"degenerate", rep.degenerate ? "true" : "false"},
                {"c3_inf", format_double(ac.c3_inf)},
                {"c4_inf", format_double(ac.c4_inf)}};
    return t;
}

inline std::vector<CommandOutput> cmd_branches(const RunConfig& c) {
    std::vector<CommandOutput> out;
    const auto gs = c.gck_values();
    for (double g : gs) {
        Table t = branches_table(c, params_with_gck(c, g));
        t.metadata.emplace_back("gck_value", format_double(g));
        out.push_back({gs.size() > 1 ? "_gck" + format_short(g) : "", std::move(t)});
    }
    return out;
}

// =============================================================================
// critical
// =============================================================================

inline Table critical_table(const RunConfig& c, const CriticalOptions& opt = {}) {
    const SystemParams p = c.params();
    Table t;
    t.metadata = config_metadata("critical", c);
    t.columns = {"quantity", "linearization", "value", "kind", "note"};
    auto opt_cell = [](const std::optional<double>& v) { return v ? *v : nan_value; };

    bool first = true;
    for (Linearization mode : {Linearization::ExactJacobian, Linearization::ClosedForm}) {
        const auto cc = critical_couplings(p, mode, opt);
        if (first) {
            t.add_row({cell("g_c1"), cell("fold"), opt_cell(cc.g_c1), cell("numeric"),
                       cell(cc.g_c1 ? "B-C vanishes" : "B-C never vanishes in scan")});
            first = false;
        }
        const std::string lin(to_string(mode));
        t.add_row({cell("g_star"), lin, opt_cell(cc.g_star), cell("numeric"),
                   cc.g_star ? "n_E = " + format_double(cc.n_e_at_g_star) : std::string("n_E never diverges in scan")});
        t.add_row({cell("g_c2"), lin, opt_cell(cc.g_c2), cell("numeric"),
                   cell(cc.g_c2 ? "D-E vanishes" : "D-E never vanishes in scan")});
        if (mode == Linearization::ClosedForm) {
            t.add_row({cell("eq11_g_c1"), cell("-"), cc.eq11_omega_m, cell("comparison only"), cell("units of omega_m")});
            t.add_row({cell("eq11_g_c1_scaled"), cell("-"), cc.eq11_scaled, cell("comparison only"),
                       cell("units of g0^2/omega_m")});
            t.add_row({cell("g_star_c4_zero"), cell("-"), cc.g_star_c4_zero, cell("comparison only"),
                       cell("zero of c4_inf")});
            t.add_row({cell("g_star_text"), cell("-"), cc.g_star_text_scaled, cell("comparison only"),
                       cell("2 g0/omega_m in units of g0^2/omega_m")});
            t.add_row({cell("eq16_g_c2"), cell("-"), cc.eq16_scaled, cell("comparison only"),
                       cell("-2 (gamma+kappa)^2 g0^2 / (gamma kappa Delta0)")});
            t.add_row({cell("eq16_g_c2_alt"), cell("-"), cc.eq16_alt_scaled, cell("comparison only"),
                       cell("2 g_star + 2 kappa g0^2/(omega_m gamma)")});
        }
    }
    return t;
}

inline std::vector<CommandOutput> cmd_critical(const RunConfig& c) { return {{"", critical_table(c)}}; }

// =============================================================================
// simulate
// =============================================================================

inline std::vector<CommandOutput> cmd_simulate(const RunConfig& c) {
    const SystemParams p = c.params();
    SteadyState ss;
    if (c.n) {
        ss = steady_state_at_occupation(p, *c.n);
    } else {
        const auto states = steady_states(p, c.drive()).states;
        const int idx = c.root < 0 ? static_cast<int>(states.size()) - 1 : c.root;
        if (idx < 0 || idx >= static_cast<int>(states.size())) throw ConfigError("simulate: root index out of range");
        ss = states[static_cast<std::size_t>(idx)];
    }
    const SteadyState ref = flow_fixed_point(p, ss);
    const double t_end = c.t_end > 0.0 ? c.t_end : 100.0 / p.gamma_s();
    const double dt = c.dt > 0.0 ? c.dt : default_time_step(p, &ref);
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt));
    SimulateOptions so;
    so.stride = std::max<std::size_t>(1, steps / 5000);
    so.reference = to_flow_state(ref.alpha_s, ref.beta_s);

    const double state_norm = std::sqrt(std::norm(ref.alpha_s) + std::norm(ref.beta_s));
    const double size = c.perturbation * (state_norm > 0.0 ? state_norm : 1.0);
    const cdouble kick = size * cdouble(0.5, 0.5);
    const auto tr = simulate(p, ref.alpha_s + kick, ref.beta_s + kick, DriveSpec::scaled(ref.drive), t_end, dt, so);

    DynamicOptions dopt;
    dopt.rel_perturbation = c.perturbation;
    const auto dv = dynamic_verdict(p, ref, dopt);
    const auto lv = classify(p, ref, Linearization::ExactJacobian);

    Table t;
    t.metadata = config_metadata("simulate", c);
    t.metadata.emplace_back("reference_n", format_double(ref.n));
    t.metadata.emplace_back("dt_used", format_double(dt));
    t.columns = {"t", "re_a", "im_a", "re_b", "im_b", "perturbation_norm"};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        t.add_row({tr.times[i], tr.a[i].real(), tr.a[i].imag(), tr.b[i].real(), tr.b[i].imag(),
                   tr.perturbation_norm[i]});
    }
    t.footer = {{"verdict", std::string(to_string(dv.verdict))},
                {"linear_verdict", std::string(to_string(lv.klass))},
                {"growth_ratio", format_double(tr.growth_ratio)},
                {"diverged", tr.diverged ? "true" : "false"}};
    return {{"", std::move(t)}};
}

// =============================================================================
// figure
// =============================================================================

inline Table occupation_summary(const RunConfig& c) {
    Table t;
    t.metadata = config_metadata("figure", c);
    t.columns = {"gck", "n_B", "n_C", "bc_drive_width", "n_D", "n_E", "de_n_width"};
    for (double g : c.gck_values()) {
        const auto rep = find_endpoints(params_with_gck(c, g), c.linearization);
        auto n_of = [&](BranchLabel l) {
            const auto bp = rep.find(l);
            return bp ? bp->n : nan_value;
        };
        t.add_row({g, n_of(BranchLabel::B), n_of(BranchLabel::C), bc_drive_width(rep), n_of(BranchLabel::D),
                   n_of(BranchLabel::E), de_n_width(rep)});
    }
    return t;
}

inline Table detuning_summary(const RunConfig& c) {
    Table t;
    t.metadata = config_metadata("figure", c);
    t.columns = {"gck", "alpha_in", "peak_n", "peak_delta0", "selected_samples", "selected_stable",
                 "selected_stable_in_m2_0"};
    for (double g : c.gck_values()) {
        for (double s : c.drive_list) {
            const auto rows = detuning_sweep(c, g, s);
            double peak = 0.0, peak_d = nan_value;
            std::int64_t total = 0, stable = 0, stable_window = 0, window = 0;
            for (const auto& r : rows) {
                if (r.states.empty()) continue;
                const auto& sel = r.states.back();
                const bool st = r.verdicts.back().klass == StabilityClass::Stable;
                ++total;
                stable += st;
                if (r.delta0 >= -2.0 && r.delta0 <= 0.0) {
                    ++window;
                    stable_window += st;
                }
                if (sel.n > peak) { peak = sel.n; peak_d = r.delta0; }
            }
            t.add_row({g, s, peak, peak_d, total, stable,
                       cell(std::to_string(stable_window) + "/" + std::to_string(window))});
        }
    }
    return t;
}

/// Expects a configuration with the preset already applied (apply_preset).
inline std::vector<CommandOutput> cmd_figure(const RunConfig& c) {
    auto out = cmd_sweep(c);
    out.push_back({"_summary", c.kind == SweepKind::Occupation ? occupation_summary(c) : detuning_summary(c)});
    return out;
}

// =============================================================================
// output
// =============================================================================

/// Writes every table to <out><suffix>.<ext>, or all of them to os when no
/// output path is configured.
inline std::vector<std::string> write_outputs(const RunConfig& c, const std::vector<CommandOutput>& outputs,
                                              std::ostream& os) {
    std::vector<std::string> written;
    const std::string ext = c.format == OutputFormat::Csv ? ".csv" : ".json";
    for (const auto& o : outputs) {
        if (c.out.empty()) {
            write_table(o.table, c.format, os);
            continue;
        }
        std::string path = c.out;
        if (outputs.size() > 1 || !o.suffix.empty()) {
            if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0)
                path.erase(path.size() - ext.size());
            path += o.suffix + ext;
        }
        if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
            std::filesystem::create_directories(parent);
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write '" + path + "'");
        write_table(o.table, c.format, f);
        if (!f) throw ConfigError("write failed for '" + path + "'");
        written.push_back(path);
    }
    return written;
}

}  // namespace ckstab
