// ckstab - steady states and stability of an optomechanical cavity with
// radiation-pressure and cross-Kerr coupling.

#include "ckstab/ckstab.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace {

struct FlagSet {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::string config_path;
    bool raw = false;
    std::vector<CLI::Option*> raw_flags;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        options.emplace_back(key, app->add_option(flag, values[key], help));
    }

    /// defaults -> config file -> preset -> explicit flags
    ckstab::RunConfig resolve(const std::string& preset = {}) const {
        ckstab::RunConfig c;
        if (!config_path.empty()) ckstab::apply_config_file(c, config_path);
        if (!preset.empty()) ckstab::apply_preset(c, preset);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) ckstab::set_config_value(c, key, values.at(key));
        for (const auto* flag : raw_flags)
            if (flag->count() > 0) c.raw = true;
        if (c.raw && !g0_given()) throw ckstab::ConfigError("raw units need an explicit g0 (--g0 or config file)");
        return c;
    }

    bool g0_given() const {
        for (const auto& [key, opt] : options)
            if (key == "g0" && opt->count() > 0) return true;
        if (config_path.empty()) return false;
        ckstab::RunConfig probe;
        probe.g0 = std::numeric_limits<double>::quiet_NaN();
        ckstab::apply_config_file(probe, config_path);
        return !std::isnan(probe.g0);
    }
};

void add_common(CLI::App* app, FlagSet& f) {
    app->add_option("--config", f.config_path, "key = value configuration file");
    f.add(app, "--delta0", "delta0", "pump detuning (units of omega_m)");
    f.add(app, "--kappa", "kappa", "cavity linewidth (units of omega_m)");
    f.add(app, "--gamma", "gamma", "mechanical linewidth (units of omega_m)");
    f.add(app, "--g0", "g0", "radiation-pressure coupling (units of omega_m)");
    f.add(app, "--gck", "gck", "cross-Kerr coupling, g_ck/g0^2 (raw with --raw)");
    f.add(app, "--convention", "convention", "mechanical drive term: eq14 | printed");
    f.add(app, "--susceptibility", "susceptibility", "static mechanical response: quintic | full");
    f.add(app, "--linearization", "linearization", "fluctuation matrix: exact | eq14");
    f.add(app, "--out", "out", "output path (prefix for multi-file commands)");
    f.add(app, "--format", "format", "csv | json");
    f.raw_flags.push_back(app->add_flag("--raw", f.raw, "gck and alpha_in in raw units"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ckstab: steady states and stability of a cross-Kerr optomechanical cavity"};
    app.require_subcommand(1);

    FlagSet f;
    std::string figure_id;
    std::vector<std::pair<CLI::App*, std::vector<ckstab::CommandOutput> (*)(const ckstab::RunConfig&)>> commands;

    auto* steady = app.add_subcommand("steady", "steady states at a drive");
    auto* classify = app.add_subcommand("classify", "stability verdict per steady state");
    auto* sweep = app.add_subcommand("sweep", "stability diagram over occupation or detuning");
    auto* branches = app.add_subcommand("branches", "unstable-branch endpoints, numeric and analytic");
    auto* critical = app.add_subcommand("critical", "critical cross-Kerr couplings");
    auto* simulate = app.add_subcommand("simulate", "time-domain trajectory near a steady state");
    auto* figure = app.add_subcommand("figure", "figure data presets");

    for (auto* sub : {steady, classify, sweep, branches, critical, simulate, figure}) add_common(sub, f);
    for (auto* sub : {steady, classify, simulate}) f.add(sub, "--alpha-in", "alpha_in", "drive amplitude (units of omega_m/g0)");
    for (auto* sub : {classify, simulate}) f.add(sub, "--n", "n", "scaled occupation g0^2 |alpha|^2");
    f.add(simulate, "--root", "root", "root index at --alpha-in (-1: largest occupation)");
    f.add(simulate, "--t-end", "t_end", "integration horizon (units of 1/omega_m)");
    f.add(simulate, "--dt", "dt", "time step");
    f.add(simulate, "--perturbation", "perturbation", "relative initial displacement");
    f.add(sweep, "--kind", "kind", "occupation | detuning");
    f.add(sweep, "--gck-list", "gck_list", "comma-separated g_ck/g0^2 values");
    f.add(sweep, "--n-min", "n_min", "lower end of the occupation grid");
    f.add(sweep, "--n-max", "n_max", "upper end of the occupation grid");
    f.add(sweep, "--points", "points", "occupation grid points");
    f.add(sweep, "--drive-list", "drive_list", "comma-separated drives for detuning sweeps");
    f.add(sweep, "--delta0-min", "delta0_min", "lower end of the detuning grid");
    f.add(sweep, "--delta0-max", "delta0_max", "upper end of the detuning grid");
    f.add(sweep, "--delta0-points", "delta0_points", "detuning grid points");
    f.add(branches, "--gck-list", "gck_list", "comma-separated g_ck/g0^2 values");
    figure->add_option("--id", figure_id, "fig2 | fig3 | fig3b | fig4 | fig5 | fig6 | fig7")->required();

    commands = {{steady, ckstab::cmd_steady},     {classify, ckstab::cmd_classify}, {sweep, ckstab::cmd_sweep},
                {branches, ckstab::cmd_branches}, {critical, ckstab::cmd_critical}, {simulate, ckstab::cmd_simulate}};

    CLI11_PARSE(app, argc, argv);

    try {
        std::vector<ckstab::CommandOutput> outputs;
        ckstab::RunConfig cfg;
        if (figure->parsed()) {
            cfg = f.resolve(figure_id);
            outputs = ckstab::cmd_figure(cfg);
        } else {
            cfg = f.resolve();
            for (const auto& [sub, fn] : commands)
                if (sub->parsed()) outputs = fn(cfg);
        }
        for (const auto& path : ckstab::write_outputs(cfg, outputs, std::cout)) std::cerr << "wrote " << path << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
