#pragma once

// =============================================================================
// ckstab - run configuration, tables and CSV / JSON emission
// =============================================================================

#include "ckstab/linstab.hpp"
#include "ckstab/model.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ckstab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Compact form for file names and labels.
inline std::string format_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// =============================================================================
// RunConfig
// =============================================================================

enum class OutputFormat { Csv, Json };
enum class SweepKind { Occupation, Detuning };

struct RunConfig {
    // Physical parameters. gck is scaled (g_ck / g0^2 with omega_m = 1)
    // unless raw is set, in which case gck and alpha_in are raw values.
    double delta0 = -1.0;
    double kappa = 0.6;
    double gamma = 0.12;
    double g0 = 1e-5;
    double gck = 0.0;
    bool raw = false;
    Convention convention = Convention::Eq14Consistent;
    Susceptibility susceptibility = Susceptibility::Full;
    Linearization linearization = Linearization::ExactJacobian;

    // steady / classify / simulate
    double alpha_in = 0.0;
    std::optional<double> n;  // classify or simulate at this scaled occupation
    int root = -1;            // simulate: root index at alpha_in (-1 = largest n)

    // sweep
    SweepKind kind = SweepKind::Occupation;
    std::vector<double> gck_list;  // empty: {gck}
    double n_min = 0.0;
    double n_max = 3.0;
    int points = 3000;
    std::vector<double> drive_list;  // detuning sweep drives
    double delta0_min = -3.0;
    double delta0_max = 1.0;
    int delta0_points = 801;

    // simulate
    double t_end = 0.0;  // 0: 100 / gamma
    double dt = 0.0;     // 0: default step
    double perturbation = 1e-3;

    std::string preset;  // figure id
    std::string out;
    OutputFormat format = OutputFormat::Csv;

    [[nodiscard]] SystemParams params() const {
        SystemParams p;
        p.omega_m = 1.0;
        p.kappa = kappa;
        p.gamma = gamma;
        p.delta0 = delta0;
        p.g0 = g0;
        p.gck = raw ? gck : gck * g0 * g0;
        p.convention = convention;
        p.susceptibility = susceptibility;
        p.validate();
        return p;
    }

    [[nodiscard]] DriveSpec drive() const { return raw ? DriveSpec::raw(alpha_in) : DriveSpec::scaled(alpha_in); }

    [[nodiscard]] std::vector<double> gck_values() const { return gck_list.empty() ? std::vector<double>{gck} : gck_list; }

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != static_cast<int>(d)) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<int>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    return out;
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

}  // namespace detail

inline Convention parse_convention(const std::string& v) {
    if (v == "eq14") return Convention::Eq14Consistent;
    if (v == "printed") return Convention::AsPrinted;
    throw ConfigError("convention must be eq14 or printed, got '" + v + "'");
}
inline Susceptibility parse_susceptibility(const std::string& v) {
    if (v == "quintic") return Susceptibility::GammaNeglected;
    if (v == "full") return Susceptibility::Full;
    throw ConfigError("susceptibility must be quintic or full, got '" + v + "'");
}
inline Linearization parse_linearization(const std::string& v) {
    if (v == "exact") return Linearization::ExactJacobian;
    if (v == "eq14") return Linearization::ClosedForm;
    throw ConfigError("linearization must be exact or eq14, got '" + v + "'");
}
inline OutputFormat parse_format(const std::string& v) {
    if (v == "csv") return OutputFormat::Csv;
    if (v == "json") return OutputFormat::Json;
    throw ConfigError("format must be csv or json, got '" + v + "'");
}
inline SweepKind parse_kind(const std::string& v) {
    if (v == "occupation") return SweepKind::Occupation;
    if (v == "detuning") return SweepKind::Detuning;
    throw ConfigError("kind must be occupation or detuning, got '" + v + "'");
}

/// Applies one key = value assignment.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "delta0") c.delta0 = parse_double(key, value);
    else if (key == "kappa") c.kappa = parse_double(key, value);
    else if (key == "gamma") c.gamma = parse_double(key, value);
    else if (key == "g0") c.g0 = parse_double(key, value);
    else if (key == "gck") c.gck = parse_double(key, value);
    else if (key == "raw") c.raw = parse_bool(key, value);
    else if (key == "convention") c.convention = parse_convention(value);
    else if (key == "susceptibility") c.susceptibility = parse_susceptibility(value);
    else if (key == "linearization") c.linearization = parse_linearization(value);
    else if (key == "alpha_in") c.alpha_in = parse_double(key, value);
    else if (key == "n") c.n = value.empty() ? std::nullopt : std::optional<double>(parse_double(key, value));
    else if (key == "root") c.root = parse_int(key, value);
    else if (key == "kind") c.kind = parse_kind(value);
    else if (key == "gck_list") c.gck_list = parse_list(key, value);
    else if (key == "n_min") c.n_min = parse_double(key, value);
    else if (key == "n_max") c.n_max = parse_double(key, value);
    else if (key == "points") c.points = parse_int(key, value);
    else if (key == "drive_list") c.drive_list = parse_list(key, value);
    else if (key == "delta0_min") c.delta0_min = parse_double(key, value);
    else if (key == "delta0_max") c.delta0_max = parse_double(key, value);
    else if (key == "delta0_points") c.delta0_points = parse_int(key, value);
    else if (key == "t_end") c.t_end = parse_double(key, value);
    else if (key == "dt") c.dt = parse_double(key, value);
    else if (key == "perturbation") c.perturbation = parse_double(key, value);
    else if (key == "preset") c.preset = value;
    else if (key == "out") c.out = value;
    else if (key == "format") c.format = parse_format(value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

/// Ordered (key, value) view of a configuration; the inverse of
/// set_config_value.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
    using detail::join;
    return {
        {"delta0", format_double(c.delta0)},
        {"kappa", format_double(c.kappa)},
        {"gamma", format_double(c.gamma)},
        {"g0", format_double(c.g0)},
        {"gck", format_double(c.gck)},
        {"raw", c.raw ? "true" : "false"},
        {"convention", std::string(to_string(c.convention))},
        {"susceptibility", std::string(to_string(c.susceptibility))},
        {"linearization", std::string(to_string(c.linearization))},
        {"alpha_in", format_double(c.alpha_in)},
        {"n", c.n ? format_double(*c.n) : ""},
        {"root", std::to_string(c.root)},
        {"kind", c.kind == SweepKind::Occupation ? "occupation" : "detuning"},
        {"gck_list", join(c.gck_list)},
        {"n_min", format_double(c.n_min)},
        {"n_max", format_double(c.n_max)},
        {"points", std::to_string(c.points)},
        {"drive_list", join(c.drive_list)},
        {"delta0_min", format_double(c.delta0_min)},
        {"delta0_max", format_double(c.delta0_max)},
        {"delta0_points", std::to_string(c.delta0_points)},
        {"t_end", format_double(c.t_end)},
        {"dt", format_double(c.dt)},
        {"perturbation", format_double(c.perturbation)},
        {"preset", c.preset},
        {"out", c.out},
        {"format", c.format == OutputFormat::Csv ? "csv" : "json"},
    };
}

inline std::string serialize_config(const RunConfig& c) {
    std::string s;
    for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
    return s;
}

/// Parses flat "key = value" text; '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    std::istringstream in(text);
    apply_config_text(base, in);
    return base;
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    apply_config_text(c, in);
}

// =============================================================================
// Tables
// =============================================================================

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, std::string>> footer;

    void add_row(std::vector<Cell> r) {
        if (r.size() != columns.size()) throw std::logic_error("Table: row width does not match header");
        rows.push_back(std::move(r));
    }
};

inline std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

/// '#'-prefixed metadata, header row, comma-separated rows, '#' footer.
inline void write_csv(const Table& t, std::ostream& os) {
    for (const auto& [k, v] : t.metadata) os << "# " << k << " = " << v << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
        os << '\n';
    }
    for (const auto& [k, v] : t.footer) os << "# " << k << " = " << v << '\n';
}

inline nlohmann::ordered_json to_json(const Table& t) {
    nlohmann::ordered_json j;
    auto meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.metadata) meta[k] = v;
    j["metadata"] = meta;
    j["columns"] = t.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
        auto row = nlohmann::ordered_json::array();
        for (const auto& c : r) {
            if (const auto* d = std::get_if<double>(&c)) {
                if (std::isfinite(*d)) row.push_back(*d); else row.push_back(format_double(*d));
            } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
                row.push_back(*i);
            } else {
                row.push_back(std::get<std::string>(c));
            }
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = rows;
    auto foot = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.footer) foot[k] = v;
    j["footer"] = foot;
    return j;
}

inline void write_json(const Table& t, std::ostream& os) { os << to_json(t).dump(2) << '\n'; }

inline void write_table(const Table& t, OutputFormat f, std::ostream& os) {
    if (f == OutputFormat::Csv) write_csv(t, os); else write_json(t, os);
}

/// Metadata block echoing the resolved configuration.
inline std::vector<std::pair<std::string, std::string>> config_metadata(const std::string& command, const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> m{{"command", command}};
    for (auto& e : config_entries(c)) m.push_back(std::move(e));
    return m;
}

}  // namespace ckstab
