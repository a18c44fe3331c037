#include "ckstab/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ckstab;
namespace fs = std::filesystem;

namespace {

std::string render(const Table& t, OutputFormat f = OutputFormat::Csv) {
    std::ostringstream os;
    write_table(t, f, os);
    return os.str();
}

std::vector<std::string> data_lines(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CKSTAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ckstab_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(Config, RoundTrip) {
    RunConfig c;
    c.delta0 = -0.7;
    c.gck = 0.2;
    c.susceptibility = Susceptibility::GammaNeglected;
    c.linearization = Linearization::ClosedForm;
    c.convention = Convention::AsPrinted;
    c.n = 0.1 + 0.2;  // not exactly representable in short form
    c.gck_list = {0.0, 0.2, 1.0 / 3.0};
    c.drive_list = {0.2, 0.28};
    c.kind = SweepKind::Detuning;
    c.out = "some/path";
    c.format = OutputFormat::Json;
    c.raw = true;
    const RunConfig back = parse_config(serialize_config(c));
    EXPECT_EQ(back, c);
    EXPECT_EQ(parse_config(serialize_config(RunConfig{})), RunConfig{});
}

TEST(Config, ParsingErrors) {
    RunConfig c;
    EXPECT_THROW(set_config_value(c, "nonsense", "1"), ConfigError);
    EXPECT_THROW(set_config_value(c, "kappa", "abc"), ConfigError);
    EXPECT_THROW(set_config_value(c, "convention", "other"), ConfigError);
    EXPECT_THROW(parse_config("kappa 0.3"), ConfigError);
    const RunConfig d = parse_config("# comment\nkappa = 0.3  # trailing\n\n gck = 0.4\n");
    EXPECT_DOUBLE_EQ(d.kappa, 0.3);
    EXPECT_DOUBLE_EQ(d.gck, 0.4);
}

TEST(Commands, SteadyZeroDrive) {
    RunConfig c;
    const auto out = cmd_steady(c);
    ASSERT_EQ(out.size(), 1u);
    ASSERT_EQ(out[0].table.rows.size(), 1u);
    EXPECT_EQ(std::get<double>(out[0].table.rows[0][1]), 0.0);
}

TEST(Commands, SteadyInsideBistableWindow) {
    RunConfig c;
    c.alpha_in = 0.3;
    EXPECT_EQ(cmd_steady(c)[0].table.rows.size(), 3u);
    c.alpha_in = 0.4;
    EXPECT_EQ(cmd_steady(c)[0].table.rows.size(), 1u);
}

TEST(Commands, HeaderEchoesConfig) {
    RunConfig c;
    c.gck = 0.2;
    c.susceptibility = Susceptibility::Full;
    const std::string csv = render(cmd_steady(c)[0].table);
    EXPECT_NE(csv.find("# gck = 0.20000000000000001"), std::string::npos);
    EXPECT_NE(csv.find("# susceptibility = full"), std::string::npos);
    EXPECT_NE(csv.find("# command = steady"), std::string::npos);
}

TEST(Commands, ClassifyExamples) {
    RunConfig c;
    auto verdict = [&] { return std::get<std::string>(cmd_classify(c)[0].table.rows.at(0).at(3)); };
    EXPECT_EQ(verdict(), "Stable");
    c.n = 0.3;
    EXPECT_EQ(verdict(), "UnstableStatic");
    c.n = 1.0;
    EXPECT_EQ(verdict(), "UnstableOscillatory");
}

TEST(Commands, SweepWritesOneTablePerCoupling) {
    RunConfig c;
    c.gck_list = {0.0, 0.2, 0.4};
    c.points = 50;
    const auto out = cmd_sweep(c);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[1].suffix, "_gck0.2");
    EXPECT_EQ(out[0].table.columns, (std::vector<std::string>{"n", "alpha_in_scaled", "verdict", "a0_margin", "rh_margin"}));
    EXPECT_EQ(out[0].table.rows.size(), 50u);
}

TEST(Commands, BranchesMarkersAtPositiveDetuning) {
    RunConfig c;
    c.delta0 = 1.0;
    const std::string csv = render(cmd_branches(c)[0].table);
    EXPECT_NE(csv.find("no B-C branch"), std::string::npos);
}

TEST(Commands, BranchesDeviationColumns) {
    RunConfig c;
    const Table t = cmd_branches(c)[0].table;
    int eq7 = 0;
    for (const auto& row : t.rows) {
        if (std::get<std::string>(row[1]) == "eq7") {
            ++eq7;
            EXPECT_LT(std::abs(std::get<double>(row[4])), 0.02);
        }
        if (std::get<std::string>(row[1]) == "eq5") {
            EXPECT_LT(std::abs(std::get<double>(row[4])), 0.1);
        }
    }
    EXPECT_EQ(eq7, 2);
}

TEST(Commands, SimulateFooter) {
    RunConfig c;
    c.alpha_in = 0.2;
    c.t_end = 20.0;
    const Table t = cmd_simulate(c)[0].table;
    EXPECT_EQ(t.columns.front(), "t");
    EXPECT_EQ(t.footer.front().first, "verdict");
    ASSERT_FALSE(t.rows.empty());
    c.alpha_in = 0.0;
    c.t_end = 20.0;
    const Table z = cmd_simulate(c)[0].table;
    EXPECT_LT(std::get<double>(z.rows.back()[5]), std::get<double>(z.rows.front()[5]));
}

TEST(Commands, PresetsAreKnown) {
    for (const auto& id : figure_ids()) {
        RunConfig c;
        EXPECT_NO_THROW(apply_preset(c, id));
        EXPECT_EQ(c.preset, id);
    }
    RunConfig c;
    EXPECT_THROW(apply_preset(c, "fig9"), ConfigError);
}

TEST(Output, DeterministicCsv) {
    RunConfig c;
    c.gck_list = {0.2};
    c.points = 200;
    const std::string a = render(cmd_sweep(c)[0].table);
    const std::string b = render(cmd_sweep(c)[0].table);
    EXPECT_EQ(a, b);
    EXPECT_GT(data_lines(a).size(), 200u);
}

TEST(Output, JsonIsWellFormed) {
    RunConfig c;
    c.alpha_in = 0.3;
    const auto j = nlohmann::json::parse(render(cmd_steady(c)[0].table, OutputFormat::Json));
    EXPECT_EQ(j["rows"].size(), 3u);
    EXPECT_EQ(j["metadata"]["command"], "steady");
}

TEST(Output, FilesPerSuffix) {
    const fs::path d = scratch("files");
    RunConfig c;
    apply_preset(c, "fig3");
    c.points = 20;
    c.out = (d / "fig3").string();
    std::ostringstream sink;
    const auto written = write_outputs(c, cmd_figure(c), sink);
    ASSERT_EQ(written.size(), 4u);
    EXPECT_TRUE(fs::exists(d / "fig3_gck0.csv"));
    EXPECT_TRUE(fs::exists(d / "fig3_gck0.2.csv"));
    EXPECT_TRUE(fs::exists(d / "fig3_gck0.4.csv"));
    EXPECT_TRUE(fs::exists(d / "fig3_summary.csv"));
}

TEST(Binary, ExitCodes) {
    EXPECT_EQ(run_cli("steady --alpha-in 0"), 0);
    EXPECT_NE(run_cli("steady --alpha-in -1"), 0);
    EXPECT_NE(run_cli("steady --convention other"), 0);
    EXPECT_NE(run_cli("figure --id fig9"), 0);
    EXPECT_NE(run_cli("bogus"), 0);
    EXPECT_NE(run_cli("steady --config /nonexistent/file.cfg"), 0);
    EXPECT_NE(run_cli("steady --raw --alpha-in 30000"), 0);
    EXPECT_EQ(run_cli("steady --raw --g0 1e-5 --alpha-in 30000"), 0);
}

TEST(Binary, FlagsOverrideConfigFile) {
    const fs::path d = scratch("precedence");
    {
        std::ofstream cfg(d / "run.cfg");
        cfg << "alpha_in = 0.3\ngck = 0.4\n";
    }
    const fs::path out = d / "steady.csv";
    ASSERT_EQ(run_cli("steady --config " + (d / "run.cfg").string() + " --gck 0.2 --out " + out.string()), 0);
    const std::string csv = slurp(out);
    EXPECT_NE(csv.find("# gck = 0.20000000000000001"), std::string::npos);
    EXPECT_NE(csv.find("# alpha_in = 0.29999999999999999"), std::string::npos);
}

TEST(Binary, ByteIdenticalRuns) {
    const fs::path d = scratch("bytes");
    ASSERT_EQ(run_cli("figure --id fig2 --out " + (d / "a").string()), 0);
    ASSERT_EQ(run_cli("figure --id fig2 --out " + (d / "b").string()), 0);
    const std::string a = slurp(d / "a_gck0.csv"), b = slurp(d / "b_gck0.csv");
    EXPECT_FALSE(a.empty());
    // The echoed output path differs; everything else must match.
    auto strip = [](std::string s) {
        const auto p = s.find("# out = ");
        const auto e = s.find('\n', p);
        return s.erase(p, e - p);
    };
    EXPECT_EQ(strip(a), strip(b));
}
