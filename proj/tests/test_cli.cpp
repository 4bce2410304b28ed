#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "poissonize/app.hpp"

namespace fs = std::filesystem;
using poissonize::app::run;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"poissonize"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("poissonize_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string config(const std::string& name, const json& j) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << j.dump(2);
        return p.string();
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> read_csv(const std::string& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

std::string field(const std::string& report, const std::string& key) {
    const auto pos = report.find(key + ": ");
    if (pos == std::string::npos) return {};
    const auto start = pos + key.size() + 2;
    return report.substr(start, report.find('\n', start) - start);
}

}  // namespace

TEST_F(CliTest, DiagnosePlasma) {
    const auto cfg = config("p.json", {{"system", {{"builtin", "plasma_particle"}}}});
    const Result r = cli({"diagnose", "--config", cfg, "--point", "1,0,1.5707963267948966"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(std::stod(field(r.out, "h")), 2.0, 1e-12);
    EXPECT_EQ(field(r.out, "classification"), "nonholonomic");
    EXPECT_NEAR(std::stod(field(r.out, "max_abs_h")), 2.0, 1e-12);
    EXPECT_NEAR(std::stod(field(r.out, "r_signed")), 1.0, 1e-12);
    EXPECT_EQ(field(r.out, "D"), "B");
    EXPECT_FALSE(field(r.out, "div_v").empty());
}

TEST_F(CliTest, DiagnoseRigidBody) {
    const auto cfg = config("rb.json", {{"system", {{"builtin", "rigid_body"}, {"inertia", {1, 2, 3}}}},
                                        {"point", "0.3,-0.7,1.1"}});
    const Result r = cli({"diagnose", "--config", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(std::stod(field(r.out, "h")), 0.0);
    EXPECT_EQ(field(r.out, "classification"), "hamiltonian");
    EXPECT_NE(field(r.out, "point").find("0.29999999999999999"), std::string::npos);
}

TEST_F(CliTest, DiagnoseMagneticCoordinates) {
    const auto cfg = config("m.json", {{"system", {{"builtin", "plasma_particle"}}},
                                       {"magnetic_coordinates", {{"q", "zeta"}, {"point", {0.2, 0.2, 0.2, 1.0}}}}});
    const Result r = cli({"diagnose", "--config", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(std::stod(field(r.out, "mag_r")), 2.0, 1e-14);
}

TEST_F(CliTest, BadExpressionExitsTwo) {
    const auto cfg = config("bad.json", {{"system", {{"custom", {{"wx", "1"}, {"wy", "0"}, {"wz", "0"}, {"H", "1 + * 2"}}}}}});
    const Result r = cli({"diagnose", "--config", cfg});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("SyntaxError"), std::string::npos);
    EXPECT_NE(r.err.find("4"), std::string::npos);
}

TEST_F(CliTest, InvalidInputsExitTwo) {
    EXPECT_EQ(cli({"diagnose", "--config", path("missing.json")}).code, 2);
    EXPECT_EQ(cli({"simulate"}).code, 2);
    EXPECT_EQ(cli({"bogus"}).code, 2);
    const auto unk = config("u.json", {{"system", {{"builtin", "nope"}}}});
    EXPECT_EQ(cli({"diagnose", "--config", unk}).code, 2);
    const auto open = config("o.json", {{"system", {{"builtin", "plasma_particle"}}},
                                        {"extension", {{"D", {"x", "0", "0"}}}},
                                        {"initial", {1, 1, 0.5, 0}}});
    const Result r = cli({"simulate", "--config", open, "--out", path("t.csv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(path("t.csv")));
    std::ofstream(path("broken.json")) << "{ not json";
    EXPECT_EQ(cli({"diagnose", "--config", path("broken.json")}).code, 2);
}

TEST_F(CliTest, SimulateFig1aPreset) {
    const auto cfg = config("a.json", {{"preset", "fig1a"}});
    const Result r = cli({"simulate", "--config", cfg, "--out", path("a.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::string header;
    const auto rows = read_csv(path("a.csv"), &header);
    EXPECT_EQ(header, "tau,t,x,y,z,s,H,r,h,constraint_residual");
    ASSERT_EQ(rows.size(), 10001u);
    EXPECT_EQ(rows.back()[1], 100.0);
    auto speed = [](const std::vector<double>& row) {
        const double x = row[2], y = row[3], z = row[4], c = std::cos(z), s = std::sin(z);
        // |w x x| for w = (c + s, c - s, 0)
        const double wx = c + s, wy = c - s;
        return std::hypot(wy * z, -wx * z, wx * y - wy * x);
    };
    EXPECT_LT(speed(rows.back()), 1e-3 * speed(rows.front()));
    const json side = json::parse(slurp(path("a.json")));
    EXPECT_EQ(side["status"], "completed");
    EXPECT_LT(side["H_drift"].get<double>(), 1e-8);
}

TEST_F(CliTest, SimulateFig1bPreset) {
    const auto cfg = config("b.json", {{"preset", "fig1b"}});
    const Result r = cli({"simulate", "--config", cfg, "--out", path("b.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json side = json::parse(slurp(path("b.json")));
    EXPECT_LT(side["casimir_drift"].get<double>(), 1e-8);
    EXPECT_EQ(side["D"], "w");
    const auto rows = read_csv(path("b.csv"));
    double closest = INFINITY;
    for (std::size_t i = rows.size() / 4; i < rows.size(); ++i)
        closest = std::min(closest, std::hypot(rows[i][2] - 1, rows[i][3] - 1, rows[i][4] - 1));
    EXPECT_LT(closest, 1e-2);
}

TEST_F(CliTest, SimulateFig2Preset) {
    const auto cfg = config("c.json", {{"preset", "fig2"}});
    const Result r = cli({"simulate", "--config", cfg, "--out", path("c.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::string header;
    const auto rows = read_csv(path("c.csv"), &header);
    EXPECT_EQ(header, "tau,qx,px,qy,py,H");
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& row : rows)
        if (row[0] >= 90) {
            lo = std::min(lo, row[2]);
            hi = std::max(hi, row[2]);
        }
    EXPECT_LT(hi - lo, 1e-2);
}

TEST_F(CliTest, SimulateReportsVanishingFactor) {
    const auto cfg = config("v.json", {{"system", {{"custom", {{"wx", "0"}, {"wy", "0"}, {"wz", "1"}, {"H", "y"}}}}},
                                       {"extension", {{"D", {"0", "0", "x"}}}},
                                       {"initial", {1, 0, 0, 0}},
                                       {"integrator", {{"clock", "physical"}, {"t_end", 2.0}, {"dt", 1e-3}}}});
    const Result r = cli({"simulate", "--config", cfg, "--out", path("v.csv")});
    EXPECT_EQ(r.code, 3);
    EXPECT_GT(read_csv(path("v.csv")).size(), 900u);
    const json side = json::parse(slurp(path("v.json")));
    EXPECT_EQ(side["status"], "conformal_factor_vanished");
    // Below the floor from the start: rejected before any output.
    const auto cfg0 = config("v0.json", {{"system", {{"custom", {{"wx", "0"}, {"wy", "0"}, {"wz", "1"}, {"H", "y"}}}}},
                                         {"extension", {{"D", {"0", "0", "x"}}}},
                                         {"initial", {-1, 0, 0, 0}}});
    EXPECT_EQ(cli({"simulate", "--config", cfg0, "--out", path("v0.csv")}).code, 3);
}

TEST_F(CliTest, CanonicalCheck) {
    const auto ok = config("ok.json", {{"system", {{"builtin", "plasma_particle"}}}, {"initial", {1, 1, 0.5, 0}}});
    const Result r = cli({"canonical-check", "--config", ok});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(field(r.out, "result"), "pass");
    EXPECT_LT(std::stod(field(r.out, "sup_discrepancy")), 1e-6);
    EXPECT_EQ(cli({"canonical-check", "--config", ok, "--tol", "0"}).code, 1);

    const auto out = config("out.json", {{"system", {{"builtin", "plasma_particle"}}}, {"initial", {1, 1, 1.6, 0}}});
    EXPECT_EQ(cli({"canonical-check", "--config", out}).code, 4);
    const auto rb = config("rb.json", {{"system", {{"builtin", "rigid_body"}}}, {"initial", {1, 1, 0.5, 0}}});
    EXPECT_EQ(cli({"canonical-check", "--config", rb}).code, 2);
}

TEST_F(CliTest, EquilibriumFig3Preset) {
    const auto cfg = config("e.json", {{"preset", "fig3"}});
    const Result r = cli({"equilibrium", "--config", cfg, "--out", path("g.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::string header;
    const auto rows = read_csv(path("g.csv"), &header);
    EXPECT_EQ(header, "x,y,F");
    ASSERT_EQ(rows.size(), 201u * 201u);
    std::size_t best = 0;
    for (std::size_t k = 0; k < rows.size(); ++k)
        if (rows[k][2] > rows[best][2]) best = k;
    EXPECT_NEAR(rows[best][1], std::numbers::pi / 2, 0.05);
    const json side = json::parse(slurp(path("g.json")));
    EXPECT_EQ(side["beta"], 1.0);
    EXPECT_EQ(side["delta_s"], 1.0);
    EXPECT_GT(side["Z"].get<double>(), 0.0);
    EXPECT_EQ(side["axes"]["x"][2], 201);
    EXPECT_EQ(side["axes"]["z"], 0.0);
}

TEST_F(CliTest, EquilibriumRigidBodyFlatTimesWSquared) {
    const auto cfg = config("rb.json", {{"system", {{"builtin", "rigid_body"}}},
                                        {"equilibrium", {{"beta", 0.0}, {"delta_s", 1.0},
                                                         {"axes", {{"x", {-1, 1, 21}}, {"y", {-1, 1, 21}}, {"z", 0.5}}}}}});
    ASSERT_EQ(cli({"equilibrium", "--config", cfg, "--out", path("rb.csv")}).code, 0);
    const auto rows = read_csv(path("rb.csv"));
    const double ratio0 = rows[0][2] / (rows[0][0] * rows[0][0] + rows[0][1] * rows[0][1] + 0.25);
    for (const auto& row : rows) EXPECT_NEAR(row[2] / (row[0] * row[0] + row[1] * row[1] + 0.25), ratio0, 1e-12);
}

TEST_F(CliTest, EquilibriumNegativeDensityExitsFive) {
    const auto cfg = config("n.json", {{"system", {{"custom", {{"wx", "cos(z)-sin(z)"}, {"wy", "cos(z)+sin(z)"}, {"wz", "0"}, {"H", "0"}}}}},
                                       {"extension", {{"D", {"(cos(z)-sin(z))/2", "(cos(z)+sin(z))/2", "0"}}}},
                                       {"equilibrium", {{"beta", 1.0}, {"delta_s", 1.0},
                                                        {"axes", {{"x", {0, 1, 5}}, {"y", {0, 1, 5}}, {"z", 0.0}}}}}});
    EXPECT_EQ(cli({"equilibrium", "--config", cfg, "--out", path("n.csv")}).code, 5);
}

TEST_F(CliTest, FigureCommands) {
    const Result a = cli({"figure", "fig1a", "--out", path("figs")});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_TRUE(fs::exists(path("figs/fig1a_trajectory.csv")));
    const json ma = json::parse(slurp(path("figs/fig1a_manifest.json")));
    EXPECT_EQ(ma["figure"], "fig1a");
    EXPECT_EQ(ma["files"][0]["path"], "fig1a_trajectory.csv");

    const Result c = cli({"figure", "fig3", "--out", path("figs")});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_TRUE(fs::exists(path("figs/fig3_grid.csv")));
    const json mc = json::parse(slurp(path("figs/fig3_manifest.json")));
    EXPECT_EQ(mc["kind"], "heatmap");
    EXPECT_EQ(mc["files"][0]["columns"], json({"x", "y", "F"}));

    EXPECT_EQ(cli({"figure", "fig9", "--out", path("figs")}).code, 2);
}

TEST_F(CliTest, DeterministicOutput) {
    const auto cfg = config("d.json", {{"preset", "fig1b"}});
    ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", path("d1.csv")}).code, 0);
    ASSERT_EQ(cli({"simulate", "--config", cfg, "--out", path("d2.csv")}).code, 0);
    EXPECT_EQ(slurp(path("d1.csv")), slurp(path("d2.csv")));
    const auto eq = config("e.json", {{"preset", "fig3"}, {"equilibrium", {{"axes", {{"x", {0, 6.283185307179586, 41}}, {"y", {0, 6.283185307179586, 41}}}}}}});
    setenv("POISSONIZE_THREADS", "1", 1);
    ASSERT_EQ(cli({"equilibrium", "--config", eq, "--out", path("e1.csv")}).code, 0);
    setenv("POISSONIZE_THREADS", "4", 1);
    ASSERT_EQ(cli({"equilibrium", "--config", eq, "--out", path("e2.csv")}).code, 0);
    unsetenv("POISSONIZE_THREADS");
    EXPECT_EQ(slurp(path("e1.csv")), slurp(path("e2.csv")));
}

TEST_F(CliTest, ExecutableRuns) {
    const std::string cfg = config("p.json", {{"system", {{"builtin", "plasma_particle"}}}});
    const std::string cmd = std::string("\"") + POISSONIZE_CLI + "\" diagnose --config \"" + cfg + "\" > \"" +
                            path("stdout.txt") + "\"";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(field(slurp(path("stdout.txt")), "classification"), "nonholonomic");
    const std::string bad = std::string("\"") + POISSONIZE_CLI + "\" figure nope --out \"" + path("x") + "\" 2>/dev/null";
    const int status = std::system(bad.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 2);
}
