#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vch/models.hpp"
#include "vch/shell.hpp"
#include "vch/tomlmini.hpp"
#include "vch/vchloop.hpp"

using json = nlohmann::json;
using vch::CostMode;
using vch::ShotPlan;
using vch::shell::RunConfig;

namespace {

const std::filesystem::path& tmp_dir() {
    static const std::filesystem::path p = [] {
        auto d = std::filesystem::temp_directory_path() / "vch_test_shell";
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
        return d;
    }();
    return p;
}

std::string write_text(const std::string& name, const std::string& content) {
    const auto path = tmp_dir() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    return path.string();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Runs the real binary; returns its exit code with streams captured to files.
struct CliRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(const std::string& args, const std::string& token) {
    const std::string out_path = (tmp_dir() / ("stdout_" + token)).string();
    const std::string err_path = (tmp_dir() / ("stderr_" + token)).string();
    const std::string cmd =
        std::string(VCH_CLI_PATH) + " " + args + " > \"" + out_path + "\" 2> \"" + err_path + "\"";
    const int raw = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_text(out_path);
    r.err = read_text(err_path);
    return r;
}

std::string matrix_cell(double re, double im) {
    return "[" + vch::shell::format_number(re) + "," + vch::shell::format_number(im) + "]";
}

}  // namespace

TEST_CASE("number formatting survives a parse round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 2.5e17, -1.2345678901234567e-5, 0.17090857655143199}) {
        CHECK(std::stod(vch::shell::format_number(v)) == v);
        CHECK(std::stod(vch::shell::format_number(-v)) == -v);
    }
    CHECK(vch::shell::format_number(0.0) == "0");
    CHECK(vch::shell::format_number(1.0) == "1");
}

TEST_CASE("a full config file lands in every RunConfig field") {
    const std::string path = write_text("full.toml", R"(
[model]
name = "spin_field"
gamma_b_dt = 2.0
k = 2

[ansatz]
kind = "azimuth_xy"
params = [0.6, 2.6]

[cost]
mode = "both"

[shots]
shots = "exact"
seed = 77

[[grid.axis]]
start = 0.0
stop = 3.14
count = 2

[[grid.axis]]
start = 1.0
stop = 4.14
count = 2

[optimizer]
restarts = 2
max_evals = 200
accept_threshold = 1e-6
dedup_radius = 0.2
simplex_scale = 0.25

[readout]
n = 50000
eps_max = 0.05
sampled = false
rule = "poisson"

[element]
a = "00"
b = "10"
part = "imag"

[output]
path = "from_config.json"
)");
    const RunConfig cfg = vch::shell::load_config(path);
    CHECK(cfg.model.k() == 2);
    CHECK(cfg.model.s_dims == std::vector<int>{2});
    CHECK(cfg.has_ansatz);
    CHECK(cfg.ansatz.kind == vch::AnsatzKind::azimuth_xy);
    CHECK(cfg.ansatz.params == std::vector<double>{0.6, 2.6});
    CHECK(cfg.which == CostMode::both);
    CHECK(cfg.plan.shots == 0);
    CHECK(cfg.plan.seed == 77);
    REQUIRE(cfg.grid.size() == 2);
    CHECK(cfg.grid[0].start == 0.0);
    CHECK(cfg.grid[0].stop == 3.14);
    CHECK(cfg.grid[0].count == 2);
    CHECK(cfg.grid[1].start == 1.0);
    CHECK_FALSE(cfg.sphere_mesh);
    CHECK(cfg.optimizer.restarts == 2);
    CHECK(cfg.optimizer.max_evals_per_restart == 200);
    REQUIRE(cfg.optimizer.accept_threshold.has_value());
    CHECK(*cfg.optimizer.accept_threshold == 1e-6);
    CHECK(cfg.optimizer.dedup_radius == 0.2);
    CHECK(cfg.optimizer.simplex_scale == 0.25);
    CHECK(cfg.readout.n_readout == 50000);
    CHECK(cfg.readout.eps_max == 0.05);
    CHECK_FALSE(cfg.readout.sampled);
    CHECK(cfg.readout.rule == vch::RetentionRule::poisson_count);
    CHECK(cfg.readout.seed == 77);  // mirrors the shot seed
    CHECK(cfg.element_a == vch::HistoryLabel{0, 0});
    CHECK(cfg.element_b == vch::HistoryLabel{1, 0});
    CHECK(cfg.element_part == vch::ElementPart::imaginary_part);
    CHECK(cfg.out_path == "from_config.json");
}

TEST_CASE("config validation rejects malformed blocks") {
    using vch::toml::ParseError;
    const auto rejects = [](const std::string& name, const std::string& content) {
        const std::string path = write_text(name, content);
        CHECK_THROWS_AS(vch::shell::load_config(path), ParseError);
    };
    rejects("no_model.toml", "[cost]\nmode = \"full\"\n");
    rejects("top_key.toml", "[model]\nname = \"spin_field\"\n\n[extra]\nx = 1\n");
    rejects("model_key.toml", "[model]\nname = \"spin_field\"\ntheta_z = 0.5\n");
    rejects("model_name.toml", "[model]\nname = \"harmonic\"\n");
    rejects("bad_shots.toml", "[model]\nname = \"spin_field\"\n\n[shots]\nshots = \"approx\"\n");
    rejects("neg_shots.toml", "[model]\nname = \"spin_field\"\n\n[shots]\nshots = -5\n");
    rejects("mesh_and_axis.toml",
            "[model]\nname = \"spin_field\"\n\n[grid]\nmesh = \"icosphere\"\n\n[[grid.axis]]\nstart = 0.0\nstop = "
            "1.0\ncount = 2\n");
    rejects("bad_mesh.toml", "[model]\nname = \"spin_field\"\n\n[grid]\nmesh = \"cube\"\n");
    rejects("restarts.toml", "[model]\nname = \"spin_field\"\n\n[optimizer]\nrestarts = 0\n");
    rejects("evals.toml", "[model]\nname = \"spin_field\"\n\n[optimizer]\nmax_evals = 4\n");
    rejects("rule.toml", "[model]\nname = \"spin_field\"\n\n[readout]\nrule = \"bogus\"\n");
    rejects("label.toml", "[model]\nname = \"spin_field\"\n\n[element]\na = \"1x\"\nb = \"00\"\n");
    rejects("mode.toml", "[model]\nname = \"spin_field\"\n\n[cost]\nmode = \"half\"\n");
    rejects("segment.toml",
            "[model]\nname = \"custom\"\ns_dims = [2]\nrho = [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]\n\n"
            "[[model.segment]]\ndt = 1.0\n");
}

TEST_CASE("custom models reproduce the built-in spin model through both segment forms") {
    const std::string rho =
        "[[" + matrix_cell(0.5, 0.0) + "," + matrix_cell(0.5, 0.0) + "],[" + matrix_cell(0.5, 0.0) + "," +
        matrix_cell(0.5, 0.0) + "]]";
    const std::string unitary =
        "[[" + matrix_cell(1.0, 0.0) + "," + matrix_cell(0.0, 0.0) + "],[" + matrix_cell(0.0, 0.0) + "," +
        matrix_cell(std::cos(2.0), std::sin(2.0)) + "]]";
    const std::string hamiltonian =
        "[[" + matrix_cell(0.0, 0.0) + "," + matrix_cell(0.0, 0.0) + "],[" + matrix_cell(0.0, 0.0) + "," +
        matrix_cell(-2.0, 0.0) + "]]";

    const std::string via_unitary = write_text("custom_u.toml",
                                               "[model]\nname = \"custom\"\ns_dims = [2]\nrho = " + rho +
                                                   "\n\n[[model.segment]]\nunitary = " + unitary +
                                                   "\n\n[[model.segment]]\nunitary = " + unitary + "\n");
    const std::string via_hamiltonian = write_text("custom_h.toml",
                                                   "[model]\nname = \"custom\"\ns_dims = [2]\nrho = " + rho +
                                                       "\n\n[[model.segment]]\nhamiltonian = " + hamiltonian +
                                                       "\ndt = 1.0\n\n[[model.segment]]\nhamiltonian = " + hamiltonian +
                                                       "\ndt = 1.0\n");

    vch::AnsatzSpec probe;
    probe.kind = vch::AnsatzKind::azimuth_xy;
    probe.params = {0.6, 1.9};
    const double reference = vch::cost(vch::spin_field_model(), probe, CostMode::full, ShotPlan{}).c;
    const double from_unitary =
        vch::cost(vch::shell::load_config(via_unitary).model, probe, CostMode::full, ShotPlan{}).c;
    const double from_hamiltonian =
        vch::cost(vch::shell::load_config(via_hamiltonian).model, probe, CostMode::full, ShotPlan{}).c;
    CHECK(std::abs(from_unitary - reference) < 1e-12);
    CHECK(std::abs(from_hamiltonian - reference) < 1e-12);
}

TEST_CASE("the landscape command writes the scan as CSV") {
    const std::string out = (tmp_dir() / "scan.csv").string();
    const std::string path = write_text("landscape.toml", R"(
[model]
name = "spin_field"

[ansatz]
kind = "azimuth_xy"

[[grid.axis]]
start = 0.0
stop = 3.14
count = 2

[[grid.axis]]
start = 1.0
stop = 4.14
count = 2
)");
    RunConfig cfg = vch::shell::load_config(path);
    cfg.out_path = out;
    CHECK(vch::shell::cmd_landscape(cfg) == 0);

    const auto lines = split_lines(read_text(out));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "param_1,param_2,cost,cost_stderr");

    // Row one carries the first grid corner and its exact cost, 17-digit clean.
    std::istringstream row(lines[1]);
    std::string field;
    std::vector<double> fields;
    while (std::getline(row, field, ',')) fields.push_back(std::stod(field));
    REQUIRE(fields.size() == 4);
    CHECK(fields[0] == 0.0);
    CHECK(fields[1] == 1.0);
    vch::AnsatzSpec probe;
    probe.kind = vch::AnsatzKind::azimuth_xy;
    probe.params = {0.0, 1.0};
    CHECK(fields[2] == vch::cost(cfg.model, probe, CostMode::full, ShotPlan{}).c);
    CHECK(fields[3] == 0.0);
}

TEST_CASE("the element command echoes the entry with its error bar") {
    const std::string path = write_text("element.toml", R"(
[model]
name = "spin_field"

[ansatz]
kind = "azimuth_xy"
params = [0.0, 0.0]

[element]
a = "00"
b = "10"
part = "real"
)");
    const RunConfig cfg = vch::shell::load_config(path);
    std::ostringstream echo;
    CHECK(vch::shell::cmd_element(cfg, echo) == 0);

    const std::string line = echo.str();
    const std::string prefix = "D[00,10] real = ";
    REQUIRE(line.rfind(prefix, 0) == 0);
    CHECK(line.substr(line.size() - 7) == " +/- 0\n");  // exact path reports no error
    const double value = std::stod(line.substr(prefix.size()));
    CHECK(std::abs(value - -0.20670545260795131) < 1e-12);
}

TEST_CASE("the built-in verification suite passes and reports each property") {
    std::ostringstream echo;
    CHECK(vch::shell::cmd_verify(echo) == 0);
    const auto lines = split_lines(echo.str());
    REQUIRE(lines.size() == 4);
    for (const auto& line : lines) CHECK(line.rfind("PASS", 0) == 0);
}

TEST_CASE("the probabilities command emits a parseable report") {
    const std::string out = (tmp_dir() / "probs.json").string();
    const std::string path = write_text("probs.toml", R"(
[model]
name = "spin_field"

[ansatz]
kind = "azimuth_xy"
params = [0.6, 2.6]

[readout]
n = 1000000
eps_max = 0.1
)");
    RunConfig cfg = vch::shell::load_config(path);
    cfg.out_path = out;
    CHECK(vch::shell::cmd_probabilities(cfg) == 0);

    const json j = json::parse(read_text(out));
    CHECK(j["command"] == "probabilities");
    CHECK(j["shots"] == 0);
    CHECK(j["cost_mode"] == "full");
    CHECK(j["params"] == json::array({0.6, 2.6}));
    const json& report = j["report"];
    CHECK_FALSE(report["high_entropy"].get<bool>());
    CHECK(report["n_readout"] == 1000000);
    REQUIRE(!report["retained"].empty());
    CHECK(report["retained"][0]["label"].is_string());
    CHECK(report["retained"][0]["count"].is_number_integer());
    CHECK(report["cost"]["c"].get<double>() <= 1e-10);
    CHECK(report["epsilon_bound"].get<double>() <= 1e-3);
    CHECK(report["delta"].get<double>() >= 0.0);

    double total = report["remainder_probability"].get<double>();
    for (const auto& r : report["retained"]) total += r["probability"].get<double>();
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("the optimize command reports minima with nested reports") {
    const std::string out = (tmp_dir() / "opt.json").string();
    const std::string path = write_text("opt.toml", R"(
[model]
name = "spin_field"
k = 1

[ansatz]
kind = "azimuth_xy"
params = [0.3]

[optimizer]
restarts = 1
max_evals = 50
)");
    RunConfig cfg = vch::shell::load_config(path);
    cfg.out_path = out;
    CHECK(vch::shell::cmd_optimize(cfg) == 0);

    const json j = json::parse(read_text(out));
    CHECK(j["command"] == "optimize");
    CHECK(j["restarts"] == 1);
    CHECK(j["total_evaluations"].get<long long>() >= 3);
    REQUIRE(j["minima"].size() == 1);
    const json& m = j["minima"][0];
    CHECK(m["cost"]["c"].get<double>() <= 1e-8);
    CHECK_FALSE(m["budget_exhausted"].get<bool>());
    REQUIRE(m["params"].size() == 1);
    REQUIRE(!m["report"]["retained"].empty());
    CHECK(m["report"]["epsilon_bound"].get<double>() <= 1e-3);
}

TEST_CASE("the binary maps failures to documented exit codes") {
    // Config errors: exit 2 with a diagnostic on stderr.
    const std::string broken = write_text("broken.toml", "[model]\nname = \"spin_field\"\nbogus = 1\n");
    const CliRun bad_cfg = run_cli("landscape --config \"" + broken + "\"", "badcfg");
    CHECK(bad_cfg.exit_code == 2);
    CHECK(!bad_cfg.err.empty());

    // A missing required option and an unknown subcommand are CLI errors.
    CHECK(run_cli("landscape", "nocfg").exit_code == 2);
    CHECK(run_cli("transmogrify", "nosub").exit_code == 2);
    CHECK(run_cli("--help", "help").exit_code == 0);

    // Numerical failures: exit 3. The half-identity segment loses state norm.
    const std::string lossy = write_text(
        "lossy.toml",
        "[model]\nname = \"custom\"\ns_dims = [2]\nrho = [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]\n\n"
        "[[model.segment]]\nunitary = [[[0.5,0.0],[0.0,0.0]],[[0.0,0.0],[0.5,0.0]]]\n\n"
        "[ansatz]\nkind = \"azimuth_xy\"\nparams = [0.4]\n\n"
        "[output]\npath = \"" +
            (tmp_dir() / "lossy.json").string() + "\"\n");
    const CliRun lost = run_cli("probabilities --config \"" + lossy + "\"", "lossy");
    CHECK(lost.exit_code == 3);
    CHECK(!lost.err.empty());
}

TEST_CASE("the element subcommand is byte-deterministic end to end") {
    const std::string out_json = (tmp_dir() / "element_cli.json").string();
    const std::string path = write_text("element_cli.toml", R"(
[model]
name = "spin_field"

[ansatz]
kind = "azimuth_xy"
params = [0.0, 0.0]

[shots]
shots = 4096
seed = 5

[element]
a = "00"
b = "10"
part = "real"
)");
    const std::string args = "element --config \"" + path + "\" --out \"" + out_json + "\"";
    const CliRun first = run_cli(args, "el1");
    const std::string first_json = read_text(out_json);
    const CliRun second = run_cli(args, "el2");
    const std::string second_json = read_text(out_json);

    CHECK(first.exit_code == 0);
    CHECK(second.exit_code == 0);
    CHECK(first.out == second.out);
    CHECK(first_json == second_json);
    CHECK(first.out.rfind("D[00,10] real = ", 0) == 0);

    const json j = json::parse(first_json);
    CHECK(j["command"] == "element");
    CHECK(j["a"] == "00");
    CHECK(j["b"] == "10");
    CHECK(j["part"] == "real");
    CHECK(j["shots"] == 4096);
    // The sampled estimate sits near the exact entry with a real error bar.
    CHECK(j["stderr"].get<double>() > 0.0);
    CHECK(std::abs(j["value"].get<double>() - -0.20670545260795131) <= 5.0 * j["stderr"].get<double>());

    // A different seed draws different shots.
    const CliRun other = run_cli(args + " --seed 6", "el3");
    CHECK(other.exit_code == 0);
    CHECK(other.out != first.out);

    // Forcing the exact path removes the error bar.
    const CliRun exact = run_cli(args + " --shots exact", "el4");
    CHECK(exact.exit_code == 0);
    const json je = json::parse(read_text(out_json));
    CHECK(je["stderr"] == 0.0);
    CHECK(std::abs(je["value"].get<double>() - -0.20670545260795131) < 1e-12);
}
