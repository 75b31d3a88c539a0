#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vch/estimators.hpp"
#include "vch/histories.hpp"
#include "vch/report.hpp"
#include "vch/vchloop.hpp"

namespace vch::shell {

// Everything a command needs, assembled from the TOML config plus CLI
// overrides. Exactly the blocks a command requires must be present; the rest
// stay at their defaults.
struct RunConfig {
    ModelSpec model;
    AnsatzSpec ansatz;
    bool has_ansatz = false;
    CostMode which = CostMode::full;
    ShotPlan plan;

    std::vector<GridAxis> grid;  // exclusive with sphere_mesh
    bool sphere_mesh = false;
    int mesh_subdivisions = 2;

    OptimizerConfig optimizer;
    ReadoutConfig readout;

    HistoryLabel element_a;
    HistoryLabel element_b;
    ElementPart element_part = ElementPart::real_part;

    std::string out_path;
};

// Parse and validate a config file. Unknown keys and malformed blocks are
// rejected (config errors carry toml::ParseError).
RunConfig load_config(const std::string& path);

// Individual commands; each returns a process exit code. Streams receive the
// human-readable lines the command prints.
int cmd_landscape(const RunConfig& cfg);
int cmd_optimize(const RunConfig& cfg);
int cmd_probabilities(const RunConfig& cfg);
int cmd_element(const RunConfig& cfg, std::ostream& echo);
int cmd_verify(std::ostream& echo);

// Full CLI entry point: subcommand dispatch, config loading, --seed/--shots/
// --workers/--out overrides, exception-to-exit-code mapping (0 ok,
// 1 verification failure, 2 config error, 3 numerical failure).
int run_cli(int argc, const char* const* argv);

// 17-significant-digit float formatting shared by every serializer.
std::string format_number(double v);

}  // namespace vch::shell
