#pragma once
// ============================================================================
// io.hpp - run configuration, statistics CSV, and VTK field export
//
// The run configuration is a flat `key = value` text (one pair per line,
// `#` starts a comment). Every key must be recognized and every value must
// parse — unknown keys and bad values are hard errors naming the key and
// line. A RunConfig materializes into the per-study config structs, applying
// scenario defaults for everything the text leaves unset.
// ============================================================================

#include "penflow/experiments.hpp"
#include "penflow/statistics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace penflow {

enum class Scenario { converge, rotors, cylinder, montecarlo };

// Throws ConfigError for anything but the four scenario names.
Scenario scenario_from_name(const std::string& name);
std::string scenario_name(Scenario s);

// Parsed, validated run configuration. Fields left unset by the text take
// scenario defaults when materialized (see the to_*() calls); `epsilon`
// additionally understands the value `dt`, the convention that binds the
// penalty parameter to the resolved timestep.
struct RunConfig {
    Scenario scenario = Scenario::converge;

    // Scheme parameters (shared vocabulary across scenarios).
    std::optional<double> nu;
    std::optional<double> dt;
    std::optional<double> epsilon;  // unset = bound to the resolved dt
    std::optional<double> T;
    std::optional<double> cfl_constant;
    std::optional<double> omega;
    std::optional<double> dt_min;
    std::optional<bool> allow_doubling;
    std::optional<bool> monitor;

    // Problem geometry: either a mesh file or a unit-square generator level.
    std::optional<std::string> mesh;
    std::optional<int> g;

    std::optional<int> members;
    std::optional<unsigned long long> seed;
    std::optional<int> levels;  // convergence depth override

    std::string out_dir = "out";
    int vtk_every = 0;  // write fields every N accepted steps (0 = off)
    bool full_scale = false;

    // Materialize per-study configs, applying defaults and validating.
    // mesh_root prefixes the bundled default meshes (rotors/cylinder).
    ConvergenceConfig to_convergence() const;
    RotorsConfig to_rotors(const std::string& mesh_root) const;
    CylinderConfig to_cylinder(const std::string& mesh_root) const;
    MonteCarloConfig to_montecarlo() const;
};

// Parses the flat key=value text. `default_scenario` supplies the scenario
// when the text has no `scenario` key (the CLI passes its subcommand); a
// conflicting explicit key is an error, as are unknown keys, unparsable
// values, and out-of-range values (each named with its line number).
RunConfig parse_config(const std::string& text,
                       std::optional<Scenario> default_scenario = std::nullopt);

// The fully resolved configuration as config-grammar text: every value the
// run will actually use, defaults materialized (mesh_root resolves the
// bundled default meshes). Parsing it back yields an equivalent run —
// re-running from the echo reproduces outputs bit-exactly. Written alongside
// outputs by the CLI.
std::string resolved_config_text(const RunConfig& config, const std::string& mesh_root);

// --------------------------------------------------------------------------
// Statistics CSV
// --------------------------------------------------------------------------

// Header (bit-exact):
//   t,member,kinetic_energy,enstrophy,angular_momentum,div_l2,visc_dissip,
//   be_dissip,penalty_dissip,spread,std_dev
// One row per record; ensemble-mean rows carry the member label MEAN.
// Floats are shortest-round-trip decimals, so read_stats_csv reproduces the
// records bit for bit. I/O failures throw IOError naming the path.
void write_stats_csv(const std::vector<StatRecord>& records, const std::string& path);
std::vector<StatRecord> read_stats_csv(const std::string& path);

// --------------------------------------------------------------------------
// VTK field export
// --------------------------------------------------------------------------

// Legacy ASCII VTK UNSTRUCTURED_GRID: every scalar node is a point (z = 0),
// every triangle a 6-node quadratic cell (type 22, corner/midside order of
// cell_nodes). POINT_DATA carries VECTORS velocity (z = 0) and SCALARS
// pressure, the linear pressure evaluated at all velocity nodes (midside
// value = mean of the edge endpoints).
void write_vtk(const FunctionSpace& space, const CoefficientVector& u,
               const CoefficientVector& p, const std::string& path);

// --------------------------------------------------------------------------
// CLI
// --------------------------------------------------------------------------

// penflow <converge|rotors|cylinder|montecarlo> [--config PATH] [--out DIR]
//         [--seed N] [--full] [--vtk-every N] [--levels N] [--omega W]
//         [--members J]
// Writes scenario outputs (CSV tables, optional VTK snapshots), the resolved
// config, and a version stamp into the output directory. Returns 0 on
// success, 2 for configuration errors, 1 for runtime failures.
int cli_main(int argc, const char* const* argv);

}  // namespace penflow
