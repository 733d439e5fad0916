#include "penflow/common.hpp"
#include "penflow/io.hpp"

#include <CLI11.hpp>

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef PENFLOW_VERSION
#define PENFLOW_VERSION "0.0.0-dev"
#endif
#ifndef PENFLOW_DATA_DIR
#define PENFLOW_DATA_DIR "data"
#endif

namespace penflow {

namespace {

namespace fs = std::filesystem;

std::string mesh_root() {
    if (const char* env = std::getenv("PENFLOW_DATA"))
        return std::string(env) + "/meshes/";
    return std::string(PENFLOW_DATA_DIR) + "/meshes/";
}

std::string slurp_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IOError("write failed for '" + path + "'");
}

// Shortest round-trip decimals, matching the CSV writer.
std::string fmt(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string snapshot_path(const std::string& dir, long step) {
    char name[32];
    std::snprintf(name, sizeof(name), "fields_%06ld.vtk", step);
    return dir + "/" + name;
}

// Ensemble-mean pressure for field snapshots.
CoefficientVector mean_pressure(const FunctionSpace& space, const EnsembleState& state) {
    CoefficientVector p = zero_pressure(space);
    for (const Member& m : state.members)
        for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] += m.p.values[i];
    const double inv = 1.0 / static_cast<double>(state.members.size());
    for (double& v : p.values) v *= inv;
    return p;
}

void prepare_out_dir(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    write_text(config.out_dir + "/config.resolved", resolved_config_text(config, mesh_root()));
    write_text(config.out_dir + "/version.txt", std::string("penflow ") + PENFLOW_VERSION + "\n");
}

// Builds the same space as the run (dof construction is deterministic) so
// snapshots can be written from the step observer.
struct SnapshotWriter {
    FunctionSpace space;
    std::string dir;
    int every = 0;
    long count = 0;

    SnapshotWriter(const std::string& mesh_path, std::string out_dir, int every_n)
        : space(build_taylor_hood(read_msh_file(mesh_path))), dir(std::move(out_dir)),
          every(every_n) {}

    void operator()(const EnsembleState& state, const StepInfo&) {
        ++count;
        if (every > 0 && count % every == 0)
            write_vtk(space, state.mean, mean_pressure(space, state),
                      snapshot_path(dir, count));
    }
};

int run_converge(const RunConfig& config) {
    const ConvergenceConfig cc = config.to_convergence();
    const ConvergenceResult res = run_convergence(cc);

    std::ostringstream csv;
    csv << "g,h,dt,epsilon,member,max_l2,grad_l2,final_l2,rate_l2,rate_grad\n";
    const std::size_t members = res.levels.empty() ? 0 : res.levels[0].max_l2_error.size();
    for (std::size_t k = 0; k < res.levels.size(); ++k) {
        const ConvergenceLevel& lvl = res.levels[k];
        for (std::size_t j = 0; j < members; ++j) {
            csv << lvl.g << ',' << fmt(lvl.h) << ',' << fmt(lvl.dt) << ',' << fmt(lvl.epsilon)
                << ',' << (j + 1) << ',' << fmt(lvl.max_l2_error[j]) << ','
                << fmt(lvl.grad_error[j]) << ',' << fmt(lvl.final_l2_error[j]) << ',';
            if (k > 0) csv << fmt(res.l2_rates[k - 1][j]);
            csv << ',';
            if (k > 0) csv << fmt(res.grad_rates[k - 1][j]);
            csv << '\n';
        }
    }
    write_text(config.out_dir + "/convergence.csv", csv.str());

    std::cout << "convergence over " << res.levels.size() << " levels ("
              << members << " members)\n";
    for (std::size_t k = 0; k < res.levels.size(); ++k) {
        const ConvergenceLevel& lvl = res.levels[k];
        std::cout << "  g=" << lvl.g << " dt=" << fmt(lvl.dt) << " member-1 max_l2="
                  << fmt(lvl.max_l2_error[0]) << " grad=" << fmt(lvl.grad_error[0]);
        if (k > 0)
            std::cout << " rate_l2=" << fmt(res.l2_rates[k - 1][0]) << " rate_grad="
                      << fmt(res.grad_rates[k - 1][0]);
        if (lvl.ledger_violations > 0)
            std::cout << " ledger_violations=" << lvl.ledger_violations;
        std::cout << '\n';
    }
    return 0;
}

int run_rotors_cmd(RunConfig config) {
    RotorsConfig rc = config.to_rotors(mesh_root());
    std::optional<SnapshotWriter> snaps;
    if (config.vtk_every > 0) {
        snaps.emplace(rc.mesh_path, config.out_dir, config.vtk_every);
        rc.observer = [&snaps](const EnsembleState& s, const StepInfo& i) { (*snaps)(s, i); };
    }
    const RotorsResult res = run_rotors(rc);
    write_stats_csv(res.records, config.out_dir + "/stats.csv");

    std::ostringstream dev;
    dev << "t,dev_about_control,dev_about_mean\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
        dev << fmt(res.times[i]) << ',' << fmt(res.dev_about_control[i]) << ','
            << fmt(res.dev_about_mean[i]) << '\n';
    write_text(config.out_dir + "/deviations.csv", dev.str());

    if (snaps)
        write_vtk(snaps->space, res.ensemble_state.mean,
                  mean_pressure(snaps->space, res.ensemble_state),
                  config.out_dir + "/fields_final.vtk");

    std::cout << "rotors: " << res.times.size() << " steps to t=" << fmt(res.ensemble_state.t)
              << ", final spread=" << fmt(res.records.empty() ? 0.0 : res.records.back().spread)
              << ", ledger checks=" << res.ensemble_ledger.checks
              << " violations=" << res.ensemble_ledger.violations << '\n';
    return res.ensemble_ledger.violations == 0 && res.control_ledger.violations == 0 ? 0 : 1;
}

int run_cylinder_cmd(RunConfig config) {
    CylinderConfig cc = config.to_cylinder(mesh_root());
    std::optional<SnapshotWriter> snaps;
    if (config.vtk_every > 0) {
        snaps.emplace(cc.mesh_path, config.out_dir, config.vtk_every);
        cc.observer = [&snaps](const EnsembleState& s, const StepInfo& i) { (*snaps)(s, i); };
    }
    const CylinderResult res = run_cylinder(cc);
    write_stats_csv(res.records, config.out_dir + "/stats.csv");

    std::ostringstream dev;
    dev << "t";
    for (int j = 1; j <= cc.members; ++j) dev << ",member_" << j;
    dev << '\n';
    for (std::size_t i = 0; i < res.times.size(); ++i) {
        dev << fmt(res.times[i]);
        for (const double d : res.rel_deviation[i]) dev << ',' << fmt(d);
        dev << '\n';
    }
    write_text(config.out_dir + "/deviations.csv", dev.str());

    if (snaps)
        write_vtk(snaps->space, res.state.mean, mean_pressure(snaps->space, res.state),
                  config.out_dir + "/fields_final.vtk");

    std::cout << "cylinder: omega=" << fmt(cc.omega) << " members=" << cc.members << " t="
              << fmt(res.state.t) << " final normalized std=" << fmt(res.final_normalized_std)
              << '\n';
    return 0;
}

int run_montecarlo_cmd(const RunConfig& config) {
    const MonteCarloConfig mc = config.to_montecarlo();
    const MonteCarloResult res = run_montecarlo(mc);

    std::ostringstream csv;
    csv << "members,mean_sq_error,reduction_vs_prev\n";
    double prev = 0.0;
    bool first = true;
    for (const auto& [members, msq] : res.mean_sq_error) {
        csv << members << ',' << fmt(msq) << ',';
        if (!first) csv << fmt(prev / msq);
        csv << '\n';
        prev = msq;
        first = false;
    }
    write_text(config.out_dir + "/montecarlo.csv", csv.str());

    std::cout << "montecarlo:";
    for (const auto& [members, msq] : res.mean_sq_error)
        std::cout << "  J=" << members << " E|err|^2=" << fmt(msq);
    std::cout << '\n';
    return 0;
}

struct CliFlags {
    std::string config_path;
    std::string out_dir;
    unsigned long long seed = 0;
    bool full = false;
    int vtk_every = 0;
    int levels = 0;
    double omega = 0.0;
    int members = 0;
};

void add_common_flags(CLI::App* sub, CliFlags& flags) {
    sub->add_option("--config", flags.config_path, "flat key = value configuration file");
    sub->add_option("--out", flags.out_dir, "output directory (default: out)");
    sub->add_option("--seed", flags.seed, "random seed override");
    sub->add_flag("--full", flags.full, "full-scale study parameters");
    sub->add_option("--vtk-every", flags.vtk_every,
                    "write field snapshots every N accepted steps (0 = off)")
        ->check(CLI::NonNegativeNumber);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"penalty-based ensemble flow solver"};
    app.set_version_flag("--version", std::string("penflow ") + PENFLOW_VERSION);
    app.require_subcommand(1);

    CliFlags flags;
    CLI::App* converge = app.add_subcommand("converge", "manufactured-solution accuracy study");
    add_common_flags(converge, flags);
    converge->add_option("--levels", flags.levels, "number of grid levels")
        ->check(CLI::Range(2, 16));

    CLI::App* rotors = app.add_subcommand("rotors", "two pulsing rotors in a disk");
    add_common_flags(rotors, flags);

    CLI::App* cylinder = app.add_subcommand("cylinder", "channel flow past a cylinder");
    add_common_flags(cylinder, flags);
    cylinder->add_option("--omega", flags.omega, "rotation rate")
        ->check(CLI::NonNegativeNumber);
    cylinder->add_option("--members", flags.members, "ensemble size")
        ->check(CLI::PositiveNumber);

    CLI::App* montecarlo = app.add_subcommand("montecarlo", "statistical-error study");
    add_common_flags(montecarlo, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const Scenario scenario = scenario_from_name(sub->get_name());

    try {
        RunConfig config;
        if (!flags.config_path.empty())
            config = parse_config(slurp_config(flags.config_path), scenario);
        else
            config.scenario = scenario;

        // Command-line flags override the file. Scenario-specific flags only
        // exist on their own subcommand, so probe before counting.
        const auto given = [sub](const std::string& name) {
            const CLI::Option* opt = sub->get_option_no_throw(name);
            return opt != nullptr && opt->count() > 0;
        };
        if (given("--out")) config.out_dir = flags.out_dir;
        if (given("--seed")) config.seed = flags.seed;
        if (given("--full")) config.full_scale = true;
        if (given("--vtk-every")) config.vtk_every = flags.vtk_every;
        if (given("--levels")) config.levels = flags.levels;
        if (given("--omega")) config.omega = flags.omega;
        if (given("--members")) config.members = flags.members;

        prepare_out_dir(config);
        switch (scenario) {
            case Scenario::converge: return run_converge(config);
            case Scenario::rotors: return run_rotors_cmd(config);
            case Scenario::cylinder: return run_cylinder_cmd(config);
            case Scenario::montecarlo: return run_montecarlo_cmd(config);
        }
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace penflow
