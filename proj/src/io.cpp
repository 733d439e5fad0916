#include "penflow/io.hpp"

#include "penflow/common.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string_view>
#include <vector>

namespace penflow {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Shortest decimal that parses back to exactly the same double.
std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_double_or_throw(std::string_view text, const std::string& key, int line) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("invalid number for key '" + key + "' (line " + std::to_string(line) +
                          "): '" + std::string(text) + "'");
    return v;
}

long long parse_int_or_throw(std::string_view text, const std::string& key, int line) {
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("invalid integer for key '" + key + "' (line " + std::to_string(line) +
                          "): '" + std::string(text) + "'");
    return v;
}

unsigned long long parse_ull_or_throw(std::string_view text, const std::string& key, int line) {
    unsigned long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("invalid unsigned integer for key '" + key + "' (line " +
                          std::to_string(line) + "): '" + std::string(text) + "'");
    return v;
}

bool parse_bool_or_throw(std::string_view text, const std::string& key, int line) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError("invalid boolean for key '" + key + "' (line " + std::to_string(line) +
                      "): '" + std::string(text) + "' (use true or false)");
}

void require_positive(double v, const std::string& key, int line) {
    if (!(v > 0.0))
        throw ConfigError("key '" + key + "' must be positive (line " + std::to_string(line) +
                          "): " + format_double(v));
}

[[noreturn]] void inapplicable(const std::string& key, Scenario s, int line) {
    throw ConfigError("key '" + key + "' does not apply to scenario '" + scenario_name(s) +
                      "' (line " + std::to_string(line) + ")");
}

struct RawEntry {
    std::string value;
    int line = 0;
};

}  // namespace

Scenario scenario_from_name(const std::string& name) {
    if (name == "converge") return Scenario::converge;
    if (name == "rotors") return Scenario::rotors;
    if (name == "cylinder") return Scenario::cylinder;
    if (name == "montecarlo") return Scenario::montecarlo;
    throw ConfigError("unknown scenario '" + name +
                      "' (expected converge, rotors, cylinder, or montecarlo)");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::converge: return "converge";
        case Scenario::rotors: return "rotors";
        case Scenario::cylinder: return "cylinder";
        case Scenario::montecarlo: return "montecarlo";
    }
    throw ConfigError("invalid scenario value");
}

RunConfig parse_config(const std::string& text, std::optional<Scenario> default_scenario) {
    // Pass 1: collect key/value pairs with their line numbers.
    std::map<std::string, RawEntry> entries;
    std::istringstream in(text);
    std::string raw_line;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        std::string_view line = raw_line;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("expected 'key = value' (line " + std::to_string(line_no) + "): '" +
                              std::string(line) + "'");
        const std::string key{trim(line.substr(0, eq))};
        const std::string value{trim(line.substr(eq + 1))};
        if (key.empty())
            throw ConfigError("empty key (line " + std::to_string(line_no) + ")");
        if (value.empty())
            throw ConfigError("empty value for key '" + key + "' (line " +
                              std::to_string(line_no) + ")");
        if (entries.count(key))
            throw ConfigError("duplicate key '" + key + "' (line " + std::to_string(line_no) +
                              "; first set on line " + std::to_string(entries[key].line) + ")");
        entries[key] = RawEntry{value, line_no};
    }

    // Pass 2: resolve the scenario, then type and range-check every key
    // against it.
    RunConfig config;
    if (const auto it = entries.find("scenario"); it != entries.end()) {
        Scenario parsed;
        try {
            parsed = scenario_from_name(it->second.value);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (line " +
                              std::to_string(it->second.line) + ")");
        }
        if (default_scenario && *default_scenario != parsed)
            throw ConfigError("config sets scenario '" + scenario_name(parsed) +
                              "' but the command requested '" + scenario_name(*default_scenario) +
                              "' (line " + std::to_string(it->second.line) + ")");
        config.scenario = parsed;
        entries.erase(it);
    } else if (default_scenario) {
        config.scenario = *default_scenario;
    } else {
        throw ConfigError("missing required key 'scenario'");
    }
    const Scenario s = config.scenario;
    const bool flow_scenario = s == Scenario::rotors || s == Scenario::cylinder;

    for (const auto& [key, entry] : entries) {
        const std::string& value = entry.value;
        const int line = entry.line;
        if (key == "nu") {
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.nu = v;
        } else if (key == "dt") {
            if (s == Scenario::converge) inapplicable(key, s, line);  // dt follows the mesh law
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.dt = v;
        } else if (key == "epsilon") {
            if (value == "dt") continue;  // the default convention: ε bound to dt
            if (!flow_scenario) inapplicable(key, s, line);
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.epsilon = v;
        } else if (key == "T") {
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.T = v;
        } else if (key == "cfl_constant") {
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.cfl_constant = v;
        } else if (key == "omega") {
            if (s != Scenario::cylinder) inapplicable(key, s, line);
            const double v = parse_double_or_throw(value, key, line);
            if (v < 0.0)
                throw ConfigError("key 'omega' must be nonnegative (line " +
                                  std::to_string(line) + ")");
            config.omega = v;
        } else if (key == "dt_min") {
            const double v = parse_double_or_throw(value, key, line);
            require_positive(v, key, line);
            config.dt_min = v;
        } else if (key == "allow_doubling") {
            if (!flow_scenario) inapplicable(key, s, line);
            config.allow_doubling = parse_bool_or_throw(value, key, line);
        } else if (key == "monitor") {
            config.monitor = parse_bool_or_throw(value, key, line);
        } else if (key == "mesh") {
            if (!flow_scenario) inapplicable(key, s, line);
            config.mesh = value;
        } else if (key == "g") {
            if (flow_scenario) inapplicable(key, s, line);
            const long long v = parse_int_or_throw(value, key, line);
            if (v < 1)
                throw ConfigError("key 'g' must be at least 1 (line " + std::to_string(line) +
                                  ")");
            config.g = static_cast<int>(v);
        } else if (key == "members") {
            if (s != Scenario::cylinder) inapplicable(key, s, line);
            const long long v = parse_int_or_throw(value, key, line);
            if (v < 1)
                throw ConfigError("key 'members' must be at least 1 (line " +
                                  std::to_string(line) + ")");
            config.members = static_cast<int>(v);
        } else if (key == "seed") {
            if (s != Scenario::cylinder && s != Scenario::montecarlo)
                inapplicable(key, s, line);
            config.seed = parse_ull_or_throw(value, key, line);
        } else if (key == "levels") {
            if (s != Scenario::converge) inapplicable(key, s, line);
            const long long v = parse_int_or_throw(value, key, line);
            if (v < 2)
                throw ConfigError("key 'levels' must be at least 2 (line " +
                                  std::to_string(line) + ")");
            config.levels = static_cast<int>(v);
        } else if (key == "out") {
            config.out_dir = value;
        } else if (key == "vtk_every") {
            const long long v = parse_int_or_throw(value, key, line);
            if (v < 0)
                throw ConfigError("key 'vtk_every' must be nonnegative (line " +
                                  std::to_string(line) + ")");
            config.vtk_every = static_cast<int>(v);
        } else if (key == "full") {
            config.full_scale = parse_bool_or_throw(value, key, line);
        } else {
            throw ConfigError("unknown key '" + key + "' (line " + std::to_string(line) + ")");
        }
    }
    return config;
}

ConvergenceConfig RunConfig::to_convergence() const {
    ConvergenceConfig c;
    if (levels) c.levels = *levels;
    else if (full_scale) c.levels = 5;  // the five published rows
    if (g) c.base_g = *g;
    if (nu) c.nu = *nu;
    if (T) c.T = *T;
    if (cfl_constant) c.cfl_constant = *cfl_constant;
    if (dt_min) c.dt_min = *dt_min;
    if (monitor) c.monitor = *monitor;
    return c;
}

RotorsConfig RunConfig::to_rotors(const std::string& mesh_root) const {
    RotorsConfig c;
    c.mesh_path = mesh ? *mesh
                       : mesh_root + (full_scale ? "rotors_full.msh" : "rotors_desk.msh");
    if (full_scale) c.T = 10.0;
    if (T) c.T = *T;
    if (dt) c.dt = *dt;
    c.epsilon = epsilon ? *epsilon : c.dt;
    if (nu) c.nu = *nu;
    if (cfl_constant) c.cfl_constant = *cfl_constant;
    if (dt_min) c.dt_min = *dt_min;
    if (allow_doubling) c.allow_doubling = *allow_doubling;
    if (monitor) c.monitor = *monitor;
    return c;
}

CylinderConfig RunConfig::to_cylinder(const std::string& mesh_root) const {
    CylinderConfig c;
    c.mesh_path = mesh ? *mesh
                       : mesh_root + (full_scale ? "channel_full.msh" : "channel_desk.msh");
    if (full_scale) c.T = 10.0;
    if (T) c.T = *T;
    if (dt) c.dt = *dt;
    c.epsilon = epsilon ? *epsilon : c.dt;
    if (nu) c.nu = *nu;
    if (members) c.members = *members;
    if (omega) c.omega = *omega;
    if (seed) c.seed = *seed;
    if (cfl_constant) c.cfl_constant = *cfl_constant;
    if (dt_min) c.dt_min = *dt_min;
    if (allow_doubling) c.allow_doubling = *allow_doubling;
    if (monitor) c.monitor = *monitor;
    return c;
}

MonteCarloConfig RunConfig::to_montecarlo() const {
    MonteCarloConfig c;
    if (g) c.g = *g;
    if (T) c.T = *T;
    if (dt) c.dt = *dt;
    if (nu) c.nu = *nu;
    if (seed) c.seed = *seed;
    if (cfl_constant) c.cfl_constant = *cfl_constant;
    if (dt_min) c.dt_min = *dt_min;
    if (monitor) c.monitor = *monitor;
    return c;
}

std::string resolved_config_text(const RunConfig& config, const std::string& mesh_root) {
    std::ostringstream out;
    const auto kv = [&out](const std::string& key, const std::string& value) {
        out << key << " = " << value << '\n';
    };
    const auto kvd = [&kv](const std::string& key, double v) { kv(key, format_double(v)); };
    const auto kvb = [&kv](const std::string& key, bool v) { kv(key, v ? "true" : "false"); };

    kv("scenario", scenario_name(config.scenario));
    switch (config.scenario) {
        case Scenario::converge: {
            const ConvergenceConfig c = config.to_convergence();
            kv("levels", std::to_string(c.levels));
            kv("g", std::to_string(c.base_g));
            kvd("nu", c.nu);
            kvd("T", c.T);
            kvd("cfl_constant", c.cfl_constant);
            kvd("dt_min", c.dt_min);
            kvb("monitor", c.monitor);
            break;
        }
        case Scenario::rotors: {
            const RotorsConfig c = config.to_rotors(mesh_root);
            kv("mesh", c.mesh_path);
            kvd("nu", c.nu);
            kvd("dt", c.dt);
            kvd("epsilon", c.epsilon);
            kvd("T", c.T);
            kvd("cfl_constant", c.cfl_constant);
            kvd("dt_min", c.dt_min);
            kvb("allow_doubling", c.allow_doubling);
            kvb("monitor", c.monitor);
            break;
        }
        case Scenario::cylinder: {
            const CylinderConfig c = config.to_cylinder(mesh_root);
            kv("mesh", c.mesh_path);
            kvd("nu", c.nu);
            kvd("dt", c.dt);
            kvd("epsilon", c.epsilon);
            kvd("T", c.T);
            kv("members", std::to_string(c.members));
            kvd("omega", c.omega);
            kv("seed", std::to_string(c.seed));
            kvd("cfl_constant", c.cfl_constant);
            kvd("dt_min", c.dt_min);
            kvb("allow_doubling", c.allow_doubling);
            kvb("monitor", c.monitor);
            break;
        }
        case Scenario::montecarlo: {
            const MonteCarloConfig c = config.to_montecarlo();
            kv("g", std::to_string(c.g));
            kvd("nu", c.nu);
            kvd("dt", c.dt);
            kv("epsilon", "dt");
            kvd("T", c.T);
            kv("seed", std::to_string(c.seed));
            kvd("cfl_constant", c.cfl_constant);
            kvd("dt_min", c.dt_min);
            kvb("monitor", c.monitor);
            break;
        }
    }
    kv("out", config.out_dir);
    kv("vtk_every", std::to_string(config.vtk_every));
    kvb("full", config.full_scale);
    return out.str();
}

// ----------------------------------------------------------------------------
// Statistics CSV
// ----------------------------------------------------------------------------

namespace {
constexpr const char* kStatsHeader =
    "t,member,kinetic_energy,enstrophy,angular_momentum,div_l2,visc_dissip,"
    "be_dissip,penalty_dissip,spread,std_dev";
}

void write_stats_csv(const std::vector<StatRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("write_stats_csv: cannot open '" + path + "'");
    out << kStatsHeader << '\n';
    for (const StatRecord& r : records) {
        out << format_double(r.t) << ',';
        if (r.member == kMeanMember) out << "MEAN";
        else out << r.member;
        out << ',' << format_double(r.kinetic_energy) << ',' << format_double(r.enstrophy) << ','
            << format_double(r.angular_momentum_abs) << ',' << format_double(r.div_l2) << ','
            << format_double(r.viscous_dissipation) << ',' << format_double(r.be_dissipation)
            << ',' << format_double(r.penalty_dissipation) << ',' << format_double(r.spread)
            << ',' << format_double(r.std_dev) << '\n';
    }
    out.flush();
    if (!out) throw IOError("write_stats_csv: write failed for '" + path + "'");
}

std::vector<StatRecord> read_stats_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("read_stats_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("read_stats_csv: empty file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStatsHeader)
        throw ParseError("read_stats_csv: unexpected header in '" + path + "': '" + line + "'");

    std::vector<StatRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 11)
            throw ParseError("read_stats_csv: expected 11 fields, got " +
                             std::to_string(fields.size()) + " (line " + std::to_string(line_no) +
                             ")");
        const auto num = [&](int i) {
            try {
                return parse_double_or_throw(fields[static_cast<std::size_t>(i)],
                                             "field " + std::to_string(i), line_no);
            } catch (const ConfigError& e) {
                throw ParseError(std::string("read_stats_csv: ") + e.what(), line_no);
            }
        };
        StatRecord r;
        r.t = num(0);
        if (fields[1] == "MEAN") {
            r.member = kMeanMember;
        } else {
            try {
                r.member = static_cast<int>(parse_int_or_throw(fields[1], "member", line_no));
            } catch (const ConfigError& e) {
                throw ParseError(std::string("read_stats_csv: ") + e.what(), line_no);
            }
        }
        r.kinetic_energy = num(2);
        r.enstrophy = num(3);
        r.angular_momentum_abs = num(4);
        r.div_l2 = num(5);
        r.viscous_dissipation = num(6);
        r.be_dissipation = num(7);
        r.penalty_dissipation = num(8);
        r.spread = num(9);
        r.std_dev = num(10);
        records.push_back(r);
    }
    return records;
}

// ----------------------------------------------------------------------------
// VTK export
// ----------------------------------------------------------------------------

void write_vtk(const FunctionSpace& space, const CoefficientVector& u,
               const CoefficientVector& p, const std::string& path) {
    if (u.kind != SpaceKind::velocity ||
        u.values.size() != static_cast<std::size_t>(space.n_velocity_dofs()))
        throw DimensionError("write_vtk: velocity vector does not match the space");
    if (p.kind != SpaceKind::pressure ||
        p.values.size() != static_cast<std::size_t>(space.n_pressure_dofs()))
        throw DimensionError("write_vtk: pressure vector does not match the space");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("write_vtk: cannot open '" + path + "'");

    const int n = space.n_scalar_nodes();
    out << "# vtk DataFile Version 3.0\n"
        << "velocity and pressure fields\n"
        << "ASCII\n"
        << "DATASET UNSTRUCTURED_GRID\n"
        << "POINTS " << n << " double\n";
    for (int i = 0; i < n; ++i)
        out << format_double(space.node_coords[static_cast<std::size_t>(i)].x) << ' '
            << format_double(space.node_coords[static_cast<std::size_t>(i)].y) << " 0\n";

    const std::size_t m = space.cell_nodes.size();
    out << "CELLS " << m << ' ' << m * 7 << '\n';
    for (const auto& cell : space.cell_nodes) {
        out << 6;
        for (const int node : cell) out << ' ' << node;
        out << '\n';
    }
    out << "CELL_TYPES " << m << '\n';
    for (std::size_t t = 0; t < m; ++t) out << "22\n";

    out << "POINT_DATA " << n << '\n' << "VECTORS velocity double\n";
    for (int i = 0; i < n; ++i)
        out << format_double(u.values[static_cast<std::size_t>(2 * i)]) << ' '
            << format_double(u.values[static_cast<std::size_t>(2 * i + 1)]) << " 0\n";

    // The linear pressure sampled at every velocity node: vertex values as
    // stored, midside values the mean of the edge endpoints.
    out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (int v = 0; v < space.n_vertices; ++v)
        out << format_double(p.values[static_cast<std::size_t>(v)]) << '\n';
    for (const auto& edge : space.edges)
        out << format_double(0.5 * (p.values[static_cast<std::size_t>(edge[0])] +
                                    p.values[static_cast<std::size_t>(edge[1])]))
            << '\n';

    out.flush();
    if (!out) throw IOError("write_vtk: write failed for '" + path + "'");
}

}  // namespace penflow
