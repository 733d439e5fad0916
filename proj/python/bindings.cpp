// ============================================================================
// Python bindings: the four studies, mesh utilities, the statistics CSV
// round-trip, the manufactured solution, and the seeded sampler. Config
// structs are read-write; result structs are read-only views.
// ============================================================================

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "penflow/experiments.hpp"
#include "penflow/io.hpp"
#include "penflow/mesh.hpp"
#include "penflow/statistics.hpp"

#include <sstream>

namespace py = pybind11;
using namespace penflow;

#ifndef PENFLOW_VERSION
#define PENFLOW_VERSION "0.0.0"
#endif

PYBIND11_MODULE(_penflow, m) {
    m.doc() = "Penalty-based ensemble solver for 2D incompressible flow";
    m.attr("__version__") = PENFLOW_VERSION;
    m.attr("MEAN_MEMBER") = kMeanMember;

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IOError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const ParseError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DimensionError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    // --- small shared types -------------------------------------------------
    py::class_<Vec2>(m, "Vec2")
        .def(py::init<double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0)
        .def_readwrite("x", &Vec2::x)
        .def_readwrite("y", &Vec2::y)
        .def("__repr__", [](const Vec2& v) {
            std::ostringstream ss;
            ss << "Vec2(" << v.x << ", " << v.y << ")";
            return ss.str();
        });

    py::class_<Mesh>(m, "Mesh")
        .def_readonly("vertices", &Mesh::vertices)
        .def_readonly("triangles", &Mesh::triangles)
        .def_readonly("tags", &Mesh::tags)
        .def_readonly("skipped_elements", &Mesh::skipped_elements)
        .def_property_readonly("n_vertices",
                               [](const Mesh& mesh) { return mesh.vertices.size(); })
        .def_property_readonly("n_triangles",
                               [](const Mesh& mesh) { return mesh.triangles.size(); })
        .def("__repr__", [](const Mesh& mesh) {
            std::ostringstream ss;
            ss << "Mesh(" << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
               << " triangles)";
            return ss.str();
        });
    m.def("generate_unit_square", &generate_unit_square, py::arg("g"),
          "Structured triangulation of the unit square with g cells per side");
    m.def("read_msh_file", &read_msh_file, py::arg("path"),
          "Read an ASCII Gmsh 2.2 mesh file");
    m.def("mesh_size", &mesh_size, py::arg("mesh"), "Longest edge length");

    py::class_<CoefficientVector>(m, "CoefficientVector")
        .def_readonly("values", &CoefficientVector::values);

    py::class_<StatRecord>(m, "StatRecord")
        .def_readonly("t", &StatRecord::t)
        .def_readonly("member", &StatRecord::member)
        .def_readonly("kinetic_energy", &StatRecord::kinetic_energy)
        .def_readonly("enstrophy", &StatRecord::enstrophy)
        .def_readonly("angular_momentum_abs", &StatRecord::angular_momentum_abs)
        .def_readonly("div_l2", &StatRecord::div_l2)
        .def_readonly("viscous_dissipation", &StatRecord::viscous_dissipation)
        .def_readonly("be_dissipation", &StatRecord::be_dissipation)
        .def_readonly("penalty_dissipation", &StatRecord::penalty_dissipation)
        .def_readonly("spread", &StatRecord::spread)
        .def_readonly("std_dev", &StatRecord::std_dev);
    m.def("write_stats_csv", &write_stats_csv, py::arg("records"), py::arg("path"));
    m.def("read_stats_csv", &read_stats_csv, py::arg("path"));

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("accepted_steps", &RunReport::accepted_steps)
        .def_readonly("rejected_steps", &RunReport::rejected_steps)
        .def_readonly("factorizations", &RunReport::factorizations)
        .def_readonly("solves", &RunReport::solves)
        .def_readonly("fluct_grad_sum", &RunReport::fluct_grad_sum)
        .def_readonly("member_grad_sum", &RunReport::member_grad_sum);

    py::class_<StabilityLedger>(m, "StabilityLedger")
        .def_readonly("checks", &StabilityLedger::checks)
        .def_readonly("violations", &StabilityLedger::violations)
        .def_readonly("max_ratio", &StabilityLedger::max_ratio);

    // --- manufactured solution and sampler ----------------------------------
    m.def("manufactured_velocity", &manufactured_velocity, py::arg("x"), py::arg("t"));
    m.def("manufactured_pressure", &manufactured_pressure, py::arg("x"), py::arg("t"));
    m.def("manufactured_force", &manufactured_force, py::arg("x"), py::arg("t"), py::arg("nu"));

    py::class_<UniformSampler>(m, "UniformSampler")
        .def(py::init<unsigned long long>(), py::arg("seed"))
        .def("next", &UniformSampler::next, "Uniform draw on [0, 1)")
        .def("next_symmetric", &UniformSampler::next_symmetric, py::arg("range"),
             "Uniform draw on [-range, range]");

    // --- convergence study ---------------------------------------------------
    py::class_<ConvergenceConfig>(m, "ConvergenceConfig")
        .def(py::init<>())
        .def_readwrite("levels", &ConvergenceConfig::levels)
        .def_readwrite("base_g", &ConvergenceConfig::base_g)
        .def_readwrite("ratio", &ConvergenceConfig::ratio)
        .def_readwrite("dt_factor", &ConvergenceConfig::dt_factor)
        .def_readwrite("dt_power", &ConvergenceConfig::dt_power)
        .def_readwrite("epsilon_factor", &ConvergenceConfig::epsilon_factor)
        .def_readwrite("T", &ConvergenceConfig::T)
        .def_readwrite("nu", &ConvergenceConfig::nu)
        .def_readwrite("deltas", &ConvergenceConfig::deltas)
        .def_readwrite("spin_up_fraction", &ConvergenceConfig::spin_up_fraction)
        .def_readwrite("monitor", &ConvergenceConfig::monitor)
        .def_readwrite("cfl_constant", &ConvergenceConfig::cfl_constant)
        .def_readwrite("dt_min", &ConvergenceConfig::dt_min)
        .def_readwrite("record_stats", &ConvergenceConfig::record_stats);
    py::class_<ConvergenceLevel>(m, "ConvergenceLevel")
        .def_readonly("g", &ConvergenceLevel::g)
        .def_readonly("h", &ConvergenceLevel::h)
        .def_readonly("dt", &ConvergenceLevel::dt)
        .def_readonly("epsilon", &ConvergenceLevel::epsilon)
        .def_readonly("g_rounded", &ConvergenceLevel::g_rounded)
        .def_readonly("max_l2_error", &ConvergenceLevel::max_l2_error)
        .def_readonly("grad_error", &ConvergenceLevel::grad_error)
        .def_readonly("final_l2_error", &ConvergenceLevel::final_l2_error)
        .def_readonly("report", &ConvergenceLevel::report)
        .def_readonly("ledger_checks", &ConvergenceLevel::ledger_checks)
        .def_readonly("ledger_violations", &ConvergenceLevel::ledger_violations)
        .def_readonly("records", &ConvergenceLevel::records);
    py::class_<ConvergenceResult>(m, "ConvergenceResult")
        .def_readonly("levels", &ConvergenceResult::levels)
        .def_readonly("l2_rates", &ConvergenceResult::l2_rates)
        .def_readonly("grad_rates", &ConvergenceResult::grad_rates);
    m.def("run_convergence", &run_convergence, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    // --- rotors study ---------------------------------------------------------
    py::class_<RotorsConfig>(m, "RotorsConfig")
        .def(py::init<>())
        .def_readwrite("mesh_path", &RotorsConfig::mesh_path)
        .def_readwrite("T", &RotorsConfig::T)
        .def_readwrite("dt", &RotorsConfig::dt)
        .def_readwrite("nu", &RotorsConfig::nu)
        .def_readwrite("epsilon", &RotorsConfig::epsilon)
        .def_readwrite("sigma1", &RotorsConfig::sigma1)
        .def_readwrite("sigma2", &RotorsConfig::sigma2)
        .def_readwrite("bc_scale", &RotorsConfig::bc_scale)
        .def_readwrite("ramp_width", &RotorsConfig::ramp_width)
        .def_readwrite("monitor", &RotorsConfig::monitor)
        .def_readwrite("cfl_constant", &RotorsConfig::cfl_constant)
        .def_readwrite("dt_min", &RotorsConfig::dt_min)
        .def_readwrite("allow_doubling", &RotorsConfig::allow_doubling)
        .def_readwrite("outer_tag", &RotorsConfig::outer_tag)
        .def_readwrite("left_tag", &RotorsConfig::left_tag)
        .def_readwrite("right_tag", &RotorsConfig::right_tag);
    py::class_<RotorsResult>(m, "RotorsResult")
        .def_readonly("records", &RotorsResult::records)
        .def_readonly("times", &RotorsResult::times)
        .def_readonly("dev_about_control", &RotorsResult::dev_about_control)
        .def_readonly("dev_about_mean", &RotorsResult::dev_about_mean)
        .def_readonly("ensemble_report", &RotorsResult::ensemble_report)
        .def_readonly("control_report", &RotorsResult::control_report)
        .def_readonly("ensemble_ledger", &RotorsResult::ensemble_ledger)
        .def_readonly("control_ledger", &RotorsResult::control_ledger);
    m.def("run_rotors", &run_rotors, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("rotors_left_amplitude", &rotors_left_amplitude, py::arg("t"), py::arg("ramp_width"));
    m.def("rotors_right_amplitude", &rotors_right_amplitude, py::arg("t"),
          py::arg("ramp_width"));

    // --- cylinder study --------------------------------------------------------
    py::class_<CylinderConfig>(m, "CylinderConfig")
        .def(py::init<>())
        .def_readwrite("mesh_path", &CylinderConfig::mesh_path)
        .def_readwrite("T", &CylinderConfig::T)
        .def_readwrite("dt", &CylinderConfig::dt)
        .def_readwrite("nu", &CylinderConfig::nu)
        .def_readwrite("epsilon", &CylinderConfig::epsilon)
        .def_readwrite("members", &CylinderConfig::members)
        .def_readwrite("omega", &CylinderConfig::omega)
        .def_readwrite("sigma_range", &CylinderConfig::sigma_range)
        .def_readwrite("seed", &CylinderConfig::seed)
        .def_readwrite("cfl_constant", &CylinderConfig::cfl_constant)
        .def_readwrite("dt_min", &CylinderConfig::dt_min)
        .def_readwrite("allow_doubling", &CylinderConfig::allow_doubling)
        .def_readwrite("monitor", &CylinderConfig::monitor)
        .def_readwrite("inlet_tag", &CylinderConfig::inlet_tag)
        .def_readwrite("wall_tag", &CylinderConfig::wall_tag)
        .def_readwrite("cylinder_tag", &CylinderConfig::cylinder_tag);
    py::class_<CylinderResult>(m, "CylinderResult")
        .def_readonly("records", &CylinderResult::records)
        .def_readonly("times", &CylinderResult::times)
        .def_readonly("rel_deviation", &CylinderResult::rel_deviation)
        .def_readonly("final_normalized_std", &CylinderResult::final_normalized_std)
        .def_readonly("sigmas", &CylinderResult::sigmas)
        .def_readonly("report", &CylinderResult::report);
    m.def("run_cylinder", &run_cylinder, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    // --- Monte Carlo study -------------------------------------------------------
    py::class_<MonteCarloConfig>(m, "MonteCarloConfig")
        .def(py::init<>())
        .def_readwrite("g", &MonteCarloConfig::g)
        .def_readwrite("T", &MonteCarloConfig::T)
        .def_readwrite("dt", &MonteCarloConfig::dt)
        .def_readwrite("nu", &MonteCarloConfig::nu)
        .def_readwrite("amplitude", &MonteCarloConfig::amplitude)
        .def_readwrite("ensemble_sizes", &MonteCarloConfig::ensemble_sizes)
        .def_readwrite("seed_groups", &MonteCarloConfig::seed_groups)
        .def_readwrite("reference_members", &MonteCarloConfig::reference_members)
        .def_readwrite("seed", &MonteCarloConfig::seed)
        .def_readwrite("monitor", &MonteCarloConfig::monitor)
        .def_readwrite("cfl_constant", &MonteCarloConfig::cfl_constant)
        .def_readwrite("dt_min", &MonteCarloConfig::dt_min);
    py::class_<MonteCarloResult>(m, "MonteCarloResult")
        .def_readonly("mean_sq_error", &MonteCarloResult::mean_sq_error)
        .def_readonly("reduction_factors", &MonteCarloResult::reduction_factors)
        .def_readonly("reference_mean", &MonteCarloResult::reference_mean);
    m.def("run_montecarlo", &run_montecarlo, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    // --- command line, embedded ------------------------------------------------
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv;
            argv.push_back("penflow");
            for (const std::string& a : args) argv.push_back(a.c_str());
            return cli_main(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Invoke the command-line driver; returns its exit code");
}
