#include "penflow/experiments.hpp"

#include "penflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace penflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

TimeVectorField zero_field() {
    return [](const Vec2&, double) { return Vec2{0.0, 0.0}; };
}

ExactField manufactured_exact(double t) {
    return ExactField{
        [t](const Vec2& x) { return manufactured_velocity(x, t); },
        [t](const Vec2& x) { return manufactured_velocity_gradient(x, t); },
    };
}

CoefficientVector scaled(CoefficientVector v, double factor) {
    for (double& value : v.values) value *= factor;
    return v;
}

StatRecord make_record(const FunctionSpace& space, double t, int member,
                       const CoefficientVector& u_new, const CoefficientVector& u_old, double nu,
                       double dt, double epsilon) {
    StatRecord rec;
    rec.t = t;
    rec.member = member;
    const FlowStats fs = flow_stats(space, u_new, nu);
    rec.kinetic_energy = fs.kinetic_energy;
    rec.enstrophy = fs.enstrophy;
    rec.angular_momentum_abs = fs.angular_momentum_abs;
    rec.div_l2 = fs.div_l2;
    rec.viscous_dissipation = fs.viscous_dissipation;
    const DissipationRates rates = numerical_dissipation(space, u_new, u_old, dt, epsilon);
    rec.be_dissipation = rates.be;
    rec.penalty_dissipation = rates.penalty;
    return rec;
}

}  // namespace

// ----------------------------------------------------------------------------
// Manufactured solution
// ----------------------------------------------------------------------------

Vec2 manufactured_velocity(const Vec2& x, double t) {
    const double et = std::exp(t);
    return {et * std::cos(x.y), et * std::sin(x.x)};
}

std::array<double, 4> manufactured_velocity_gradient(const Vec2& x, double t) {
    const double et = std::exp(t);
    return {0.0, -et * std::sin(x.y), et * std::cos(x.x), 0.0};
}

double manufactured_pressure(const Vec2& x, double t) {
    return (x.x - x.y) * (1.0 + t);
}

Vec2 manufactured_force(const Vec2& x, double t, double nu) {
    // f = u_t + (u·∇)u − νΔu + ∇p with u, p as above. Δu = −u, so the viscous
    // contribution folds into the (1+ν) factor on u_t.
    const double et = std::exp(t);
    const double e2t = et * et;
    const double f1 = (1.0 + nu) * et * std::cos(x.y) - e2t * std::sin(x.x) * std::sin(x.y)
                      + (1.0 + t);
    const double f2 = (1.0 + nu) * et * std::sin(x.x) + e2t * std::cos(x.x) * std::cos(x.y)
                      - (1.0 + t);
    return {f1, f2};
}

// ----------------------------------------------------------------------------
// Convergence study
// ----------------------------------------------------------------------------

ConvergenceResult run_convergence(const ConvergenceConfig& config) {
    if (config.levels < 2) throw DomainError("run_convergence: levels must be >= 2");
    if (config.base_g < 1) throw DomainError("run_convergence: base_g must be >= 1");
    if (config.ratio <= 1.0) throw DomainError("run_convergence: ratio must exceed 1");
    if (config.dt_factor <= 0.0) throw DomainError("run_convergence: dt_factor must be positive");
    if (config.dt_power < 1) throw DomainError("run_convergence: dt_power must be >= 1");
    if (config.epsilon_factor <= 0.0)
        throw DomainError("run_convergence: epsilon_factor must be positive");
    if (config.T <= 0.0) throw DomainError("run_convergence: T must be positive");
    if (config.nu <= 0.0) throw DomainError("run_convergence: nu must be positive");
    if (config.deltas.empty())
        throw DomainError("run_convergence: at least one member perturbation is required");
    if (config.spin_up_fraction < 0.0 || config.spin_up_fraction >= 1.0)
        throw DomainError("run_convergence: spin_up_fraction must lie in [0, 1)");

    const int members = static_cast<int>(config.deltas.size());
    ConvergenceResult result;
    result.levels.reserve(config.levels);

    for (int level = 0; level < config.levels; ++level) {
        ConvergenceLevel lvl;
        const double g_exact = config.base_g * std::pow(config.ratio, level);
        // Round-half-even so the canonical hierarchy 27·(3/2)^k lands on the
        // conventional {27, 40, 61} (40.5 -> 40, 60.75 -> 61).
        lvl.g = static_cast<int>(std::nearbyint(g_exact));
        lvl.g_rounded = std::abs(g_exact - lvl.g) > 1e-9;
        lvl.h = 1.0 / lvl.g;
        lvl.dt = config.dt_factor * std::pow(lvl.h, config.dt_power);
        lvl.epsilon = config.epsilon_factor * lvl.dt;

        const FunctionSpace space = build_taylor_hood(generate_unit_square(lvl.g));

        SchemeParams params;
        params.nu = config.nu;
        params.epsilon = lvl.epsilon;
        params.dt0 = lvl.dt;
        params.T = config.T;
        params.cfl_constant = config.cfl_constant;
        params.dt_min = config.dt_min;
        params.monitor_stability = config.monitor;

        const CoefficientVector u0 = interpolate(
            space, [](const Vec2& x) { return manufactured_velocity(x, 0.0); });
        std::vector<CoefficientVector> initial;
        initial.reserve(members);
        for (double delta : config.deltas) initial.push_back(scaled(u0, 1.0 + delta));

        const Forces forces = {
            [nu = config.nu](const Vec2& x, double t) { return manufactured_force(x, t, nu); }};
        BoundaryConditions bc;
        bc.velocity[1] = [](const Vec2& x, double t) { return manufactured_velocity(x, t); };
        const MemberBCs bcs = {bc};

        lvl.max_l2_error.assign(members, 0.0);
        lvl.grad_error.assign(members, 0.0);
        lvl.final_l2_error.assign(members, 0.0);
        std::vector<double> grad_sq(members, 0.0);
        const double t_cut = config.spin_up_fraction * config.T - 1e-12;

        const Observer observer = [&](const EnsembleState& state, const StepInfo& info) {
            const ExactField exact = manufactured_exact(state.t);
            for (int j = 0; j < members; ++j) {
                const Norms norms = compute_norms(space, state.members[j].u, &exact);
                grad_sq[j] += info.dt_used * norms.h1_semi_error * norms.h1_semi_error;
                if (state.t >= t_cut)
                    lvl.max_l2_error[j] = std::max(lvl.max_l2_error[j], norms.l2_error);
            }
        };

        RunResult run_result =
            run(space, params, std::move(initial), forces, bcs, observer, config.record_stats);

        const ExactField exact_final = manufactured_exact(run_result.state.t);
        for (int j = 0; j < members; ++j) {
            lvl.grad_error[j] = std::sqrt(grad_sq[j]);
            lvl.final_l2_error[j] =
                compute_norms(space, run_result.state.members[j].u, &exact_final).l2_error;
        }
        lvl.report = run_result.report;
        lvl.ledger_checks = run_result.ledger.checks;
        lvl.ledger_violations = run_result.ledger.violations;
        lvl.records = std::move(run_result.records);
        result.levels.push_back(std::move(lvl));
    }

    for (int level = 0; level + 1 < config.levels; ++level) {
        const ConvergenceLevel& coarse = result.levels[level];
        const ConvergenceLevel& fine = result.levels[level + 1];
        const double log_h = std::log(coarse.h / fine.h);
        std::vector<double> l2_rate(members, 0.0);
        std::vector<double> grad_rate(members, 0.0);
        for (int j = 0; j < members; ++j) {
            l2_rate[j] = std::log(coarse.max_l2_error[j] / fine.max_l2_error[j]) / log_h;
            grad_rate[j] = std::log(coarse.grad_error[j] / fine.grad_error[j]) / log_h;
        }
        result.l2_rates.push_back(std::move(l2_rate));
        result.grad_rates.push_back(std::move(grad_rate));
    }
    return result;
}

// ----------------------------------------------------------------------------
// Rotors study
// ----------------------------------------------------------------------------

namespace {

// Unit pulse on [0,1) inside a period of length 2, with cosine on/off ramps.
double pulse_envelope(double tau, double w) {
    if (tau < 0.0 || tau >= 1.0) return 0.0;
    if (tau < w) return 0.5 * (1.0 - std::cos(kPi * tau / w));
    if (tau <= 1.0 - w) return 1.0;
    return 0.5 * (1.0 - std::cos(kPi * (1.0 - tau) / w));
}

}  // namespace

double rotors_left_amplitude(double t, double ramp_width) {
    double tau = std::fmod(t, 2.0);
    if (tau < 0.0) tau += 2.0;
    return pulse_envelope(tau, ramp_width);
}

double rotors_right_amplitude(double t, double ramp_width) {
    return rotors_left_amplitude(t - 1.0, ramp_width);
}

RotorsResult run_rotors(const RotorsConfig& config) {
    if (config.mesh_path.empty()) throw ConfigError("rotors: mesh_path is required");
    if (config.ramp_width <= 0.0 || config.ramp_width >= 0.5)
        throw DomainError("rotors: ramp_width must lie in (0, 0.5)");

    const FunctionSpace space = build_taylor_hood(read_msh_file(config.mesh_path));

    SchemeParams params;
    params.nu = config.nu;
    params.epsilon = config.epsilon;
    params.dt0 = config.dt;
    params.T = config.T;
    params.cfl_constant = config.cfl_constant;
    params.dt_min = config.dt_min;
    params.allow_doubling = config.allow_doubling;
    params.monitor_stability = config.monitor;

    const double w = config.ramp_width;
    const double scale = config.bc_scale;
    const auto rotor_bc = [&, w, scale](double sigma) {
        BoundaryConditions bc;
        bc.velocity[config.outer_tag] = zero_field();
        bc.velocity[config.left_tag] = [w, scale, sigma](const Vec2& x, double t) {
            const double a = scale * rotors_left_amplitude(t, w) * (1.0 + sigma);
            return Vec2{a * x.y, -a * x.x};
        };
        bc.velocity[config.right_tag] = [w, scale, sigma](const Vec2& x, double t) {
            const double a = scale * rotors_right_amplitude(t, w) * (1.0 + sigma);
            return Vec2{a * x.y, -a * x.x};
        };
        return bc;
    };

    const CoefficientVector rest = zero_velocity(space);
    const Forces no_force = {zero_field()};

    // The two-member ensemble and the averaged-boundary control run advance in
    // lockstep: the ensemble's CFL gate decides every timestep and the control
    // follows with the identical accepted dt, so their time grids coincide
    // bit for bit and per-step comparisons are well defined. The control's own
    // gate would never bind (a single member has zero fluctuation).
    Stepper ensemble(space, params, {rest, rest}, no_force,
                     {rotor_bc(config.sigma1), rotor_bc(config.sigma2)});
    Stepper control(space, params, {rest}, no_force,
                    {rotor_bc(0.5 * (config.sigma1 + config.sigma2))});

    RotorsResult result;
    CoefficientVector prev_u1 = rest, prev_u2 = rest, prev_u0 = rest, prev_mean = rest;

    while (!ensemble.finished()) {
        const StepInfo info = ensemble.step();
        if (info.outcome != StepOutcome::accepted) continue;
        control.advance(info.dt_used);

        const EnsembleState& es = ensemble.state();
        const CoefficientVector& u1 = es.members[0].u;
        const CoefficientVector& u2 = es.members[1].u;
        const CoefficientVector& u0 = control.state().members[0].u;
        const std::vector<CoefficientVector> velocities = {u1, u2};
        const EnsembleDiagnostics diag = ensemble_diagnostics(space, velocities);
        const double dev_control = deviation_about(space, velocities, u0);
        const double u0_l2 = compute_norms(space, u0).l2;

        // Control as member 0 (deviation about the control in its spread/std
        // columns), member rows 1 and 2, then the ensemble-mean row.
        StatRecord control_rec = make_record(space, es.t, 0, u0, prev_u0, config.nu,
                                             info.dt_used, config.epsilon);
        control_rec.spread = u0_l2 > 0.0 ? dev_control / u0_l2 : 0.0;
        control_rec.std_dev = dev_control;
        result.records.push_back(control_rec);
        result.records.push_back(make_record(space, es.t, 1, u1, prev_u1, config.nu,
                                             info.dt_used, config.epsilon));
        result.records.push_back(make_record(space, es.t, 2, u2, prev_u2, config.nu,
                                             info.dt_used, config.epsilon));
        StatRecord mean_rec = make_record(space, es.t, kMeanMember, es.mean, prev_mean,
                                          config.nu, info.dt_used, config.epsilon);
        mean_rec.spread = diag.spread;
        mean_rec.std_dev = diag.std_dev;
        result.records.push_back(mean_rec);

        result.times.push_back(es.t);
        result.dev_about_control.push_back(dev_control);
        result.dev_about_mean.push_back(diag.std_dev);

        prev_u1 = u1;
        prev_u2 = u2;
        prev_u0 = u0;
        prev_mean = es.mean;
        if (config.observer) config.observer(es, info);
    }

    result.ensemble_report = ensemble.report();
    result.control_report = control.report();
    result.ensemble_ledger = ensemble.ledger();
    result.control_ledger = control.ledger();
    result.ensemble_state = ensemble.state();
    result.control_state = control.state();
    return result;
}

// ----------------------------------------------------------------------------
// Cylinder study
// ----------------------------------------------------------------------------

CylinderResult run_cylinder(const CylinderConfig& config) {
    if (config.mesh_path.empty()) throw ConfigError("cylinder: mesh_path is required");
    if (config.members < 2) throw DomainError("cylinder: at least two members are required");
    if (config.sigma_range < 0.0) throw DomainError("cylinder: sigma_range must be >= 0");

    const FunctionSpace space = build_taylor_hood(read_msh_file(config.mesh_path));

    SchemeParams params;
    params.nu = config.nu;
    params.epsilon = config.epsilon;
    params.dt0 = config.dt;
    params.T = config.T;
    params.cfl_constant = config.cfl_constant;
    params.omega = config.omega;
    params.dt_min = config.dt_min;
    params.allow_doubling = config.allow_doubling;
    params.monitor_stability = config.monitor;

    CylinderResult result;
    UniformSampler sampler(config.seed);
    result.sigmas.reserve(config.members);
    for (int j = 0; j < config.members; ++j)
        result.sigmas.push_back(sampler.next_symmetric(config.sigma_range));

    MemberBCs bcs;
    bcs.reserve(config.members);
    for (int j = 0; j < config.members; ++j) {
        BoundaryConditions bc;
        const double sigma = result.sigmas[j];
        // Parabolic inlet with peak 1.5 at mid-height, modulated per member.
        bc.velocity[config.inlet_tag] = [sigma](const Vec2& x, double) {
            const double profile = 6.0 * x.y * (0.41 - x.y) / (0.41 * 0.41);
            return Vec2{profile * (1.0 + sigma * std::sin(2.0 * kPi * x.y)), 0.0};
        };
        bc.velocity[config.wall_tag] = zero_field();
        bc.velocity[config.cylinder_tag] = zero_field();
        bcs.push_back(std::move(bc));
    }

    std::vector<CoefficientVector> initial(config.members, zero_velocity(space));

    const Observer observer = [&](const EnsembleState& state, const StepInfo& info) {
        const double mean_l2 = compute_norms(space, state.mean).l2;
        std::vector<double> step_dev(config.members, 0.0);
        CoefficientVector diff = state.mean;
        for (int j = 0; j < config.members; ++j) {
            for (std::size_t i = 0; i < diff.values.size(); ++i)
                diff.values[i] = state.members[j].u.values[i] - state.mean.values[i];
            const double dev = compute_norms(space, diff).l2;
            step_dev[j] = mean_l2 > 0.0 ? dev / mean_l2 : 0.0;
        }
        result.times.push_back(state.t);
        result.rel_deviation.push_back(std::move(step_dev));
        if (config.observer) config.observer(state, info);
    };

    RunResult run_result =
        run(space, params, std::move(initial), {zero_field()}, bcs, observer, true);

    std::vector<CoefficientVector> final_velocities;
    final_velocities.reserve(config.members);
    for (const auto& m : run_result.state.members) final_velocities.push_back(m.u);
    const EnsembleDiagnostics diag = ensemble_diagnostics(space, final_velocities);
    const double mean_l2 = compute_norms(space, run_result.state.mean).l2;
    result.final_normalized_std = mean_l2 > 0.0 ? diag.std_dev / mean_l2 : 0.0;

    result.records = std::move(run_result.records);
    result.report = run_result.report;
    result.state = std::move(run_result.state);
    return result;
}

// ----------------------------------------------------------------------------
// Monte Carlo study
// ----------------------------------------------------------------------------

double UniformSampler::next() {
    // Top 53 bits of the raw draw, scaled to [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double UniformSampler::next_symmetric(double range) {
    return range * (2.0 * next() - 1.0);
}

MonteCarloResult run_montecarlo(const MonteCarloConfig& config) {
    if (config.g < 1) throw DomainError("montecarlo: g must be >= 1");
    if (config.ensemble_sizes.empty())
        throw DomainError("montecarlo: at least one ensemble size is required");
    for (int size : config.ensemble_sizes)
        if (size < 1) throw DomainError("montecarlo: ensemble sizes must be >= 1");
    if (config.seed_groups < 1) throw DomainError("montecarlo: seed_groups must be >= 1");
    if (config.reference_members < 1)
        throw DomainError("montecarlo: reference_members must be >= 1");
    if (config.amplitude < 0.0) throw DomainError("montecarlo: amplitude must be >= 0");

    const FunctionSpace space = build_taylor_hood(generate_unit_square(config.g));

    SchemeParams params;
    params.nu = config.nu;
    params.epsilon = config.dt;
    params.dt0 = config.dt;
    params.T = config.T;
    params.cfl_constant = config.cfl_constant;
    params.dt_min = config.dt_min;
    params.monitor_stability = config.monitor;

    const CoefficientVector u0 = interpolate(
        space, [](const Vec2& x) { return manufactured_velocity(x, 0.0); });
    BoundaryConditions bc;
    bc.velocity[1] = [](const Vec2& x, double t) { return manufactured_velocity(x, t); };
    const MemberBCs bcs = {bc};

    // One run with J members whose force amplitudes replay the seeded stream;
    // returns the final-time sample average.
    const auto run_one = [&](int members, unsigned long long seed) {
        UniformSampler stream(seed);
        Forces forces;
        forces.reserve(members);
        for (int j = 0; j < members; ++j) {
            const double a = stream.next_symmetric(config.amplitude);
            forces.push_back([a, nu = config.nu](const Vec2& x, double t) {
                const Vec2 f = manufactured_force(x, t, nu);
                return Vec2{(1.0 + a) * f.x, (1.0 + a) * f.y};
            });
        }
        std::vector<CoefficientVector> initial(members, u0);
        RunResult r = run(space, params, std::move(initial), forces, bcs);
        return std::move(r.state.mean);
    };

    MonteCarloResult result;
    result.reference_mean = run_one(config.reference_members, config.seed);

    std::vector<SampleAverage> runs;
    runs.reserve(static_cast<std::size_t>(config.seed_groups) * config.ensemble_sizes.size());
    for (int group = 0; group < config.seed_groups; ++group) {
        const unsigned long long seed = config.seed + 1 + static_cast<unsigned long long>(group);
        for (int size : config.ensemble_sizes)
            runs.push_back(SampleAverage{size, run_one(size, seed)});
    }
    result.mean_sq_error = statistical_error_estimate(space, runs, result.reference_mean);

    for (std::size_t k = 0; k + 1 < config.ensemble_sizes.size(); ++k) {
        const double coarse = result.mean_sq_error.at(config.ensemble_sizes[k]);
        const double fine = result.mean_sq_error.at(config.ensemble_sizes[k + 1]);
        result.reduction_factors.push_back(fine > 0.0 ? coarse / fine : 0.0);
    }
    return result;
}

}  // namespace penflow
