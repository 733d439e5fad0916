// ============================================================================
// stepper.cpp - system assembly, CFL gate, stability ledger, time loop
// ============================================================================

#include "penflow/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace penflow {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

std::vector<double> subtract(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

// xᵀ A x for a symmetric operator A (discrete L2 / H1 quadratic forms).
double quad_form(const SparseMatrix& A, const std::vector<double>& x) {
    return dot(x, A.apply(x));
}

// Member-independent system matrix; `n_mean` is N(⟨u⟩^n) and `bt` is Bᵀ.
// M, K and N share one CSR pattern (identical per-element blocks), so the
// velocity block is filled slot-by-slot; the Coriolis block lives on the
// opposite-parity columns and is merged in only when ω ≠ 0.
SparseMatrix assemble_system(const FunctionSpace& space, const SchemeParams& params,
                             const ConstantOperators& ops, const SparseMatrix& bt,
                             const SparseMatrix& n_mean, double dt,
                             const std::vector<char>& is_dirichlet) {
    const int nu = space.n_velocity_dofs();
    const int np = space.n_pressure_dofs();
    const int n = nu + np;
    const double inv_dt = 1.0 / dt;
    const bool coriolis = params.omega != 0.0;

    std::vector<int> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> cols;
    std::vector<double> vals;
    cols.reserve(static_cast<std::size_t>(ops.M.nnz()) * (coriolis ? 2 : 1) + 2 * ops.B.nnz() +
                 ops.Mp.nnz() + static_cast<std::size_t>(nu));
    vals.reserve(cols.capacity());

    const auto& m_off = ops.M.row_offsets();
    const auto& m_cols = ops.M.col_indices();
    const auto& m_vals = ops.M.values();
    const auto& k_vals = ops.K.values();
    const auto& n_vals = n_mean.values();
    const auto& c_off = ops.C_rot.row_offsets();
    const auto& c_cols = ops.C_rot.col_indices();
    const auto& c_vals = ops.C_rot.values();

    for (int r = 0; r < nu; ++r) {
        if (is_dirichlet[static_cast<std::size_t>(r)]) {
            cols.push_back(r);
            vals.push_back(1.0);
        } else {
            int km = m_off[static_cast<std::size_t>(r)];
            const int km_end = m_off[static_cast<std::size_t>(r) + 1];
            if (!coriolis) {
                for (; km < km_end; ++km) {
                    cols.push_back(m_cols[static_cast<std::size_t>(km)]);
                    vals.push_back(inv_dt * m_vals[static_cast<std::size_t>(km)] +
                                   params.nu * k_vals[static_cast<std::size_t>(km)] +
                                   n_vals[static_cast<std::size_t>(km)]);
                }
            } else {
                int kc = c_off[static_cast<std::size_t>(r)];
                const int kc_end = c_off[static_cast<std::size_t>(r) + 1];
                while (km < km_end || kc < kc_end) {
                    const int cm = km < km_end ? m_cols[static_cast<std::size_t>(km)]
                                               : std::numeric_limits<int>::max();
                    const int cc = kc < kc_end ? c_cols[static_cast<std::size_t>(kc)]
                                               : std::numeric_limits<int>::max();
                    if (cm < cc) {
                        cols.push_back(cm);
                        vals.push_back(inv_dt * m_vals[static_cast<std::size_t>(km)] +
                                       params.nu * k_vals[static_cast<std::size_t>(km)] +
                                       n_vals[static_cast<std::size_t>(km)]);
                        ++km;
                    } else if (cc < cm) {
                        cols.push_back(cc);
                        vals.push_back(params.omega * c_vals[static_cast<std::size_t>(kc)]);
                        ++kc;
                    } else {  // same column (cannot happen: opposite parities), be safe
                        cols.push_back(cm);
                        vals.push_back(inv_dt * m_vals[static_cast<std::size_t>(km)] +
                                       params.nu * k_vals[static_cast<std::size_t>(km)] +
                                       n_vals[static_cast<std::size_t>(km)] +
                                       params.omega * c_vals[static_cast<std::size_t>(kc)]);
                        ++km;
                        ++kc;
                    }
                }
            }
            // −Bᵀ coupling into the pressure columns (all > velocity columns).
            for (int kb = bt.row_offsets()[static_cast<std::size_t>(r)];
                 kb < bt.row_offsets()[static_cast<std::size_t>(r) + 1]; ++kb) {
                cols.push_back(nu + bt.col_indices()[static_cast<std::size_t>(kb)]);
                vals.push_back(-bt.values()[static_cast<std::size_t>(kb)]);
            }
        }
        offsets[static_cast<std::size_t>(r) + 1] = static_cast<int>(cols.size());
    }
    for (int q = 0; q < np; ++q) {
        for (int kb = ops.B.row_offsets()[static_cast<std::size_t>(q)];
             kb < ops.B.row_offsets()[static_cast<std::size_t>(q) + 1]; ++kb) {
            cols.push_back(ops.B.col_indices()[static_cast<std::size_t>(kb)]);
            vals.push_back(ops.B.values()[static_cast<std::size_t>(kb)]);
        }
        for (int kp = ops.Mp.row_offsets()[static_cast<std::size_t>(q)];
             kp < ops.Mp.row_offsets()[static_cast<std::size_t>(q) + 1]; ++kp) {
            cols.push_back(nu + ops.Mp.col_indices()[static_cast<std::size_t>(kp)]);
            vals.push_back(params.epsilon * ops.Mp.values()[static_cast<std::size_t>(kp)]);
        }
        offsets[static_cast<std::size_t>(nu + q) + 1] = static_cast<int>(cols.size());
    }

    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

// RHS given a pre-assembled body-force load (shared by build_rhs and the
// stepper, which also feeds the load into the stability ledger).
std::vector<double> compose_rhs(const FunctionSpace& space, const ConstantOperators& ops,
                                const Member& member, const CoefficientVector& mean, double dt,
                                const CoefficientVector& load, const BoundaryConditions& bc,
                                double t_new) {
    const int nu = space.n_velocity_dofs();
    const int np = space.n_pressure_dofs();

    CoefficientVector fluct{SpaceKind::velocity, subtract(member.u.values, mean.values)};
    const CoefficientVector expl = apply_fluctuation_convection(space, fluct, member.u);

    std::vector<double> rhs(static_cast<std::size_t>(nu + np), 0.0);
    const std::vector<double> mu = ops.M.apply(member.u.values);
    for (int i = 0; i < nu; ++i)
        rhs[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] / dt +
                                           load.values[static_cast<std::size_t>(i)] -
                                           expl.values[static_cast<std::size_t>(i)];
    // Prescribed rows, ascending tag order (ties at shared corners: highest
    // tag wins).
    for (const auto& [tag, fn] : bc.velocity) {
        const auto it = space.dirichlet_sets.find(tag);
        if (it == space.dirichlet_sets.end())
            throw DomainError("build_rhs: boundary condition for tag " + std::to_string(tag) +
                              " but the mesh has no boundary edges with that tag");
        for (int dof : it->second) {
            const Vec2 v = fn(space.node_coords[static_cast<std::size_t>(dof / 2)], t_new);
            rhs[static_cast<std::size_t>(dof)] = (dof % 2 == 0) ? v.x : v.y;
        }
    }
    return rhs;
}

std::vector<char> dirichlet_mask(const FunctionSpace& space, const std::vector<int>& tags) {
    std::vector<char> mask(static_cast<std::size_t>(space.n_velocity_dofs()), 0);
    for (int tag : tags) {
        const auto it = space.dirichlet_sets.find(tag);
        if (it == space.dirichlet_sets.end())
            throw DomainError("boundary condition for tag " + std::to_string(tag) +
                              " but the mesh has no boundary edges with that tag");
        for (int dof : it->second) mask[static_cast<std::size_t>(dof)] = 1;
    }
    return mask;
}

}  // namespace

void validate_params(const SchemeParams& params) {
    if (!(params.nu > 0.0)) throw DomainError("params: nu must be positive");
    if (!(params.epsilon > 0.0)) throw DomainError("params: epsilon must be positive");
    if (!(params.T > 0.0)) throw DomainError("params: T must be positive");
    if (!(params.dt_min > 0.0 && params.dt_min <= params.dt0 && params.dt0 <= params.T))
        throw DomainError("params: need 0 < dt_min <= dt0 <= T");
    if (!(params.cfl_constant > 0.0)) throw DomainError("params: cfl_constant must be positive");
    if (params.omega < 0.0) throw DomainError("params: omega must be nonnegative");
}

EnsembleState make_initial_state(const FunctionSpace& space, const SchemeParams& params,
                                 std::vector<CoefficientVector> velocities) {
    validate_params(params);
    if (velocities.empty()) throw DomainError("make_initial_state: need at least one member");
    EnsembleState state;
    state.members.reserve(velocities.size());
    for (auto& v : velocities) {
        if (v.kind != SpaceKind::velocity ||
            static_cast<int>(v.values.size()) != space.n_velocity_dofs())
            throw DimensionError("make_initial_state: member velocity has wrong length");
        state.members.push_back({std::move(v), zero_pressure(space)});
    }
    state.t = 0.0;
    state.dt = params.dt0;
    state.step_index = 0;
    refresh_mean(space, state);
    return state;
}

void refresh_mean(const FunctionSpace& space, EnsembleState& state) {
    const int J = static_cast<int>(state.members.size());
    state.mean = zero_velocity(space);
    for (const auto& m : state.members)
        for (std::size_t i = 0; i < state.mean.values.size(); ++i)
            state.mean.values[i] += m.u.values[i] / J;
}

SparseMatrix build_system(const FunctionSpace& space, const SchemeParams& params,
                          const ConstantOperators& ops, const CoefficientVector& mean,
                          double dt, const std::vector<int>& dirichlet_tags) {
    if (dt <= 0.0) throw DomainError("build_system: dt must be positive");
    const SparseMatrix bt = transpose(ops.B);
    const SparseMatrix n_mean = assemble_mean_convection(space, mean);
    return assemble_system(space, params, ops, bt, n_mean, dt, dirichlet_mask(space, dirichlet_tags));
}

std::vector<double> build_rhs(const FunctionSpace& space, const ConstantOperators& ops,
                              const Member& member, const CoefficientVector& mean, double dt,
                              const TimeVectorField& force, const BoundaryConditions& bc,
                              double t_new) {
    if (dt <= 0.0) throw DomainError("build_rhs: dt must be positive");
    const CoefficientVector load =
        assemble_load(space, [&](const Vec2& x) { return force(x, t_new); });
    return compose_rhs(space, ops, member, mean, dt, load, bc, t_new);
}

CflResult cfl_check(const FunctionSpace& space, const SchemeParams& params,
                    const std::vector<Member>& members, const CoefficientVector& mean,
                    double dt, double h) {
    CflResult result;
    if (members.size() <= 1) return result;  // fluctuation is identically zero
    for (std::size_t j = 0; j < members.size(); ++j) {
        CoefficientVector fluct{SpaceKind::velocity, subtract(members[j].u.values, mean.values)};
        const double grad = compute_norms(space, fluct).h1_semi;
        const double value = params.cfl_constant * dt / (params.nu * h) * grad * grad;
        if (value > result.worst_value) {
            result.worst_value = value;
            result.worst_member = static_cast<int>(j);
        }
    }
    result.pass = result.worst_value <= 1.0;
    return result;
}

Stepper::Stepper(const FunctionSpace& space, SchemeParams params,
                 std::vector<CoefficientVector> initial_velocities, Forces forces, MemberBCs bcs)
    : space_(space), params_(params) {
    validate_params(params_);
    const std::size_t J = initial_velocities.size();
    if (J == 0) throw DomainError("Stepper: need at least one member");

    if (forces.size() == 1 && J > 1) forces.resize(J, forces.front());
    if (forces.size() != J)
        throw DimensionError("Stepper: " + std::to_string(forces.size()) + " forces for " +
                             std::to_string(J) + " members");
    forces_ = std::move(forces);

    if (bcs.size() == 1 && J > 1) bcs.resize(J, bcs.front());
    if (bcs.size() != J)
        throw DimensionError("Stepper: " + std::to_string(bcs.size()) + " boundary conditions for " +
                             std::to_string(J) + " members");
    bcs_ = std::move(bcs);

    // The constrained dof set must be member-independent (shared matrix).
    for (const auto& bc : bcs_) {
        if (bc.velocity.size() != bcs_.front().velocity.size() ||
            !std::equal(bc.velocity.begin(), bc.velocity.end(), bcs_.front().velocity.begin(),
                        [](const auto& a, const auto& b) { return a.first == b.first; }))
            throw DomainError("Stepper: members prescribe different boundary tag sets");
    }
    for (const auto& [tag, fn] : bcs_.front().velocity) dirichlet_tags_.push_back(tag);

    ops_ = assemble_constant_operators(space_);
    bt_ = transpose(ops_.B);
    is_dirichlet_ = dirichlet_mask(space_, dirichlet_tags_);
    h_ = mesh_size(*space_.mesh);

    double xmin = space_.mesh->vertices.front().x, xmax = xmin;
    double ymin = space_.mesh->vertices.front().y, ymax = ymin;
    for (const Vec2& v : space_.mesh->vertices) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
    }
    c_pf_ = std::hypot(xmax - xmin, ymax - ymin);

    state_ = make_initial_state(space_, params_, std::move(initial_velocities));

    ledger_.increment_sum.assign(J, 0.0);
    ledger_.grad_sum.assign(J, 0.0);
    ledger_.penalty_sum.assign(J, 0.0);
    ledger_.force_sum.assign(J, 0.0);
    ledger_.initial_energy.assign(J, 0.0);

    if (params_.monitor_stability) {
        // Restricted (free-dof) velocity mass: constrained rows -> identity.
        // Solving it against a load that vanishes on constrained rows yields
        // the free-space L2 Riesz representative exactly.
        SparseMatrix m_free = ops_.M;
        auto& vals = m_free.values_mut();
        for (int r = 0; r < m_free.n_rows(); ++r) {
            if (!is_dirichlet_[static_cast<std::size_t>(r)]) continue;
            for (int k = m_free.row_offsets()[static_cast<std::size_t>(r)];
                 k < m_free.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                vals[static_cast<std::size_t>(k)] =
                    m_free.col_indices()[static_cast<std::size_t>(k)] == r ? 1.0 : 0.0;
        }
        mass_free_ = factorize(m_free);
        mp_ = factorize(ops_.Mp);
    }
}

bool Stepper::finished() const {
    return state_.t >= params_.T - 1e-12 * std::max(1.0, std::abs(params_.T));
}

double Stepper::next_dt() const { return std::min(state_.dt, params_.T - state_.t); }

CflResult Stepper::check(double dt) const {
    return cfl_check(space_, params_, state_.members, state_.mean, dt, h_);
}

std::vector<double> Stepper::masked(const std::vector<double>& values) const {
    std::vector<double> w = values;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (is_dirichlet_[i]) w[i] = 0.0;
    return w;
}

void Stepper::ledger_update(int j, const CoefficientVector& u_old, const CoefficientVector& u_new,
                            const CoefficientVector& mean_old, const SparseMatrix& n_mean,
                            const std::vector<double>& load, double dt) {
    const double nu = params_.nu;
    const double eps = params_.epsilon;
    const std::size_t sj = static_cast<std::size_t>(j);

    const std::vector<double> w_new = masked(u_new.values);
    const std::vector<double> w_old = masked(u_old.values);
    const std::vector<double> lift_new = subtract(u_new.values, w_new);
    const std::vector<double> lift_old = subtract(u_old.values, w_old);

    if (!ledger_initialized_)
        ledger_.initial_energy[sj] =
            0.5 * quad_form(ops_.M, w_old) + 0.25 * nu * dt * quad_form(ops_.K, w_old);

    ledger_.increment_sum[sj] += 0.25 * quad_form(ops_.M, subtract(w_new, w_old));
    const double grad_new = quad_form(ops_.K, w_new);
    ledger_.grad_sum[sj] += 0.25 * nu * dt * grad_new;

    const std::vector<double> bw = ops_.B.apply(w_new);
    const std::vector<double> q = mp_->solve(bw);
    ledger_.penalty_sum[sj] += dt / eps * dot(q, bw);

    // Everything the homogenized equation sees as forcing: body force minus
    // the boundary-lift contributions of every operator, minus the part of
    // the explicit convection load not expressible through homogenized
    // fields. Restricted to free rows, then measured through the free mass.
    std::vector<double> g = load;
    axpy(-1.0 / dt, ops_.M.apply(subtract(lift_new, lift_old)), g);
    axpy(-nu, ops_.K.apply(lift_new), g);
    axpy(-1.0, n_mean.apply(lift_new), g);
    if (params_.omega != 0.0) axpy(-params_.omega, ops_.C_rot.apply(lift_new), g);
    const std::vector<double> bl = ops_.B.apply(lift_new);
    axpy(-1.0 / eps, ops_.B.apply_transpose(mp_->solve(bl)), g);

    const CoefficientVector fluct_full{SpaceKind::velocity, subtract(u_old.values, mean_old.values)};
    const CoefficientVector fluct_hom{SpaceKind::velocity, masked(fluct_full.values)};
    const CoefficientVector carrier_hom{SpaceKind::velocity, w_old};
    const CoefficientVector expl_full = apply_fluctuation_convection(space_, fluct_full, u_old);
    const CoefficientVector expl_hom = apply_fluctuation_convection(space_, fluct_hom, carrier_hom);
    axpy(-1.0, expl_full.values, g);
    axpy(1.0, expl_hom.values, g);

    for (std::size_t i = 0; i < g.size(); ++i)
        if (is_dirichlet_[i]) g[i] = 0.0;
    const std::vector<double> z = mass_free_->solve(g);
    ledger_.force_sum[sj] += dt / (2.0 * nu) * c_pf_ * c_pf_ * dot(z, g);

    const double lhs = 0.5 * quad_form(ops_.M, w_new) + ledger_.increment_sum[sj] +
                       0.25 * nu * dt * grad_new + ledger_.penalty_sum[sj] + ledger_.grad_sum[sj];
    const double rhs = ledger_.force_sum[sj] + ledger_.initial_energy[sj];
    ++ledger_.checks;
    if (lhs > rhs * (1.0 + 1e-9) + 1e-12) ++ledger_.violations;
    if (rhs > 0.0)
        ledger_.max_ratio = std::max(ledger_.max_ratio, lhs / rhs);
    else if (lhs > 1e-12)
        ledger_.max_ratio = std::numeric_limits<double>::infinity();
}

void Stepper::advance(double dt) {
    if (dt <= 0.0) throw DomainError("advance: dt must be positive");
    const double t_new = state_.t + dt;
    const int J = member_count();

    const SparseMatrix n_mean = assemble_mean_convection(space_, state_.mean);
    const SparseMatrix system =
        assemble_system(space_, params_, ops_, bt_, n_mean, dt, is_dirichlet_);
    // The system's sparsity pattern is fixed for the whole run (only the
    // values change with dt and the mean), so the symbolic analysis is done
    // once and each step pays for the numeric factorization only.
    if (!system_factorizer_) system_factorizer_.emplace(system);
    const Factorization factors = system_factorizer_->refactorize(system);
    ++report_.factorizations;

    std::vector<CoefficientVector> loads;
    std::vector<std::vector<double>> rhs;
    loads.reserve(static_cast<std::size_t>(J));
    rhs.reserve(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
        const TimeVectorField& f = forces_[static_cast<std::size_t>(j)];
        loads.push_back(assemble_load(space_, [&](const Vec2& x) { return f(x, t_new); }));
        rhs.push_back(compose_rhs(space_, ops_, state_.members[static_cast<std::size_t>(j)],
                                  state_.mean, dt, loads.back(),
                                  bcs_[static_cast<std::size_t>(j)], t_new));
    }
    const std::vector<std::vector<double>> solutions = factors.solve_many(rhs);
    report_.solves += J;

    const CoefficientVector mean_old = state_.mean;
    const int nu_dofs = space_.n_velocity_dofs();
    for (int j = 0; j < J; ++j) {
        Member& member = state_.members[static_cast<std::size_t>(j)];
        const auto& sol = solutions[static_cast<std::size_t>(j)];
        CoefficientVector u_new{SpaceKind::velocity,
                                std::vector<double>(sol.begin(), sol.begin() + nu_dofs)};
        CoefficientVector p_new{SpaceKind::pressure,
                                std::vector<double>(sol.begin() + nu_dofs, sol.end())};

        if (params_.monitor_stability)
            ledger_update(j, member.u, u_new, mean_old, n_mean,
                          loads[static_cast<std::size_t>(j)].values, dt);

        const CoefficientVector fluct{SpaceKind::velocity,
                                      subtract(member.u.values, mean_old.values)};
        const double grad_fluct = compute_norms(space_, fluct).h1_semi;
        const double grad_member = compute_norms(space_, member.u).h1_semi;
        report_.fluct_grad_sum += dt / J * grad_fluct * grad_fluct;
        report_.member_grad_sum += dt / J * grad_member * grad_member;

        member.u = std::move(u_new);
        member.p = std::move(p_new);
    }
    if (params_.monitor_stability) ledger_initialized_ = true;

    refresh_mean(space_, state_);
    state_.t = (std::abs(params_.T - t_new) <= 1e-12 * std::max(1.0, std::abs(params_.T)))
                   ? params_.T
                   : t_new;
    ++state_.step_index;
    ++report_.accepted_steps;

    ++consecutive_accepts_;
    if (params_.allow_doubling && consecutive_accepts_ >= 10 && state_.dt < params_.dt0) {
        state_.dt = std::min(2.0 * state_.dt, params_.dt0);
        consecutive_accepts_ = 0;
    }
}

StepInfo Stepper::step() {
    if (finished()) throw DomainError("step: the run has already reached T");
    const double dt_use = next_dt();
    StepInfo info;
    info.dt_used = dt_use;
    info.cfl = check(dt_use);
    if (!info.cfl.pass) {
        const double halved = 0.5 * state_.dt;
        if (halved < params_.dt_min)
            throw Error("step: CFL violation at t = " + std::to_string(state_.t) +
                        " (member " + std::to_string(info.cfl.worst_member) + ", value " +
                        std::to_string(info.cfl.worst_value) +
                        "); halving would drop dt below dt_min = " + std::to_string(params_.dt_min));
        state_.dt = halved;
        consecutive_accepts_ = 0;
        ++report_.rejected_steps;
        info.outcome = StepOutcome::halved;
        info.t = state_.t;
        return info;
    }
    advance(dt_use);
    info.outcome = StepOutcome::accepted;
    info.t = state_.t;
    return info;
}

RunResult run(const FunctionSpace& space, const SchemeParams& params,
              std::vector<CoefficientVector> initial_velocities, const Forces& forces,
              const MemberBCs& bcs, const Observer& observer, bool record_stats) {
    Stepper stepper(space, params, std::move(initial_velocities), forces, bcs);
    RunResult result;

    std::vector<CoefficientVector> prev;
    if (record_stats) {
        prev.reserve(stepper.state().members.size());
        for (const auto& m : stepper.state().members) prev.push_back(m.u);
    }
    CoefficientVector prev_mean = stepper.state().mean;

    while (!stepper.finished()) {
        const StepInfo info = stepper.step();
        if (info.outcome != StepOutcome::accepted) continue;

        if (record_stats) {
            const EnsembleState& s = stepper.state();
            std::vector<CoefficientVector> velocities;
            velocities.reserve(s.members.size());
            for (const auto& m : s.members) velocities.push_back(m.u);

            for (std::size_t j = 0; j < s.members.size(); ++j) {
                StatRecord rec;
                rec.t = s.t;
                rec.member = static_cast<int>(j);
                const FlowStats fs = flow_stats(space, s.members[j].u, params.nu);
                rec.kinetic_energy = fs.kinetic_energy;
                rec.enstrophy = fs.enstrophy;
                rec.angular_momentum_abs = fs.angular_momentum_abs;
                rec.div_l2 = fs.div_l2;
                rec.viscous_dissipation = fs.viscous_dissipation;
                const DissipationRates rates = numerical_dissipation(
                    space, s.members[j].u, prev[j], info.dt_used, params.epsilon);
                rec.be_dissipation = rates.be;
                rec.penalty_dissipation = rates.penalty;
                result.records.push_back(rec);
            }

            const EnsembleDiagnostics diag = ensemble_diagnostics(space, velocities);
            StatRecord mean_rec;
            mean_rec.t = s.t;
            mean_rec.member = kMeanMember;
            const FlowStats fs = flow_stats(space, s.mean, params.nu);
            mean_rec.kinetic_energy = fs.kinetic_energy;
            mean_rec.enstrophy = fs.enstrophy;
            mean_rec.angular_momentum_abs = fs.angular_momentum_abs;
            mean_rec.div_l2 = fs.div_l2;
            mean_rec.viscous_dissipation = fs.viscous_dissipation;
            const DissipationRates mean_rates =
                numerical_dissipation(space, s.mean, prev_mean, info.dt_used, params.epsilon);
            mean_rec.be_dissipation = mean_rates.be;
            mean_rec.penalty_dissipation = mean_rates.penalty;
            mean_rec.spread = diag.spread;
            mean_rec.std_dev = diag.std_dev;
            result.records.push_back(mean_rec);

            prev = std::move(velocities);
            prev_mean = s.mean;
        }
        if (observer) observer(stepper.state(), info);
    }

    result.state = stepper.state();
    result.ledger = stepper.ledger();
    result.report = stepper.report();
    return result;
}

}  // namespace penflow
