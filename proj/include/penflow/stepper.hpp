#pragma once
// ============================================================================
// stepper.hpp - penalty-based ensemble time stepping
//
// One backward-Euler step of the J-member ensemble solves, for each member j,
//
//   (1/Δt)(u^{n+1}_j − u^n_j, v) + b*(⟨u⟩^n, u^{n+1}_j, v)
//     + b*(u^n_j − ⟨u⟩^n, u^n_j, v) + ν(∇u^{n+1}_j, ∇v) + ω((−u2,u1)^{n+1}_j, v)
//     − (p^{n+1}_j, ∇·v) + (q, ∇·u^{n+1}_j) + ε(p^{n+1}_j, q) = (f_j^{n+1}, v),
//
// with the convection linearized about the ensemble mean and the fluctuation
// transported explicitly. The implicit operator is member-independent, so
// each attempted step performs exactly one sparse factorization and J
// back-substitutions — the property this module's counters certify.
//
// A CFL gate guards the explicit term: if any member violates
// C·Δt/(νh)·‖∇(u^n_j − ⟨u⟩^n)‖² ≤ 1, the step is rejected, Δt is halved for
// the whole ensemble, and the step is retried. Accepted steps also feed an
// energy-stability ledger that asserts the backward-Euler energy inequality
// (with a Poincaré surrogate for the dual force norm) at runtime.
// ============================================================================

#include "penflow/space.hpp"
#include "penflow/statistics.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace penflow {

struct SchemeParams {
    double nu = 1.0;              // kinematic viscosity, > 0
    double epsilon = 1e-3;        // penalty parameter, > 0
    double dt0 = 1e-3;            // initial timestep
    double T = 1.0;               // final time
    double cfl_constant = 1.0;    // C in the CFL gate
    double omega = 0.0;           // Coriolis coefficient, >= 0
    double dt_min = 1e-9;         // halving below this aborts the run
    bool allow_doubling = false;  // dt <- min(2dt, dt0) after 10 straight accepts
    bool monitor_stability = true;  // evaluate the energy ledger each accepted step
};

// Throws DomainError unless 0 < dt_min <= dt0 <= T, nu > 0, epsilon > 0,
// cfl_constant > 0, omega >= 0.
void validate_params(const SchemeParams& params);

struct Member {
    CoefficientVector u;  // velocity
    CoefficientVector p;  // pressure
};

struct EnsembleState {
    std::vector<Member> members;
    CoefficientVector mean;  // cached arithmetic average of member velocities
    double t = 0.0;
    double dt = 0.0;
    long step_index = 0;
};

// Builds a time-zero state: given velocities, zero pressures (the scheme
// never reads p^n), dt = dt0, cached mean.
EnsembleState make_initial_state(const FunctionSpace& space, const SchemeParams& params,
                                 std::vector<CoefficientVector> velocities);

// Recomputes state.mean from the members.
void refresh_mean(const FunctionSpace& space, EnsembleState& state);

// Time-dependent vector fields: member forces f_j(x, t) and Dirichlet data.
using TimeVectorField = std::function<Vec2(const Vec2&, double)>;

// One force per member, or a single shared entry broadcast to all members.
using Forces = std::vector<TimeVectorField>;

// Dirichlet data per boundary tag; tags absent from the map are natural
// (do-nothing) boundaries. All members must prescribe the same tag set so
// the constrained dof set — and hence the shared matrix — is member-
// independent; the prescribed values may differ per member.
struct BoundaryConditions {
    std::map<int, TimeVectorField> velocity;
};
using MemberBCs = std::vector<BoundaryConditions>;  // one per member, or one shared

// --------------------------------------------------------------------------
// Building blocks (exposed for tests; the Stepper drives them internally)
// --------------------------------------------------------------------------

// The member-independent implicit operator over velocity+pressure dofs:
//   [[ M/dt + νK + N(mean) + ωC_rot , −Bᵀ ],
//    [ B                            ,  εMp ]]
// with every constrained velocity row replaced by an identity row. The
// constrained set is the union of space.dirichlet_sets over `dirichlet_tags`.
SparseMatrix build_system(const FunctionSpace& space, const SchemeParams& params,
                          const ConstantOperators& ops, const CoefficientVector& mean,
                          double dt, const std::vector<int>& dirichlet_tags);

// Member j's right-hand side at the new time t_new = t + dt:
//   velocity rows  M u^n_j/dt + (f_j(t_new), φ) − b*(u^n_j − mean, u^n_j, φ),
//   pressure rows  0,
//   constrained rows = prescribed velocity at t_new (tags in ascending order;
//   where tags share a corner node the highest tag wins).
std::vector<double> build_rhs(const FunctionSpace& space, const ConstantOperators& ops,
                              const Member& member, const CoefficientVector& mean, double dt,
                              const TimeVectorField& force, const BoundaryConditions& bc,
                              double t_new);

struct CflResult {
    bool pass = true;
    int worst_member = 0;
    double worst_value = 0.0;  // max_j C·dt/(ν·h)·‖∇(u_j − mean)‖²
};
CflResult cfl_check(const FunctionSpace& space, const SchemeParams& params,
                    const std::vector<Member>& members, const CoefficientVector& mean,
                    double dt, double h);

// --------------------------------------------------------------------------
// Stability ledger (Poincaré-surrogate energy inequality)
// --------------------------------------------------------------------------
//
// The energy inequality certified per accepted step N, for each member:
//
//   ½‖w^N‖² + ¼Σ‖w^{n+1}−w^n‖² + (νΔt/4)‖∇w^N‖²
//     + Σ(Δt/ε)‖P_Qh(∇·w^{n+1})‖² + Σ(νΔt/4)‖∇w^{n+1}‖²
//   ≤ Σ(Δt/2ν)·C_PF²·‖g^{n+1}‖² + ½‖w⁰‖² + (νΔt/4)‖∇w⁰‖²,
//
// where w^n is the member velocity with its constrained dofs zeroed (so w
// vanishes on the Dirichlet boundary and the skew-symmetry identities hold
// exactly), g^{n+1} is the L2 representative of everything the w-equation
// sees as external forcing — the body force plus all boundary-lift terms —
// and C_PF is the Poincaré constant surrogate (bounding-box diagonal). With
// homogeneous Dirichlet data the lift terms vanish and this is precisely the
// textbook inequality with ‖f‖₋₁ ≤ C_PF‖f‖. Sums carry the step's own Δt, so
// adaptive halving is accounted exactly.
struct StabilityLedger {
    std::vector<double> increment_sum;   // ¼ Σ ‖w^{n+1}−w^n‖²
    std::vector<double> grad_sum;        // Σ (ν Δt/4) ‖∇w^{n+1}‖²
    std::vector<double> penalty_sum;     // Σ (Δt/ε) ‖P_Qh(∇·w^{n+1})‖²
    std::vector<double> force_sum;       // Σ (Δt/2ν) C_PF² ‖g^{n+1}‖²
    std::vector<double> initial_energy;  // ½‖w⁰‖² + (ν Δt_1/4)‖∇w⁰‖²
    long checks = 0;
    long violations = 0;
    double max_ratio = 0.0;  // max over steps and members of LHS/RHS
};

// --------------------------------------------------------------------------
// The stepper
// --------------------------------------------------------------------------

enum class StepOutcome { accepted, halved };

struct StepInfo {
    StepOutcome outcome = StepOutcome::accepted;
    double t = 0.0;        // time after the attempt
    double dt_used = 0.0;  // dt of the attempt (clipped at T)
    CflResult cfl;
};

struct RunReport {
    long accepted_steps = 0;
    long rejected_steps = 0;
    long factorizations = 0;  // during stepping; equals accepted_steps
    long solves = 0;          // during stepping; equals J × accepted_steps
    // Δt-weighted gradient sums of fluctuations and members (ensemble-
    // averaged); the fluctuation sum never exceeds the member sum.
    double fluct_grad_sum = 0.0;
    double member_grad_sum = 0.0;
};

class Stepper {
  public:
    // Factorizes the ledger's mass matrices up front (when the monitor is
    // on), so stepping itself performs exactly one factorization per step.
    Stepper(const FunctionSpace& space, SchemeParams params,
            std::vector<CoefficientVector> initial_velocities, Forces forces, MemberBCs bcs);

    const EnsembleState& state() const { return state_; }
    const SchemeParams& params() const { return params_; }
    const StabilityLedger& ledger() const { return ledger_; }
    const RunReport& report() const { return report_; }
    double mesh_h() const { return h_; }
    int member_count() const { return static_cast<int>(state_.members.size()); }

    bool finished() const;

    // dt of the next attempt: current dt clipped to land exactly on T.
    double next_dt() const;

    // CFL gate for the given dt against the current state.
    CflResult check(double dt) const;

    // One gated attempt: on pass, assemble + factorize once, solve all J
    // right-hand sides, update members/mean/ledger, advance t. On fail, halve
    // dt and leave the state otherwise untouched. Throws when halving would
    // drop dt below dt_min (naming the worst member) and propagates solver
    // errors.
    StepInfo step();

    // Unconditional accepted step at the given dt (the post-gate body of
    // step(); exposed for controller tests).
    void advance(double dt);

  private:
    void ledger_update(int j, const CoefficientVector& u_old, const CoefficientVector& u_new,
                       const CoefficientVector& mean_old, const SparseMatrix& n_mean,
                       const std::vector<double>& load, double dt);
    std::vector<double> masked(const std::vector<double>& values) const;  // zero Dirichlet dofs

    const FunctionSpace& space_;
    SchemeParams params_;
    Forces forces_;
    MemberBCs bcs_;
    ConstantOperators ops_;
    SparseMatrix bt_;  // Bᵀ, cached for the velocity-pressure coupling rows
    EnsembleState state_;
    bool ledger_initialized_ = false;
    StabilityLedger ledger_;
    RunReport report_;
    std::vector<int> dirichlet_tags_;   // ascending tags constrained by the BCs
    std::vector<char> is_dirichlet_;    // mask over velocity dofs
    double h_ = 0.0;                    // mesh size (longest edge)
    double c_pf_ = 0.0;                 // bounding-box diagonal
    std::optional<Factorization> mass_free_;  // M with constrained rows -> identity
    std::optional<Factorization> mp_;         // pressure mass
    std::optional<PatternFactorizer> system_factorizer_;  // symbolic analysis reused per run
    int consecutive_accepts_ = 0;
};

// --------------------------------------------------------------------------
// Whole-run driver
// --------------------------------------------------------------------------

struct RunResult {
    EnsembleState state;
    StabilityLedger ledger;
    RunReport report;
    std::vector<StatRecord> records;
};

// Called after every accepted step with the updated state.
using Observer = std::function<void(const EnsembleState&, const StepInfo&)>;

// Advances from t = 0 until t >= T (final step clipped to land on T). When
// record_stats is set, emits per-member rows plus an ensemble-mean row after
// every accepted step.
RunResult run(const FunctionSpace& space, const SchemeParams& params,
              std::vector<CoefficientVector> initial_velocities, const Forces& forces,
              const MemberBCs& bcs, const Observer& observer = {}, bool record_stats = false);

}  // namespace penflow
