#pragma once
// ============================================================================
// statistics.hpp - flow statistics, dissipation rates, ensemble diagnostics
//
// Everything here is a pure function of discrete fields, evaluated with the
// degree-6 quadrature rule (exact for the quadratic velocity, so algebraic
// identities such as the variance identity hold to rounding).
// ============================================================================

#include "penflow/space.hpp"

#include <map>
#include <vector>

namespace penflow {

// Sentinel member index for ensemble-mean rows in record streams / CSV.
constexpr int kMeanMember = -1;

struct StatRecord {
    double t = 0.0;
    int member = 0;  // member index, or kMeanMember for the ensemble-mean row
    double kinetic_energy = 0.0;
    double enstrophy = 0.0;
    double angular_momentum_abs = 0.0;
    double div_l2 = 0.0;
    double viscous_dissipation = 0.0;
    double be_dissipation = 0.0;
    double penalty_dissipation = 0.0;
    double spread = 0.0;   // populated on mean rows only
    double std_dev = 0.0;  // populated on mean rows only
};

// Pointwise-field statistics:
//   kinetic energy        ½ ‖u‖²
//   enstrophy             ½ ν ‖∇×u‖²  (scalar curl ∂u2/∂x − ∂u1/∂y)
//   |angular momentum|    |∫ (x·u2 − y·u1)|
//   div_l2                ‖∇·u‖
//   viscous dissipation   ν ‖∇u‖²
struct FlowStats {
    double kinetic_energy = 0.0;
    double enstrophy = 0.0;
    double angular_momentum_abs = 0.0;
    double div_l2 = 0.0;
    double viscous_dissipation = 0.0;
};
FlowStats flow_stats(const FunctionSpace& space, const CoefficientVector& u, double nu);

// Numerical dissipation rates of one accepted step:
//   be      ‖u_new − u_old‖² / dt      (backward-Euler increment dissipation)
//   penalty ‖∇·u_new‖² / epsilon       (incompressibility-penalty dissipation)
struct DissipationRates {
    double be = 0.0;
    double penalty = 0.0;
};
DissipationRates numerical_dissipation(const FunctionSpace& space, const CoefficientVector& u_new,
                                       const CoefficientVector& u_old, double dt, double epsilon);

// Ensemble mean, spread, standard deviation, and the variance identity
// residual |(1/J)Σ‖u_j−mean‖² − ((1/J)Σ‖u_j‖² − ‖mean‖²)|. The identity holds
// algebraically for any quadrature-induced norm, so the residual is rounding
// noise. spread uses the two-member form ‖u₁−u₂‖/‖mean‖ when J = 2 and
// std_dev/‖mean‖ otherwise; when ‖mean‖ = 0 the spread is reported as 0 with
// spread_defined = false.
struct EnsembleDiagnostics {
    CoefficientVector mean;
    double spread = 0.0;
    double std_dev = 0.0;
    double variance_identity_residual = 0.0;
    bool spread_defined = true;
};
EnsembleDiagnostics ensemble_diagnostics(const FunctionSpace& space,
                                         const std::vector<CoefficientVector>& members);

// Deviation about an arbitrary reference field: √((1/J) Σ_j ‖u_j − ref‖²).
double deviation_about(const FunctionSpace& space, const std::vector<CoefficientVector>& members,
                       const CoefficientVector& ref);

// Monte Carlo statistical-error table: one entry per ensemble size, mean of
// ‖sample average − reference‖² over all runs sharing that size.
struct SampleAverage {
    int members = 0;  // ensemble size J that produced this sample average
    CoefficientVector mean;
};
std::map<int, double> statistical_error_estimate(const FunctionSpace& space,
                                                 const std::vector<SampleAverage>& runs,
                                                 const CoefficientVector& reference);

}  // namespace penflow
