// ============================================================================
// statistics.cpp - quadrature evaluation of flow and ensemble statistics
// ============================================================================

#include "penflow/statistics.hpp"

#include <cmath>

namespace penflow {

namespace {

void check_velocity(const FunctionSpace& space, const CoefficientVector& u, const char* where) {
    if (u.kind != SpaceKind::velocity ||
        static_cast<int>(u.values.size()) != space.n_velocity_dofs())
        throw DimensionError(std::string(where) + ": expected a velocity vector of length " +
                             std::to_string(space.n_velocity_dofs()));
}

// ∫ |u|² by the degree-6 rule (exact for P2 fields).
double l2_squared(const FunctionSpace& space, const std::vector<double>& values) {
    const auto& rule = quadrature_degree6();
    double acc = 0.0;
    for (int t = 0; t < static_cast<int>(space.cell_nodes.size()); ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];
        double ux[6], uy[6];
        for (int b = 0; b < 6; ++b) {
            ux[b] = values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)])];
            uy[b] = values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)] + 1)];
        }
        for (const QuadPoint& qp : rule) {
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            double u1 = 0, u2 = 0;
            for (int b = 0; b < 6; ++b) {
                u1 += ux[b] * phi[static_cast<std::size_t>(b)];
                u2 += uy[b] * phi[static_cast<std::size_t>(b)];
            }
            acc += qp.w * g.area * (u1 * u1 + u2 * u2);
        }
    }
    return acc;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

}  // namespace

FlowStats flow_stats(const FunctionSpace& space, const CoefficientVector& u, double nu) {
    check_velocity(space, u, "flow_stats");
    const auto& rule = quadrature_degree6();

    double l2 = 0, grad2 = 0, curl2 = 0, div2 = 0, angmom = 0;
    for (int t = 0; t < static_cast<int>(space.cell_nodes.size()); ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];
        double ux[6], uy[6];
        for (int b = 0; b < 6; ++b) {
            ux[b] = u.values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)])];
            uy[b] = u.values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)] + 1)];
        }
        for (const QuadPoint& qp : rule) {
            const double w = qp.w * g.area;
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            const auto dphi = p2_gradients(qp.l1, qp.l2, qp.l3, g.grad_lambda);
            double u1 = 0, u2 = 0, d1x = 0, d1y = 0, d2x = 0, d2y = 0;
            for (int b = 0; b < 6; ++b) {
                const double p = phi[static_cast<std::size_t>(b)];
                const Vec2& dp = dphi[static_cast<std::size_t>(b)];
                u1 += ux[b] * p;
                u2 += uy[b] * p;
                d1x += ux[b] * dp.x;
                d1y += ux[b] * dp.y;
                d2x += uy[b] * dp.x;
                d2y += uy[b] * dp.y;
            }
            const Vec2 x{qp.l1 * g.corners[0].x + qp.l2 * g.corners[1].x + qp.l3 * g.corners[2].x,
                         qp.l1 * g.corners[0].y + qp.l2 * g.corners[1].y + qp.l3 * g.corners[2].y};
            l2 += w * (u1 * u1 + u2 * u2);
            grad2 += w * (d1x * d1x + d1y * d1y + d2x * d2x + d2y * d2y);
            const double curl = d2x - d1y;
            curl2 += w * curl * curl;
            const double div = d1x + d2y;
            div2 += w * div * div;
            angmom += w * (x.x * u2 - x.y * u1);
        }
    }

    FlowStats s;
    s.kinetic_energy = 0.5 * l2;
    s.enstrophy = 0.5 * nu * curl2;
    s.angular_momentum_abs = std::abs(angmom);
    s.div_l2 = std::sqrt(div2);
    s.viscous_dissipation = nu * grad2;
    return s;
}

DissipationRates numerical_dissipation(const FunctionSpace& space, const CoefficientVector& u_new,
                                       const CoefficientVector& u_old, double dt, double epsilon) {
    check_velocity(space, u_new, "numerical_dissipation");
    check_velocity(space, u_old, "numerical_dissipation");
    if (dt <= 0.0 || epsilon <= 0.0)
        throw DomainError("numerical_dissipation: dt and epsilon must be positive");

    DissipationRates rates;
    rates.be = l2_squared(space, difference(u_new.values, u_old.values)) / dt;
    const Norms n = compute_norms(space, u_new);
    rates.penalty = n.div_l2 * n.div_l2 / epsilon;
    return rates;
}

EnsembleDiagnostics ensemble_diagnostics(const FunctionSpace& space,
                                         const std::vector<CoefficientVector>& members) {
    if (members.empty()) throw DomainError("ensemble_diagnostics: empty ensemble");
    for (const auto& m : members) check_velocity(space, m, "ensemble_diagnostics");
    const int J = static_cast<int>(members.size());

    EnsembleDiagnostics d;
    d.mean = zero_velocity(space);
    for (const auto& m : members)
        for (std::size_t i = 0; i < d.mean.values.size(); ++i)
            d.mean.values[i] += m.values[i] / J;

    double dev2 = 0.0, second_moment = 0.0;
    for (const auto& m : members) {
        dev2 += l2_squared(space, difference(m.values, d.mean.values)) / J;
        second_moment += l2_squared(space, m.values) / J;
    }
    const double mean_norm2 = l2_squared(space, d.mean.values);
    d.std_dev = std::sqrt(dev2);
    d.variance_identity_residual = std::abs(dev2 - (second_moment - mean_norm2));

    const double mean_norm = std::sqrt(mean_norm2);
    if (mean_norm == 0.0) {
        d.spread = 0.0;
        d.spread_defined = false;
    } else if (J == 2) {
        d.spread = std::sqrt(l2_squared(space, difference(members[0].values, members[1].values))) / mean_norm;
    } else {
        d.spread = d.std_dev / mean_norm;
    }
    return d;
}

double deviation_about(const FunctionSpace& space, const std::vector<CoefficientVector>& members,
                       const CoefficientVector& ref) {
    if (members.empty()) throw DomainError("deviation_about: empty ensemble");
    check_velocity(space, ref, "deviation_about");
    double acc = 0.0;
    for (const auto& m : members) {
        check_velocity(space, m, "deviation_about");
        acc += l2_squared(space, difference(m.values, ref.values)) / static_cast<double>(members.size());
    }
    return std::sqrt(acc);
}

std::map<int, double> statistical_error_estimate(const FunctionSpace& space,
                                                 const std::vector<SampleAverage>& runs,
                                                 const CoefficientVector& reference) {
    check_velocity(space, reference, "statistical_error_estimate");
    std::map<int, double> sum;
    std::map<int, int> count;
    for (const auto& run : runs) {
        check_velocity(space, run.mean, "statistical_error_estimate");
        if (run.members < 1)
            throw DomainError("statistical_error_estimate: sample average with nonpositive ensemble size");
        sum[run.members] += l2_squared(space, difference(run.mean.values, reference.values));
        ++count[run.members];
    }
    std::map<int, double> table;
    for (const auto& [J, total] : sum) table[J] = total / count[J];
    return table;
}

}  // namespace penflow
