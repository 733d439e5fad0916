#include "support.hpp"

#include "penflow/statistics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#ifndef PENFLOW_DATA_DIR
#define PENFLOW_DATA_DIR "data"
#endif

namespace penflow::testing {

std::string data_path(const std::string& relative) {
    return std::string(PENFLOW_DATA_DIR) + "/" + relative;
}

Mesh triangle_mesh(const Vec2& a, const Vec2& b, const Vec2& c) {
    Mesh m;
    m.vertices = {a, b, c};
    m.triangles = {{0, 1, 2}};
    m.boundary_edges = {{{0, 1}, 1}, {{1, 2}, 1}, {{2, 0}, 1}};
    validate_mesh(m);
    return m;
}

Mesh single_triangle_mesh() { return triangle_mesh({0, 0}, {1, 0}, {0, 2}); }

std::string write_msh_text(const Mesh& mesh, long first_node_id) {
    std::ostringstream out;
    out.precision(17);
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    if (!mesh.tags.empty()) {
        out << "$PhysicalNames\n" << mesh.tags.size() << "\n";
        for (const auto& [tag, name] : mesh.tags) out << "1 " << tag << " \"" << name << "\"\n";
        out << "$EndPhysicalNames\n";
    }
    out << "$Nodes\n" << mesh.vertices.size() << "\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        out << (first_node_id + static_cast<long>(i)) << ' ' << mesh.vertices[i].x << ' '
            << mesh.vertices[i].y << " 0\n";
    out << "$EndNodes\n";
    out << "$Elements\n" << (mesh.boundary_edges.size() + mesh.triangles.size()) << "\n";
    long id = 1;
    for (const BoundaryEdge& e : mesh.boundary_edges)
        out << id++ << " 1 2 " << e.tag << ' ' << e.tag << ' '
            << (first_node_id + e.vertices[0]) << ' ' << (first_node_id + e.vertices[1]) << '\n';
    for (const auto& t : mesh.triangles)
        out << id++ << " 2 2 0 1 " << (first_node_id + t[0]) << ' ' << (first_node_id + t[1])
            << ' ' << (first_node_id + t[2]) << '\n';
    out << "$EndElements\n";
    return out.str();
}

// --------------------------------------------------------------------------
// Quadrature
// --------------------------------------------------------------------------

GaussRule gauss_legendre_01(int n) {
    GaussRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    // Newton iteration on the Legendre polynomial over [-1, 1].
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        rule.points[i] = 0.5 * (x + 1.0);
        rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

double integrate_triangle(const std::array<Vec2, 3>& corners,
                          const std::function<double(const Vec2&)>& f, int n) {
    static const GaussRule rule12 = gauss_legendre_01(12);
    const GaussRule rule = (n == 12) ? rule12 : gauss_legendre_01(n);
    const Vec2 a = corners[0], b = corners[1], c = corners[2];
    const double twice_area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    double sum = 0.0;
    // Duffy collapse: (s, t) in [0,1]^2 -> barycentric (1-s, s(1-t), st),
    // Jacobian 2*area*s.
    for (int i = 0; i < n; ++i) {
        const double s = rule.points[i];
        for (int j = 0; j < n; ++j) {
            const double t = rule.points[j];
            const double l1 = 1.0 - s, l2 = s * (1.0 - t), l3 = s * t;
            const Vec2 p{l1 * a.x + l2 * b.x + l3 * c.x, l1 * a.y + l2 * b.y + l3 * c.y};
            sum += rule.weights[i] * rule.weights[j] * s * f(p);
        }
    }
    return twice_area * sum;
}

// --------------------------------------------------------------------------
// Independent P2 shapes
// --------------------------------------------------------------------------

std::array<double, 3> barycentric(const std::array<Vec2, 3>& corners, const Vec2& p) {
    const Vec2 a = corners[0], b = corners[1], c = corners[2];
    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double l2 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    const double l3 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    return {1.0 - l2 - l3, l2, l3};
}

std::array<double, 6> p2_shape(const std::array<double, 3>& l) {
    return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
            4 * l[0] * l[1],       4 * l[1] * l[2],       4 * l[2] * l[0]};
}

std::array<Vec2, 6> p2_shape_gradient(const std::array<double, 3>& l,
                                      const std::array<Vec2, 3>& corners) {
    const Vec2 a = corners[0], b = corners[1], c = corners[2];
    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const std::array<Vec2, 3> gl = {Vec2{(b.y - c.y) / det, (c.x - b.x) / det},
                                    Vec2{(c.y - a.y) / det, (a.x - c.x) / det},
                                    Vec2{(a.y - b.y) / det, (b.x - a.x) / det}};
    std::array<Vec2, 6> g;
    for (int i = 0; i < 3; ++i)
        g[i] = {(4 * l[i] - 1) * gl[i].x, (4 * l[i] - 1) * gl[i].y};
    const auto edge = [&](int i, int j) {
        return Vec2{4 * (l[i] * gl[j].x + l[j] * gl[i].x), 4 * (l[i] * gl[j].y + l[j] * gl[i].y)};
    };
    g[3] = edge(0, 1);
    g[4] = edge(1, 2);
    g[5] = edge(2, 0);
    return g;
}

Vec2 velocity_at(const FunctionSpace& space, const CoefficientVector& u, int t, const Vec2& p) {
    const auto& tri = space.mesh->triangles[t];
    const std::array<Vec2, 3> corners = {space.mesh->vertices[tri[0]],
                                         space.mesh->vertices[tri[1]],
                                         space.mesh->vertices[tri[2]]};
    const auto shape = p2_shape(barycentric(corners, p));
    Vec2 value{0, 0};
    for (int i = 0; i < 6; ++i) {
        const int node = space.cell_nodes[t][i];
        value.x += shape[i] * u.values[2 * node];
        value.y += shape[i] * u.values[2 * node + 1];
    }
    return value;
}

std::array<double, 4> velocity_gradient_at(const FunctionSpace& space, const CoefficientVector& u,
                                           int t, const Vec2& p) {
    const auto& tri = space.mesh->triangles[t];
    const std::array<Vec2, 3> corners = {space.mesh->vertices[tri[0]],
                                         space.mesh->vertices[tri[1]],
                                         space.mesh->vertices[tri[2]]};
    const auto grads = p2_shape_gradient(barycentric(corners, p), corners);
    std::array<double, 4> g{0, 0, 0, 0};
    for (int i = 0; i < 6; ++i) {
        const int node = space.cell_nodes[t][i];
        const double ux = u.values[2 * node], uy = u.values[2 * node + 1];
        g[0] += ux * grads[i].x;
        g[1] += ux * grads[i].y;
        g[2] += uy * grads[i].x;
        g[3] += uy * grads[i].y;
    }
    return g;
}

// --------------------------------------------------------------------------
// Dense reference solver
// --------------------------------------------------------------------------

std::vector<double> dense_backward_euler(const FunctionSpace& space, const SchemeParams& params,
                                         const std::vector<double>& u0,
                                         const TimeVectorField& force,
                                         const std::map<int, TimeVectorField>& bc, int n_steps) {
    const int nv = space.n_velocity_dofs();
    const int np = space.n_pressure_dofs();
    const int n = nv + np;
    const int n_cells = static_cast<int>(space.mesh->triangles.size());
    const GaussRule rule = gauss_legendre_01(6);

    // Constrained velocity dofs, with the winning tag data (highest tag on
    // shared corners, matching the solver's convention).
    std::vector<int> constrained_tag(nv, 0);
    std::vector<char> constrained(nv, 0);
    for (const auto& [tag, dofs] : bc) {
        const auto it = space.dirichlet_sets.find(tag);
        if (it == space.dirichlet_sets.end()) continue;
        for (const int d : it->second) {
            constrained[d] = 1;
            constrained_tag[d] = tag;
        }
    }

    // Per-cell quadrature points and shape tables (geometry never changes).
    struct CellData {
        std::array<Vec2, 3> corners;
        double twice_area;
        std::vector<Vec2> points;       // physical quadrature points
        std::vector<double> weights;    // includes Jacobian
        std::vector<std::array<double, 6>> shapes;
        std::vector<std::array<Vec2, 6>> grads;
    };
    std::vector<CellData> cells(n_cells);
    for (int t = 0; t < n_cells; ++t) {
        const auto& tri = space.mesh->triangles[t];
        CellData& cd = cells[t];
        cd.corners = {space.mesh->vertices[tri[0]], space.mesh->vertices[tri[1]],
                      space.mesh->vertices[tri[2]]};
        const Vec2 a = cd.corners[0], b = cd.corners[1], c = cd.corners[2];
        cd.twice_area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        for (std::size_t i = 0; i < rule.points.size(); ++i)
            for (std::size_t j = 0; j < rule.points.size(); ++j) {
                const double s = rule.points[i], tt = rule.points[j];
                const std::array<double, 3> l = {1.0 - s, s * (1.0 - tt), s * tt};
                cd.points.push_back({l[0] * a.x + l[1] * b.x + l[2] * c.x,
                                     l[0] * a.y + l[1] * b.y + l[2] * c.y});
                cd.weights.push_back(rule.weights[i] * rule.weights[j] * s * cd.twice_area);
                cd.shapes.push_back(p2_shape(l));
                cd.grads.push_back(p2_shape_gradient(l, cd.corners));
            }
    }

    Eigen::VectorXd u = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < nv; ++i) u(i) = u0[i];

    double t_now = 0.0;
    for (int step = 0; step < n_steps; ++step) {
        const double t_new = t_now + params.dt0;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

        for (int t = 0; t < n_cells; ++t) {
            const CellData& cd = cells[t];
            const auto& nodes = space.cell_nodes[t];
            for (std::size_t q = 0; q < cd.points.size(); ++q) {
                const double w = cd.weights[q];
                const auto& sh = cd.shapes[q];
                const auto& gr = cd.grads[q];
                // Transporting field = current velocity (single member: the
                // ensemble mean is the member itself).
                Vec2 a{0, 0};
                double div_a = 0.0;
                for (int i = 0; i < 6; ++i) {
                    a.x += sh[i] * u(2 * nodes[i]);
                    a.y += sh[i] * u(2 * nodes[i] + 1);
                    div_a += gr[i].x * u(2 * nodes[i]) + gr[i].y * u(2 * nodes[i] + 1);
                }
                const Vec2 f = force(cd.points[q], t_new);
                for (int i = 0; i < 6; ++i) {
                    const int ri = nodes[i];
                    rhs(2 * ri) += w * f.x * sh[i];
                    rhs(2 * ri + 1) += w * f.y * sh[i];
                    for (int j = 0; j < 6; ++j) {
                        const int cj = nodes[j];
                        const double mass = w * sh[i] * sh[j];
                        const double stiff = w * (gr[i].x * gr[j].x + gr[i].y * gr[j].y);
                        // (a . grad phi_j) phi_i + (div a / 2) phi_j phi_i
                        const double conv =
                            w * sh[i] * ((a.x * gr[j].x + a.y * gr[j].y) + 0.5 * div_a * sh[j]);
                        const double diag = mass / params.dt0 + params.nu * stiff + conv;
                        A(2 * ri, 2 * cj) += diag;
                        A(2 * ri + 1, 2 * cj + 1) += diag;
                        // omega ((-u2, u1), v)
                        A(2 * ri, 2 * cj + 1) += -params.omega * mass;
                        A(2 * ri + 1, 2 * cj) += params.omega * mass;
                        rhs(2 * ri) += mass / params.dt0 * u(2 * cj);
                        rhs(2 * ri + 1) += mass / params.dt0 * u(2 * cj + 1);
                    }
                    // Pressure coupling: rows (q, div u), columns -(p, div v).
                    for (int k = 0; k < 3; ++k) {
                        const int pk = space.mesh->triangles[t][k];
                        const double lin = [&] {
                            const auto l = barycentric(cd.corners, cd.points[q]);
                            return l[k];
                        }();
                        A(nv + pk, 2 * ri) += w * lin * gr[i].x;
                        A(nv + pk, 2 * ri + 1) += w * lin * gr[i].y;
                        A(2 * ri, nv + pk) -= w * lin * gr[i].x;
                        A(2 * ri + 1, nv + pk) -= w * lin * gr[i].y;
                    }
                }
                // Pressure mass block, epsilon (p, q).
                const auto l = barycentric(cd.corners, cd.points[q]);
                for (int k = 0; k < 3; ++k)
                    for (int m = 0; m < 3; ++m)
                        A(nv + space.mesh->triangles[t][k], nv + space.mesh->triangles[t][m]) +=
                            params.epsilon * w * l[k] * l[m];
            }
        }

        // Dirichlet rows: identity with the prescribed value (node dof -> its
        // coordinate; dof 2k is the x component of node k).
        for (int d = 0; d < nv; ++d) {
            if (!constrained[d]) continue;
            A.row(d).setZero();
            A(d, d) = 1.0;
            const Vec2 x = space.node_coords[d / 2];
            const Vec2 g = bc.at(constrained_tag[d])(x, t_new);
            rhs(d) = (d % 2 == 0) ? g.x : g.y;
        }

        const Eigen::VectorXd sol = A.partialPivLu().solve(rhs);
        u = sol.head(nv);
        t_now = t_new;
    }

    std::vector<double> out(nv);
    for (int i = 0; i < nv; ++i) out[i] = u(i);
    return out;
}

// --------------------------------------------------------------------------
// Random fields
// --------------------------------------------------------------------------

CoefficientVector random_velocity(const FunctionSpace& space, std::mt19937_64& rng,
                                  double amplitude) {
    CoefficientVector u = zero_velocity(space);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (double& v : u.values) v = dist(rng);
    return u;
}

CoefficientVector random_interior_velocity(const FunctionSpace& space, std::mt19937_64& rng,
                                           double amplitude) {
    CoefficientVector u = random_velocity(space, rng, amplitude);
    for (const auto& [tag, dofs] : space.dirichlet_sets)
        for (const int d : dofs) u.values[d] = 0.0;
    return u;
}

double l2_difference(const FunctionSpace& space, const CoefficientVector& a,
                     const CoefficientVector& b) {
    CoefficientVector d = a;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
    return compute_norms(space, d).l2;
}

}  // namespace penflow::testing
