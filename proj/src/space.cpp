// ============================================================================
// space.cpp - Taylor-Hood dof maps, quadrature tables, assembly, norms
// ============================================================================

#include "penflow/space.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace penflow {

namespace {

void check_velocity(const FunctionSpace& space, const CoefficientVector& u, const char* where) {
    if (u.kind != SpaceKind::velocity ||
        static_cast<int>(u.values.size()) != space.n_velocity_dofs())
        throw DimensionError(std::string(where) + ": expected a velocity vector of length " +
                             std::to_string(space.n_velocity_dofs()) + ", got length " +
                             std::to_string(u.values.size()));
}

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

// Dunavant 7-point rule, exact to degree 5. One centroid point plus two
// 3-point orbits at a = (6−√15)/21 and b = (6+√15)/21 with weights
// (155∓√15)/1200.
const std::vector<QuadPoint>& quadrature_degree5() {
    static const std::vector<QuadPoint> rule = [] {
        const double s15 = std::sqrt(15.0);
        const double a = (6.0 - s15) / 21.0, wa = (155.0 - s15) / 1200.0;
        const double b = (6.0 + s15) / 21.0, wb = (155.0 + s15) / 1200.0;
        std::vector<QuadPoint> r;
        r.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
        r.push_back({1.0 - 2.0 * a, a, a, wa});
        r.push_back({a, 1.0 - 2.0 * a, a, wa});
        r.push_back({a, a, 1.0 - 2.0 * a, wa});
        r.push_back({1.0 - 2.0 * b, b, b, wb});
        r.push_back({b, 1.0 - 2.0 * b, b, wb});
        r.push_back({b, b, 1.0 - 2.0 * b, wb});
        return r;
    }();
    return rule;
}

// Dunavant 12-point rule, exact to degree 6: two 3-point orbits and one
// 6-point orbit.
const std::vector<QuadPoint>& quadrature_degree6() {
    static const std::vector<QuadPoint> rule = [] {
        const double a = 0.063089014491502, wa = 0.050844906370207;
        const double b = 0.249286745170910, wb = 0.116786275726379;
        const double c = 0.310352451033785, d = 0.053145049844816, wc = 0.082851075618374;
        const double e = 1.0 - c - d;
        std::vector<QuadPoint> r;
        r.push_back({1.0 - 2.0 * a, a, a, wa});
        r.push_back({a, 1.0 - 2.0 * a, a, wa});
        r.push_back({a, a, 1.0 - 2.0 * a, wa});
        r.push_back({1.0 - 2.0 * b, b, b, wb});
        r.push_back({b, 1.0 - 2.0 * b, b, wb});
        r.push_back({b, b, 1.0 - 2.0 * b, wb});
        r.push_back({e, c, d, wc});
        r.push_back({e, d, c, wc});
        r.push_back({c, e, d, wc});
        r.push_back({d, e, c, wc});
        r.push_back({c, d, e, wc});
        r.push_back({d, c, e, wc});
        return r;
    }();
    return rule;
}

FunctionSpace build_taylor_hood(Mesh mesh) {
    validate_mesh(mesh);

    FunctionSpace space;
    space.mesh = std::make_shared<const Mesh>(std::move(mesh));
    const Mesh& m = *space.mesh;
    space.n_vertices = static_cast<int>(m.vertices.size());

    // Collect undirected edges, sort by (min,max) pair for a deterministic
    // numbering independent of triangle order.
    space.edges.reserve(m.triangles.size() * 3 / 2);
    for (const auto& tri : m.triangles)
        for (int k = 0; k < 3; ++k) {
            int a = tri[static_cast<std::size_t>(k)], b = tri[static_cast<std::size_t>((k + 1) % 3)];
            if (a > b) std::swap(a, b);
            space.edges.push_back({a, b});
        }
    std::sort(space.edges.begin(), space.edges.end());
    space.edges.erase(std::unique(space.edges.begin(), space.edges.end()), space.edges.end());
    space.n_edges = static_cast<int>(space.edges.size());

    std::unordered_map<std::uint64_t, int> edge_id;
    edge_id.reserve(space.edges.size());
    for (int e = 0; e < space.n_edges; ++e)
        edge_id.emplace(edge_key(space.edges[static_cast<std::size_t>(e)][0],
                                 space.edges[static_cast<std::size_t>(e)][1]),
                        e);

    space.cell_nodes.reserve(m.triangles.size());
    for (const auto& tri : m.triangles) {
        std::array<int, 6> nodes{};
        for (int k = 0; k < 3; ++k) nodes[static_cast<std::size_t>(k)] = tri[static_cast<std::size_t>(k)];
        for (int k = 0; k < 3; ++k)
            nodes[static_cast<std::size_t>(3 + k)] =
                space.n_vertices +
                edge_id.at(edge_key(tri[static_cast<std::size_t>(k)], tri[static_cast<std::size_t>((k + 1) % 3)]));
        space.cell_nodes.push_back(nodes);
    }

    space.node_coords.reserve(static_cast<std::size_t>(space.n_scalar_nodes()));
    space.node_coords.assign(m.vertices.begin(), m.vertices.end());
    for (const auto& e : space.edges) {
        const Vec2& a = m.vertices[static_cast<std::size_t>(e[0])];
        const Vec2& b = m.vertices[static_cast<std::size_t>(e[1])];
        space.node_coords.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    }

    for (const auto& be : m.boundary_edges) {
        auto& dofs = space.dirichlet_sets[be.tag];
        const int mid = space.n_vertices + edge_id.at(edge_key(be.vertices[0], be.vertices[1]));
        for (int node : {be.vertices[0], be.vertices[1], mid}) {
            dofs.push_back(2 * node);
            dofs.push_back(2 * node + 1);
        }
    }
    for (auto& [tag, dofs] : space.dirichlet_sets) {
        std::sort(dofs.begin(), dofs.end());
        dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    }

    return space;
}

CoefficientVector zero_velocity(const FunctionSpace& space) {
    return {SpaceKind::velocity, std::vector<double>(static_cast<std::size_t>(space.n_velocity_dofs()), 0.0)};
}

CoefficientVector zero_pressure(const FunctionSpace& space) {
    return {SpaceKind::pressure, std::vector<double>(static_cast<std::size_t>(space.n_pressure_dofs()), 0.0)};
}

ElementGeometry element_geometry(const FunctionSpace& space, int t) {
    const Mesh& m = *space.mesh;
    if (t < 0 || t >= static_cast<int>(m.triangles.size()))
        throw DomainError("element_geometry: triangle index out of range");
    const auto& tri = m.triangles[static_cast<std::size_t>(t)];
    ElementGeometry g;
    for (int k = 0; k < 3; ++k) g.corners[static_cast<std::size_t>(k)] = m.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
    const Vec2 &p0 = g.corners[0], &p1 = g.corners[1], &p2 = g.corners[2];
    g.area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
    const double inv2A = 1.0 / (2.0 * g.area);
    // ∇λ_i = rot90(p_{i+2} − p_{i+1}) / (2A)
    g.grad_lambda[0] = {-(p2.y - p1.y) * inv2A, (p2.x - p1.x) * inv2A};
    g.grad_lambda[1] = {-(p0.y - p2.y) * inv2A, (p0.x - p2.x) * inv2A};
    g.grad_lambda[2] = {-(p1.y - p0.y) * inv2A, (p1.x - p0.x) * inv2A};
    return g;
}

std::array<double, 6> p2_values(double l1, double l2, double l3) {
    return {l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0), l3 * (2.0 * l3 - 1.0),
            4.0 * l1 * l2,         4.0 * l2 * l3,         4.0 * l3 * l1};
}

std::array<Vec2, 6> p2_gradients(double l1, double l2, double l3,
                                 const std::array<Vec2, 3>& gl) {
    auto scaled = [](const Vec2& v, double s) { return Vec2{s * v.x, s * v.y}; };
    auto combo = [](const Vec2& a, double sa, const Vec2& b, double sb) {
        return Vec2{sa * a.x + sb * b.x, sa * a.y + sb * b.y};
    };
    return {scaled(gl[0], 4.0 * l1 - 1.0),
            scaled(gl[1], 4.0 * l2 - 1.0),
            scaled(gl[2], 4.0 * l3 - 1.0),
            combo(gl[0], 4.0 * l2, gl[1], 4.0 * l1),
            combo(gl[1], 4.0 * l3, gl[2], 4.0 * l2),
            combo(gl[2], 4.0 * l1, gl[0], 4.0 * l3)};
}

ConstantOperators assemble_constant_operators(const FunctionSpace& space) {
    const auto& rule = quadrature_degree5();
    const int nt = static_cast<int>(space.cell_nodes.size());
    const int nu = space.n_velocity_dofs();
    const int np = space.n_pressure_dofs();

    std::vector<Triplet> tm, tk, tb, tmp, tc;
    tm.reserve(static_cast<std::size_t>(nt) * 72);
    tk.reserve(static_cast<std::size_t>(nt) * 72);
    tb.reserve(static_cast<std::size_t>(nt) * 36);
    tmp.reserve(static_cast<std::size_t>(nt) * 9);
    tc.reserve(static_cast<std::size_t>(nt) * 72);

    for (int t = 0; t < nt; ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];

        double m_loc[6][6] = {};
        double k_loc[6][6] = {};
        double b_loc[3][6][2] = {};  // pressure node q, velocity node b, component c
        double mp_loc[3][3] = {};

        for (const QuadPoint& qp : rule) {
            const double w = qp.w * g.area;
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            const auto dphi = p2_gradients(qp.l1, qp.l2, qp.l3, g.grad_lambda);
            const double lambda[3] = {qp.l1, qp.l2, qp.l3};
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) {
                    m_loc[a][b] += w * phi[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(b)];
                    k_loc[a][b] += w * (dphi[static_cast<std::size_t>(a)].x * dphi[static_cast<std::size_t>(b)].x +
                                        dphi[static_cast<std::size_t>(a)].y * dphi[static_cast<std::size_t>(b)].y);
                }
            for (int q = 0; q < 3; ++q) {
                for (int b = 0; b < 6; ++b) {
                    b_loc[q][b][0] += w * lambda[q] * dphi[static_cast<std::size_t>(b)].x;
                    b_loc[q][b][1] += w * lambda[q] * dphi[static_cast<std::size_t>(b)].y;
                }
                for (int r = 0; r < 3; ++r) mp_loc[q][r] += w * lambda[q] * lambda[r];
            }
        }

        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                const int na = nodes[static_cast<std::size_t>(a)], nb = nodes[static_cast<std::size_t>(b)];
                tm.push_back({2 * na, 2 * nb, m_loc[a][b]});
                tm.push_back({2 * na + 1, 2 * nb + 1, m_loc[a][b]});
                tk.push_back({2 * na, 2 * nb, k_loc[a][b]});
                tk.push_back({2 * na + 1, 2 * nb + 1, k_loc[a][b]});
                // Weak rotation (u1,u2) → (−u2,u1): x-rows see −u2, y-rows +u1.
                tc.push_back({2 * na, 2 * nb + 1, -m_loc[a][b]});
                tc.push_back({2 * na + 1, 2 * nb, m_loc[a][b]});
            }
        for (int q = 0; q < 3; ++q) {
            const int vq = nodes[static_cast<std::size_t>(q)];
            for (int b = 0; b < 6; ++b) {
                const int nb = nodes[static_cast<std::size_t>(b)];
                tb.push_back({vq, 2 * nb, b_loc[q][b][0]});
                tb.push_back({vq, 2 * nb + 1, b_loc[q][b][1]});
            }
            for (int r = 0; r < 3; ++r)
                tmp.push_back({vq, nodes[static_cast<std::size_t>(r)], mp_loc[q][r]});
        }
    }

    ConstantOperators ops;
    ops.M = SparseMatrix::from_triplets(nu, nu, std::move(tm));
    ops.K = SparseMatrix::from_triplets(nu, nu, std::move(tk));
    ops.B = SparseMatrix::from_triplets(np, nu, std::move(tb));
    ops.Mp = SparseMatrix::from_triplets(np, np, std::move(tmp));
    ops.C_rot = SparseMatrix::from_triplets(nu, nu, std::move(tc));
    return ops;
}

SparseMatrix assemble_mean_convection(const FunctionSpace& space, const CoefficientVector& mean) {
    check_velocity(space, mean, "assemble_mean_convection");
    const auto& rule = quadrature_degree5();
    const int nt = static_cast<int>(space.cell_nodes.size());
    const int nu = space.n_velocity_dofs();

    std::vector<Triplet> tn;
    tn.reserve(static_cast<std::size_t>(nt) * 72);

    for (int t = 0; t < nt; ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];

        double ax[6], ay[6];
        for (int b = 0; b < 6; ++b) {
            ax[b] = mean.values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)])];
            ay[b] = mean.values[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(b)] + 1)];
        }

        double n_loc[6][6] = {};
        for (const QuadPoint& qp : rule) {
            const double w = qp.w * g.area;
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            const auto dphi = p2_gradients(qp.l1, qp.l2, qp.l3, g.grad_lambda);
            double a1 = 0, a2 = 0, div_a = 0;
            for (int b = 0; b < 6; ++b) {
                a1 += ax[b] * phi[static_cast<std::size_t>(b)];
                a2 += ay[b] * phi[static_cast<std::size_t>(b)];
                div_a += ax[b] * dphi[static_cast<std::size_t>(b)].x + ay[b] * dphi[static_cast<std::size_t>(b)].y;
            }
            for (int b = 0; b < 6; ++b) {
                const double conv = a1 * dphi[static_cast<std::size_t>(b)].x + a2 * dphi[static_cast<std::size_t>(b)].y +
                                    0.5 * div_a * phi[static_cast<std::size_t>(b)];
                for (int a = 0; a < 6; ++a)
                    n_loc[a][b] += w * conv * phi[static_cast<std::size_t>(a)];
            }
        }

        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                const int na = nodes[static_cast<std::size_t>(a)], nb = nodes[static_cast<std::size_t>(b)];
                tn.push_back({2 * na, 2 * nb, n_loc[a][b]});
                tn.push_back({2 * na + 1, 2 * nb + 1, n_loc[a][b]});
            }
    }
    return SparseMatrix::from_triplets(nu, nu, std::move(tn));
}

CoefficientVector apply_fluctuation_convection(const FunctionSpace& space,
                                               const CoefficientVector& fluct,
                                               const CoefficientVector& carrier) {
    check_velocity(space, fluct, "apply_fluctuation_convection");
    check_velocity(space, carrier, "apply_fluctuation_convection");
    const auto& rule = quadrature_degree5();
    const int nt = static_cast<int>(space.cell_nodes.size());

    CoefficientVector r = zero_velocity(space);

    for (int t = 0; t < nt; ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];

        double fx[6], fy[6], cx[6], cy[6];
        for (int b = 0; b < 6; ++b) {
            const int nb = nodes[static_cast<std::size_t>(b)];
            fx[b] = fluct.values[static_cast<std::size_t>(2 * nb)];
            fy[b] = fluct.values[static_cast<std::size_t>(2 * nb + 1)];
            cx[b] = carrier.values[static_cast<std::size_t>(2 * nb)];
            cy[b] = carrier.values[static_cast<std::size_t>(2 * nb + 1)];
        }

        double rx[6] = {}, ry[6] = {};
        for (const QuadPoint& qp : rule) {
            const double w = qp.w * g.area;
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            const auto dphi = p2_gradients(qp.l1, qp.l2, qp.l3, g.grad_lambda);
            double f1 = 0, f2 = 0, div_f = 0;
            double c1 = 0, c2 = 0;
            double dc1x = 0, dc1y = 0, dc2x = 0, dc2y = 0;
            for (int b = 0; b < 6; ++b) {
                const double p = phi[static_cast<std::size_t>(b)];
                const Vec2& dp = dphi[static_cast<std::size_t>(b)];
                f1 += fx[b] * p;
                f2 += fy[b] * p;
                div_f += fx[b] * dp.x + fy[b] * dp.y;
                c1 += cx[b] * p;
                c2 += cy[b] * p;
                dc1x += cx[b] * dp.x;
                dc1y += cx[b] * dp.y;
                dc2x += cy[b] * dp.x;
                dc2y += cy[b] * dp.y;
            }
            // b*(f, c, φ) per component: (f·∇c_k + ½(∇·f) c_k) φ.
            const double e1 = f1 * dc1x + f2 * dc1y + 0.5 * div_f * c1;
            const double e2 = f1 * dc2x + f2 * dc2y + 0.5 * div_f * c2;
            for (int a = 0; a < 6; ++a) {
                rx[a] += w * e1 * phi[static_cast<std::size_t>(a)];
                ry[a] += w * e2 * phi[static_cast<std::size_t>(a)];
            }
        }
        for (int a = 0; a < 6; ++a) {
            const int na = nodes[static_cast<std::size_t>(a)];
            r.values[static_cast<std::size_t>(2 * na)] += rx[a];
            r.values[static_cast<std::size_t>(2 * na + 1)] += ry[a];
        }
    }
    return r;
}

CoefficientVector interpolate(const FunctionSpace& space, const VectorField& f) {
    CoefficientVector u = zero_velocity(space);
    for (int k = 0; k < space.n_scalar_nodes(); ++k) {
        const Vec2 v = f(space.node_coords[static_cast<std::size_t>(k)]);
        u.values[static_cast<std::size_t>(2 * k)] = v.x;
        u.values[static_cast<std::size_t>(2 * k + 1)] = v.y;
    }
    return u;
}

CoefficientVector interpolate_pressure(const FunctionSpace& space, const ScalarField& f) {
    CoefficientVector p = zero_pressure(space);
    for (int k = 0; k < space.n_pressure_dofs(); ++k)
        p.values[static_cast<std::size_t>(k)] = f(space.node_coords[static_cast<std::size_t>(k)]);
    return p;
}

CoefficientVector assemble_load(const FunctionSpace& space, const VectorField& f) {
    const auto& rule = quadrature_degree5();
    CoefficientVector r = zero_velocity(space);
    for (int t = 0; t < static_cast<int>(space.cell_nodes.size()); ++t) {
        const ElementGeometry g = element_geometry(space, t);
        const auto& nodes = space.cell_nodes[static_cast<std::size_t>(t)];
        for (const QuadPoint& qp : rule) {
            const double w = qp.w * g.area;
            const Vec2 x{qp.l1 * g.corners[0].x + qp.l2 * g.corners[1].x + qp.l3 * g.corners[2].x,
                         qp.l1 * g.corners[0].y + qp.l2 * g.corners[1].y + qp.l3 * g.corners[2].y};
            const Vec2 fv = f(x);
            const auto phi = p2_values(qp.l1, qp.l2, qp.l3);
            for (int a = 0; a < 6; ++a) {
                const int na = nodes[static_cast<std::size_t>(a)];
                r.values[static_cast<std::size_t>(2 * na)] += w * fv.x * phi[static_cast<std::size_t>(a)];
                r.values[static_cast<std::size_t>(2 * na + 1)] += w * fv.y * phi[static_cast<std::size_t>(a)];
            }
        }
    }
    return r;
}

Norms compute_norms(const FunctionSpace& space, const CoefficientVector& u,
                    const ExactField* exact) {
    check_velocity(space, u, "compute_norms");
    const auto& rule = quadrature_degree6();

    double l2 = 0, h1 = 0, div2 = 0, el2 = 0, eh1 = 0;
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
            l2 += w * (u1 * u1 + u2 * u2);
            h1 += w * (d1x * d1x + d1y * d1y + d2x * d2x + d2y * d2y);
            div2 += w * (d1x + d2y) * (d1x + d2y);
            if (exact) {
                const Vec2 x{qp.l1 * g.corners[0].x + qp.l2 * g.corners[1].x + qp.l3 * g.corners[2].x,
                             qp.l1 * g.corners[0].y + qp.l2 * g.corners[1].y + qp.l3 * g.corners[2].y};
                const Vec2 ev = exact->value(x);
                el2 += w * ((u1 - ev.x) * (u1 - ev.x) + (u2 - ev.y) * (u2 - ev.y));
                if (exact->gradient) {
                    const auto eg = exact->gradient(x);
                    eh1 += w * ((d1x - eg[0]) * (d1x - eg[0]) + (d1y - eg[1]) * (d1y - eg[1]) +
                                (d2x - eg[2]) * (d2x - eg[2]) + (d2y - eg[3]) * (d2y - eg[3]));
                }
            }
        }
    }
    Norms n;
    n.l2 = std::sqrt(l2);
    n.h1_semi = std::sqrt(h1);
    n.div_l2 = std::sqrt(div2);
    n.l2_error = std::sqrt(el2);
    n.h1_semi_error = std::sqrt(eh1);
    return n;
}

}  // namespace penflow
