#pragma once
// ============================================================================
// space.hpp - Taylor-Hood elements: dof maps, quadrature, assembly, norms
//
// Velocity is continuous piecewise-quadratic (P2, nodes at vertices and edge
// midpoints, two components per node), pressure continuous piecewise-linear
// (P1, nodes at vertices). This pair satisfies the discrete inf-sup
// condition, so the penalized saddle-point systems are uniformly solvable.
//
// Scalar P2 node numbering: vertices first (mesh order), then edge midpoints
// with edges sorted by their (min,max) vertex pair. Velocity dof of node k,
// component c, is 2k + c. Pressure dof of vertex v is v.
// ============================================================================

#include "penflow/linalg.hpp"
#include "penflow/mesh.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace penflow {

enum class SpaceKind { velocity, pressure };

struct CoefficientVector {
    SpaceKind kind = SpaceKind::velocity;
    std::vector<double> values;
};

// Symmetric triangle quadrature in barycentric coordinates; weights sum to 1,
// so ∫_T f = area(T) · Σ w_i f(p_i). The 7-point rule is exact to degree 5
// (enough for every P2×P2×∇P2 assembly product); the 12-point rule is exact
// to degree 6 and used for norms and error integrals.
struct QuadPoint {
    double l1, l2, l3, w;
};
const std::vector<QuadPoint>& quadrature_degree5();
const std::vector<QuadPoint>& quadrature_degree6();

struct FunctionSpace {
    std::shared_ptr<const Mesh> mesh;
    int n_vertices = 0;
    int n_edges = 0;
    // Undirected edges as (min,max) vertex pairs in lexicographic order;
    // edge e owns scalar node n_vertices + e.
    std::vector<std::array<int, 2>> edges;
    // Per triangle: scalar nodes v0, v1, v2, mid(v0,v1), mid(v1,v2), mid(v2,v0).
    std::vector<std::array<int, 6>> cell_nodes;
    // Coordinates of all scalar nodes: vertices, then edge midpoints.
    std::vector<Vec2> node_coords;
    // Boundary tag -> sorted unique velocity dof indices (both components of
    // every node on an edge carrying that tag).
    std::map<int, std::vector<int>> dirichlet_sets;

    int n_scalar_nodes() const { return n_vertices + n_edges; }
    int n_velocity_dofs() const { return 2 * n_scalar_nodes(); }
    int n_pressure_dofs() const { return n_vertices; }
};

// Deterministic dof construction (two calls on one mesh give identical maps).
FunctionSpace build_taylor_hood(Mesh mesh);

CoefficientVector zero_velocity(const FunctionSpace& space);
CoefficientVector zero_pressure(const FunctionSpace& space);

// --------------------------------------------------------------------------
// Element-level helpers (shared by assembly, norms, statistics, and tests).
// --------------------------------------------------------------------------

struct ElementGeometry {
    std::array<Vec2, 3> corners;
    double area;
    // Gradients of the barycentric coordinates λ_i (constant per triangle):
    // ∇λ_i = rot90(p_{i+2} − p_{i+1}) / (2·area), rot90(x,y) = (−y, x).
    std::array<Vec2, 3> grad_lambda;
};
ElementGeometry element_geometry(const FunctionSpace& space, int t);

// P2 basis on the reference order of cell_nodes:
//   vertex functions λ_i(2λ_i − 1), edge functions 4λ_iλ_j.
std::array<double, 6> p2_values(double l1, double l2, double l3);
std::array<Vec2, 6> p2_gradients(double l1, double l2, double l3,
                                 const std::array<Vec2, 3>& grad_lambda);

// --------------------------------------------------------------------------
// Operator assembly
// --------------------------------------------------------------------------

// The member-independent operators of the scheme, assembled once per space:
//   M     velocity mass              (u, v)
//   K     velocity stiffness         (∇u, ∇v)          (ν applied at system build)
//   B     divergence coupling        (q, ∇·u)           pressure rows × velocity cols
//   Mp    pressure mass              (p, q)             (ε applied at system build)
//   C_rot weak rotation              ((−u2, u1), v)     Coriolis coupling, exactly skew
struct ConstantOperators {
    SparseMatrix M, K, B, Mp, C_rot;
};
ConstantOperators assemble_constant_operators(const FunctionSpace& space);

// Convection linearized about a transporting field a (the ensemble mean):
//   wᵀ N(a) v = (a·∇v, w) + ½((∇·a) v, w),
// the skew-symmetric form b*(a, v, w); the ½(∇·a) term keeps b*(a, v, v) = 0
// for v vanishing on the boundary even when a is not discretely solenoidal.
// Identical scalar blocks act on both velocity components.
SparseMatrix assemble_mean_convection(const FunctionSpace& space, const CoefficientVector& mean);

// Load vector of the explicit fluctuation term: r_i = b*(fluct, carrier, φ_i),
// with the same quadrature as assemble_mean_convection.
CoefficientVector apply_fluctuation_convection(const FunctionSpace& space,
                                               const CoefficientVector& fluct,
                                               const CoefficientVector& carrier);

// --------------------------------------------------------------------------
// Interpolation, loads, norms
// --------------------------------------------------------------------------

using VectorField = std::function<Vec2(const Vec2&)>;
using ScalarField = std::function<double(const Vec2&)>;
// Velocity Jacobian, row-major: {∂u1/∂x, ∂u1/∂y, ∂u2/∂x, ∂u2/∂y}.
using TensorField = std::function<std::array<double, 4>(const Vec2&)>;

// Nodal interpolation at all P2 nodes (velocity) / vertices (pressure).
CoefficientVector interpolate(const FunctionSpace& space, const VectorField& f);
CoefficientVector interpolate_pressure(const FunctionSpace& space, const ScalarField& f);

// Right-hand-side load r_i = ∫ f · φ_i (degree-5 quadrature).
CoefficientVector assemble_load(const FunctionSpace& space, const VectorField& f);

// L2 and H1-seminorm of a discrete velocity and of its deviation from an
// analytic field, all by degree-6 quadrature (exact for the discrete norms).
struct Norms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double div_l2 = 0.0;
    double l2_error = 0.0;       // 0 when no exact field is supplied
    double h1_semi_error = 0.0;  // 0 when no exact field is supplied
};
struct ExactField {
    VectorField value;
    TensorField gradient;
};
Norms compute_norms(const FunctionSpace& space, const CoefficientVector& u,
                    const ExactField* exact = nullptr);

}  // namespace penflow
