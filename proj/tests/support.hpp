#pragma once
// Shared test helpers: paths to bundled data, tiny meshes, an independent
// high-order quadrature (Gauss-Legendre x Duffy), an independently coded
// dense backward-Euler reference solver, and small random-field utilities.

#include "penflow/experiments.hpp"
#include "penflow/mesh.hpp"
#include "penflow/space.hpp"
#include "penflow/stepper.hpp"

#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace penflow::testing {

// Absolute path into the repository's bundled data directory.
std::string data_path(const std::string& relative);

// Triangle (0,0), (1,0), (0,2) with its three edges tagged 1.
Mesh single_triangle_mesh();

// Mesh with the given corners (counterclockwise), edges tagged 1.
Mesh triangle_mesh(const Vec2& a, const Vec2& b, const Vec2& c);

// Serializes a mesh in the ASCII MSH v2.2 subset the reader understands.
// Node ids start at `first_node_id` (to exercise sparse-id remapping).
std::string write_msh_text(const Mesh& mesh, long first_node_id = 1);

// --------------------------------------------------------------------------
// Independent quadrature: tensor Gauss-Legendre collapsed onto the triangle
// (Duffy transform). With n = 12 points per axis this integrates far beyond
// polynomial degree 10, so it serves as the oracle for the assembly rules.
// --------------------------------------------------------------------------

// Gauss-Legendre nodes/weights on [0, 1].
struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};
GaussRule gauss_legendre_01(int n);

double integrate_triangle(const std::array<Vec2, 3>& corners,
                          const std::function<double(const Vec2&)>& f, int n = 12);

// --------------------------------------------------------------------------
// Independent P2 evaluation (closed forms, no dependence on space.cpp).
// Node order matches FunctionSpace::cell_nodes: v0, v1, v2, m01, m12, m20.
// --------------------------------------------------------------------------

std::array<double, 3> barycentric(const std::array<Vec2, 3>& corners, const Vec2& p);
std::array<double, 6> p2_shape(const std::array<double, 3>& lambda);
std::array<Vec2, 6> p2_shape_gradient(const std::array<double, 3>& lambda,
                                      const std::array<Vec2, 3>& corners);

// Velocity field value / Jacobian of a discrete velocity at a physical point
// inside triangle t, evaluated with the independent shape functions.
Vec2 velocity_at(const FunctionSpace& space, const CoefficientVector& u, int t, const Vec2& p);
std::array<double, 4> velocity_gradient_at(const FunctionSpace& space, const CoefficientVector& u,
                                           int t, const Vec2& p);

// --------------------------------------------------------------------------
// Independently coded reference solver: linearly-implicit penalized
// backward Euler for one velocity (dense LU, independent quadrature and
// shape functions). Advances n_steps of size params.dt0 from u0 and returns
// the final velocity coefficients in the space's dof layout.
// --------------------------------------------------------------------------

std::vector<double> dense_backward_euler(const FunctionSpace& space, const SchemeParams& params,
                                         const std::vector<double>& u0,
                                         const TimeVectorField& force,
                                         const std::map<int, TimeVectorField>& bc, int n_steps);

// --------------------------------------------------------------------------
// Random fields and comparisons
// --------------------------------------------------------------------------

CoefficientVector random_velocity(const FunctionSpace& space, std::mt19937_64& rng,
                                  double amplitude = 1.0);

// Random velocity that vanishes on every tagged boundary dof.
CoefficientVector random_interior_velocity(const FunctionSpace& space, std::mt19937_64& rng,
                                           double amplitude = 1.0);

// L2 norm of (a - b) over the space.
double l2_difference(const FunctionSpace& space, const CoefficientVector& a,
                     const CoefficientVector& b);

}  // namespace penflow::testing
