#pragma once
// ============================================================================
// mesh.hpp - 2D conforming triangulations with tagged boundary edges
//
// Meshes come from two sources: the structured unit-square generator used by
// the convergence studies, and ASCII Gmsh 2.2 files for the non-trivial
// geometries (disk with rotors, channel with a cylinder). Both produce the
// same plain struct:
//
//   * vertices            - coordinates, 0-based indexing
//   * triangles           - vertex triples, counterclockwise orientation
//   * boundary_edges      - vertex pairs with an integer tag; each listed
//                           edge is owned by exactly one triangle
//   * tags                - optional tag -> label map ($PhysicalNames)
//   * skipped_elements    - count of element records the reader ignored
// ============================================================================

#include "penflow/common.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace penflow {

struct BoundaryEdge {
    std::array<int, 2> vertices;
    int tag = 0;
};

struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    std::map<int, std::string> tags;
    int skipped_elements = 0;
};

// Structured triangulation of [0,1]^2: (g+1)^2 vertices on a uniform lattice
// (row-major, x fastest), each of the g^2 cells split along the diagonal from
// its lower-left to its upper-right corner. All four sides carry tag 1.
// Throws DomainError for g < 1.
Mesh generate_unit_square(int g);

// Reads the ASCII Gmsh 2.2 subset: $MeshFormat, optional $PhysicalNames,
// $Nodes, $Elements. Element type 1 (2-node line) becomes a tagged boundary
// edge, type 2 (3-node triangle) a triangle; anything else is counted in
// skipped_elements. Node ids may be sparse; they are remapped to dense
// 0-based indices in order of appearance. Unrecognized sections are skipped
// wholesale. Throws ParseError (with line number) on malformed input and
// DomainError if the result fails validate_mesh().
Mesh read_msh(std::istream& in);
Mesh read_msh_file(const std::string& path);

// Longest edge over all triangles. Throws DomainError on an empty mesh.
double mesh_size(const Mesh& mesh);

// Signed area is positive for the counterclockwise triangles validate_mesh()
// enforces; this returns the (positive) area of triangle t.
double triangle_area(const Mesh& mesh, int t);

// Checks the structural invariants: at least one triangle, vertex indices in
// range, strictly positive triangle areas (counterclockwise orientation),
// edge-conformity (every interior edge shared by exactly two triangles), and
// that every listed boundary edge is an edge of exactly one triangle and is
// listed only once. Throws DomainError describing the first violation.
void validate_mesh(const Mesh& mesh);

}  // namespace penflow
