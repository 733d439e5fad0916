#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "penflow/mesh.hpp"
#include "support.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace penflow;
using namespace penflow::testing;

TEST_CASE("unit square: smallest grid") {
    const Mesh m = generate_unit_square(1);
    CHECK(m.vertices.size() == 4);
    CHECK(m.triangles.size() == 2);
    CHECK(m.boundary_edges.size() == 4);
    for (const BoundaryEdge& e : m.boundary_edges) CHECK(e.tag == 1);
    CHECK(mesh_size(m) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("unit square: study-sized grid counts and mesh size") {
    const Mesh m = generate_unit_square(27);
    CHECK(m.vertices.size() == 784);
    CHECK(m.triangles.size() == 1458);
    CHECK(m.boundary_edges.size() == 4 * 27);
    CHECK(mesh_size(m) == doctest::Approx(std::sqrt(2.0) / 27.0).epsilon(1e-14));
}

TEST_CASE("unit square: triangle areas partition the square") {
    for (const int g : {1, 2, 3, 7, 16, 27, 64, 128, 256}) {
        const Mesh m = generate_unit_square(g);
        double total = 0.0;
        for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
            total += triangle_area(m, t);
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("unit square: rejects g = 0") {
    CHECK_THROWS_AS(generate_unit_square(0), DomainError);
    CHECK_THROWS_AS(generate_unit_square(-3), DomainError);
}

TEST_CASE("validate: generated meshes pass") {
    validate_mesh(generate_unit_square(5));
    validate_mesh(single_triangle_mesh());
}

TEST_CASE("mesh_size: hand-computed single triangle") {
    // Edges of (0,0), (1,0), (0,2): lengths 1, sqrt(5), 2.
    const Mesh m = single_triangle_mesh();
    CHECK(mesh_size(m) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
}

TEST_CASE("mesh_size: empty mesh rejected") {
    Mesh m;
    CHECK_THROWS_AS(mesh_size(m), DomainError);
}

TEST_CASE("msh reader: single-element file") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 2 0\n$EndNodes\n"
        "$Elements\n4\n"
        "1 1 2 7 7 1 2\n"
        "2 1 2 7 7 2 3\n"
        "3 1 2 7 7 3 1\n"
        "4 2 2 0 1 1 2 3\n"
        "$EndElements\n";
    std::istringstream in(text);
    const Mesh m = read_msh(in);
    CHECK(m.vertices.size() == 3);
    CHECK(m.triangles.size() == 1);
    CHECK(m.boundary_edges.size() == 3);
    CHECK(m.boundary_edges[0].tag == 7);
    CHECK(m.skipped_elements == 0);
}

TEST_CASE("msh reader: sparse node ids are remapped, round trip exact") {
    const Mesh original = generate_unit_square(3);
    for (const long first_id : {1L, 5L, 1000L}) {
        std::istringstream in(write_msh_text(original, first_id));
        const Mesh back = read_msh(in);
        REQUIRE(back.vertices.size() == original.vertices.size());
        REQUIRE(back.triangles.size() == original.triangles.size());
        REQUIRE(back.boundary_edges.size() == original.boundary_edges.size());
        for (std::size_t i = 0; i < original.vertices.size(); ++i) {
            CHECK(back.vertices[i].x == original.vertices[i].x);
            CHECK(back.vertices[i].y == original.vertices[i].y);
        }
        for (std::size_t i = 0; i < original.triangles.size(); ++i)
            CHECK(back.triangles[i] == original.triangles[i]);
        for (std::size_t i = 0; i < original.boundary_edges.size(); ++i) {
            CHECK(back.boundary_edges[i].vertices == original.boundary_edges[i].vertices);
            CHECK(back.boundary_edges[i].tag == original.boundary_edges[i].tag);
        }
    }
}

TEST_CASE("msh reader: unknown element types are skipped and counted") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n"
        "$Elements\n7\n"
        "1 3 2 0 1 1 2 3 4\n"   // quadrilateral: skipped
        "2 2 2 0 1 1 2 3\n"
        "3 2 2 0 1 1 3 4\n"
        "4 1 2 1 1 1 2\n"
        "5 1 2 1 1 2 3\n"
        "6 1 2 1 1 3 4\n"
        "7 1 2 1 1 4 1\n"
        "$EndElements\n";
    std::istringstream in(text);
    const Mesh m = read_msh(in);
    CHECK(m.triangles.size() == 2);
    CHECK(m.skipped_elements == 1);
}

TEST_CASE("msh reader: physical names populate the tag map") {
    Mesh m = generate_unit_square(2);
    m.tags = {{1, "boundary"}};
    std::istringstream in(write_msh_text(m));
    const Mesh back = read_msh(in);
    REQUIRE(back.tags.size() == 1);
    CHECK(back.tags.at(1) == "boundary");
}

TEST_CASE("msh reader: malformed input carries a line number") {
    const std::string bad_version =
        "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
    std::istringstream in1(bad_version);
    CHECK_THROWS_AS(read_msh(in1), ParseError);
    try {
        std::istringstream in(bad_version);
        read_msh(in);
    } catch (const ParseError& e) {
        CHECK(e.line_number > 0);
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }

    const std::string bad_count =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\nnot_a_number\n$EndNodes\n";
    std::istringstream in2(bad_count);
    CHECK_THROWS_AS(read_msh(in2), ParseError);
}

TEST_CASE("msh reader: triangle referencing a missing node") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n"
        "$Elements\n1\n1 2 2 0 1 1 2 9\n$EndElements\n";
    std::istringstream in(text);
    CHECK_THROWS_AS(read_msh(in), Error);
}

TEST_CASE("validate: structural violations rejected") {
    SUBCASE("clockwise triangle") {
        Mesh m = single_triangle_mesh();
        std::swap(m.triangles[0][1], m.triangles[0][2]);
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
    SUBCASE("vertex index out of range") {
        Mesh m = single_triangle_mesh();
        m.triangles[0][2] = 17;
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
    SUBCASE("boundary edge owned by two triangles (interior diagonal)") {
        Mesh m = generate_unit_square(2);
        m.boundary_edges.push_back({{0, 4}, 1});
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
    SUBCASE("boundary edge owned by no triangle") {
        Mesh m = generate_unit_square(2);
        m.boundary_edges.push_back({{0, 8}, 1});
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
    SUBCASE("duplicate boundary edge") {
        Mesh m = single_triangle_mesh();
        m.boundary_edges.push_back(m.boundary_edges[0]);
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
    SUBCASE("empty mesh") {
        Mesh m;
        CHECK_THROWS_AS(validate_mesh(m), DomainError);
    }
}

TEST_CASE("bundled meshes load, validate, and carry the expected tags") {
    struct Expect {
        const char* file;
        std::set<int> tags;
    };
    const Expect cases[] = {
        {"meshes/rotors_desk.msh", {1, 2, 3}},
        {"meshes/rotors_full.msh", {1, 2, 3}},
        {"meshes/channel_coarse.msh", {1, 2, 3, 4}},
        {"meshes/channel_desk.msh", {1, 2, 3, 4}},
        {"meshes/channel_full.msh", {1, 2, 3, 4}},
    };
    for (const Expect& c : cases) {
        CAPTURE(c.file);
        const Mesh m = read_msh_file(data_path(c.file));
        validate_mesh(m);
        std::set<int> seen;
        for (const BoundaryEdge& e : m.boundary_edges) seen.insert(e.tag);
        CHECK(seen == c.tags);
        CHECK(m.tags.size() == c.tags.size());  // named physical groups
    }
}

TEST_CASE("msh reader: missing file is an I/O error") {
    CHECK_THROWS_AS(read_msh_file("/no/such/mesh.msh"), IOError);
}
