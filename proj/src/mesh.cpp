// ============================================================================
// mesh.cpp - structured generator, Gmsh 2.2 reader, metrics, validation
// ============================================================================

#include "penflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

namespace penflow {

namespace {

// Undirected edge key for conformity checks: both vertex indices packed into
// one 64-bit integer, smaller index in the high half.
std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace

Mesh generate_unit_square(int g) {
    if (g < 1) throw DomainError("generate_unit_square: g must be >= 1, got " + std::to_string(g));

    Mesh mesh;
    const int n = g + 1;  // vertices per side
    mesh.vertices.reserve(static_cast<std::size_t>(n) * n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            mesh.vertices.push_back({static_cast<double>(ix) / g, static_cast<double>(iy) / g});

    // Each cell splits along its lower-left -> upper-right diagonal:
    //   d --- c        triangles (a,b,c) and (a,c,d), both counterclockwise.
    //   |  /  |
    //   a --- b
    mesh.triangles.reserve(2u * g * g);
    for (int iy = 0; iy < g; ++iy) {
        for (int ix = 0; ix < g; ++ix) {
            const int a = iy * n + ix;
            const int b = a + 1;
            const int c = a + n + 1;
            const int d = a + n;
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }

    mesh.boundary_edges.reserve(4u * g);
    for (int i = 0; i < g; ++i) {
        mesh.boundary_edges.push_back({{i, i + 1}, 1});                          // bottom
        mesh.boundary_edges.push_back({{g + i * n, g + (i + 1) * n}, 1});        // right
        mesh.boundary_edges.push_back({{n * n - 1 - i, n * n - 2 - i}, 1});      // top
        mesh.boundary_edges.push_back({{(g - i) * n, (g - i - 1) * n}, 1});      // left
    }
    mesh.tags[1] = "boundary";

    validate_mesh(mesh);
    return mesh;
}

namespace {

// Reads the next non-empty line; returns false on clean EOF.
bool next_line(std::istream& in, std::string& line, long& line_number) {
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return true;
    }
    return false;
}

}  // namespace

Mesh read_msh(std::istream& in) {
    Mesh mesh;
    std::unordered_map<long, int> node_index;  // file node id -> dense index
    std::string line;
    long line_number = 0;
    bool saw_format = false, saw_nodes = false, saw_elements = false;

    while (next_line(in, line, line_number)) {
        if (line[0] != '$')
            throw ParseError("read_msh: expected a section header, got '" + line + "'", line_number);
        const std::string section = line.substr(1);
        const std::string end_marker = "$End" + section;

        if (section == "MeshFormat") {
            if (!next_line(in, line, line_number))
                throw ParseError("read_msh: unexpected end of file in $MeshFormat", line_number);
            std::istringstream fields(line);
            std::string version;
            int file_type = -1, data_size = -1;
            if (!(fields >> version >> file_type >> data_size))
                throw ParseError("read_msh: malformed $MeshFormat line '" + line + "'", line_number);
            if (version != "2.2" || file_type != 0)
                throw ParseError("read_msh: unsupported format '" + line + "' (need ASCII 2.2)", line_number);
            saw_format = true;
        } else if (section == "PhysicalNames") {
            if (!next_line(in, line, line_number))
                throw ParseError("read_msh: unexpected end of file in $PhysicalNames", line_number);
            long count = 0;
            try {
                count = std::stol(line);
            } catch (const std::exception&) {
                throw ParseError("read_msh: bad $PhysicalNames count '" + line + "'", line_number);
            }
            for (long i = 0; i < count; ++i) {
                if (!next_line(in, line, line_number))
                    throw ParseError("read_msh: unexpected end of file in $PhysicalNames", line_number);
                std::istringstream fields(line);
                int dim = 0, tag = 0;
                if (!(fields >> dim >> tag))
                    throw ParseError("read_msh: malformed physical name '" + line + "'", line_number);
                std::string label;
                std::getline(fields, label);
                const auto first = label.find('"');
                const auto last = label.rfind('"');
                if (first != std::string::npos && last > first)
                    label = label.substr(first + 1, last - first - 1);
                mesh.tags[tag] = label;
            }
        } else if (section == "Nodes") {
            if (!next_line(in, line, line_number))
                throw ParseError("read_msh: unexpected end of file in $Nodes", line_number);
            long count = 0;
            try {
                count = std::stol(line);
            } catch (const std::exception&) {
                throw ParseError("read_msh: bad $Nodes count '" + line + "'", line_number);
            }
            mesh.vertices.reserve(static_cast<std::size_t>(count));
            for (long i = 0; i < count; ++i) {
                if (!next_line(in, line, line_number))
                    throw ParseError("read_msh: unexpected end of file in $Nodes", line_number);
                std::istringstream fields(line);
                long id = 0;
                double x = 0, y = 0, z = 0;
                if (!(fields >> id >> x >> y >> z))
                    throw ParseError("read_msh: malformed node '" + line + "'", line_number);
                if (!node_index.emplace(id, static_cast<int>(mesh.vertices.size())).second)
                    throw ParseError("read_msh: duplicate node id " + std::to_string(id), line_number);
                mesh.vertices.push_back({x, y});
            }
            saw_nodes = true;
        } else if (section == "Elements") {
            if (!next_line(in, line, line_number))
                throw ParseError("read_msh: unexpected end of file in $Elements", line_number);
            long count = 0;
            try {
                count = std::stol(line);
            } catch (const std::exception&) {
                throw ParseError("read_msh: bad $Elements count '" + line + "'", line_number);
            }
            for (long i = 0; i < count; ++i) {
                if (!next_line(in, line, line_number))
                    throw ParseError("read_msh: unexpected end of file in $Elements", line_number);
                std::istringstream fields(line);
                long id = 0;
                int type = 0, ntags = 0;
                if (!(fields >> id >> type >> ntags))
                    throw ParseError("read_msh: malformed element '" + line + "'", line_number);
                std::vector<int> elem_tags(static_cast<std::size_t>(std::max(ntags, 0)));
                for (int& t : elem_tags)
                    if (!(fields >> t))
                        throw ParseError("read_msh: element is missing tags: '" + line + "'", line_number);
                const int physical_tag = elem_tags.empty() ? 0 : elem_tags.front();

                const int node_count = (type == 1) ? 2 : (type == 2) ? 3 : 0;
                if (node_count == 0) {
                    ++mesh.skipped_elements;
                    continue;
                }
                std::array<int, 3> nodes{};
                for (int k = 0; k < node_count; ++k) {
                    long node_id = 0;
                    if (!(fields >> node_id))
                        throw ParseError("read_msh: element is missing nodes: '" + line + "'", line_number);
                    const auto it = node_index.find(node_id);
                    if (it == node_index.end())
                        throw DomainError("read_msh: element " + std::to_string(id) +
                                          " references unknown node " + std::to_string(node_id));
                    nodes[static_cast<std::size_t>(k)] = it->second;
                }
                if (type == 1)
                    mesh.boundary_edges.push_back({{nodes[0], nodes[1]}, physical_tag});
                else
                    mesh.triangles.push_back(nodes);
            }
            saw_elements = true;
        } else {
            // Unknown section: skip everything up to its end marker.
            bool closed = false;
            while (next_line(in, line, line_number)) {
                if (line == end_marker) {
                    closed = true;
                    break;
                }
            }
            if (!closed)
                throw ParseError("read_msh: missing " + end_marker, line_number);
            continue;
        }

        if (!next_line(in, line, line_number) || line != end_marker)
            throw ParseError("read_msh: missing " + end_marker, line_number);
    }

    if (!saw_format) throw ParseError("read_msh: missing $MeshFormat section", line_number);
    if (!saw_nodes || !saw_elements)
        throw ParseError("read_msh: missing $Nodes or $Elements section", line_number);

    // Gmsh does not guarantee triangle orientation; normalize to
    // counterclockwise before validating.
    for (auto& tri : mesh.triangles) {
        if (signed_area(mesh.vertices[static_cast<std::size_t>(tri[0])],
                        mesh.vertices[static_cast<std::size_t>(tri[1])],
                        mesh.vertices[static_cast<std::size_t>(tri[2])]) < 0.0)
            std::swap(tri[1], tri[2]);
    }

    validate_mesh(mesh);
    return mesh;
}

Mesh read_msh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("read_msh_file: cannot open '" + path + "'");
    return read_msh(in);
}

double mesh_size(const Mesh& mesh) {
    if (mesh.triangles.empty()) throw DomainError("mesh_size: mesh has no triangles");
    double h = 0.0;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = mesh.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
            const Vec2& b = mesh.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>((k + 1) % 3)])];
            h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    return h;
}

double triangle_area(const Mesh& mesh, int t) {
    if (t < 0 || t >= static_cast<int>(mesh.triangles.size()))
        throw DomainError("triangle_area: triangle index out of range");
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    return signed_area(mesh.vertices[static_cast<std::size_t>(tri[0])],
                       mesh.vertices[static_cast<std::size_t>(tri[1])],
                       mesh.vertices[static_cast<std::size_t>(tri[2])]);
}

void validate_mesh(const Mesh& mesh) {
    if (mesh.triangles.empty()) throw DomainError("validate_mesh: mesh has no triangles");
    const int nv = static_cast<int>(mesh.vertices.size());

    // Count how many triangles own each undirected edge.
    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(mesh.triangles.size() * 3);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int v : tri)
            if (v < 0 || v >= nv)
                throw DomainError("validate_mesh: triangle " + std::to_string(t) +
                                  " references vertex " + std::to_string(v) + " out of range");
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw DomainError("validate_mesh: triangle " + std::to_string(t) + " has repeated vertices");
        if (signed_area(mesh.vertices[static_cast<std::size_t>(tri[0])],
                        mesh.vertices[static_cast<std::size_t>(tri[1])],
                        mesh.vertices[static_cast<std::size_t>(tri[2])]) <= 0.0)
            throw DomainError("validate_mesh: triangle " + std::to_string(t) +
                              " is not counterclockwise (non-positive area)");
        for (int k = 0; k < 3; ++k)
            ++edge_count[edge_key(tri[static_cast<std::size_t>(k)], tri[static_cast<std::size_t>((k + 1) % 3)])];
    }

    // Conformity: an edge appearing in three or more triangles is not a
    // manifold edge. (Two triangles overlapping in a partial edge would show
    // up as crossing edges with counts 1 and is geometric, not caught here.)
    for (const auto& [key, count] : edge_count)
        if (count > 2)
            throw DomainError("validate_mesh: edge shared by " + std::to_string(count) +
                              " triangles (non-conforming)");

    std::unordered_map<std::uint64_t, int> listed;  // boundary edge -> times listed
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        for (int v : be.vertices)
            if (v < 0 || v >= nv)
                throw DomainError("validate_mesh: boundary edge " + std::to_string(e) +
                                  " references vertex " + std::to_string(v) + " out of range");
        const auto key = edge_key(be.vertices[0], be.vertices[1]);
        const auto it = edge_count.find(key);
        if (it == edge_count.end())
            throw DomainError("validate_mesh: boundary edge " + std::to_string(e) +
                              " is not an edge of any triangle");
        if (it->second != 1)
            throw DomainError("validate_mesh: boundary edge " + std::to_string(e) +
                              " is shared by two triangles (interior edge)");
        if (++listed[key] > 1)
            throw DomainError("validate_mesh: boundary edge " + std::to_string(e) + " is listed twice");
    }
}

}  // namespace penflow
