#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace stokesband {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a);

/// Conforming triangulation of the unit square or unit disk.
/// Immutable after construction; triangles are counter-clockwise.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_vertices; // sorted
    std::vector<char> on_boundary;      // per-vertex flag, same content as boundary_vertices
    double h = 0.0;                     // max triangle diameter
    double area_defect = 0.0;           // |Omega_exact - sum of areas|; nonzero only for the disk

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    double triangle_area(int t) const;
    Vec2 triangle_centroid(int t) const;
    double total_area() const;
};

/// Subset of triangles forming the band Delta, plus every vertex touching it.
struct RegionMask {
    std::vector<int> triangle_set;        // sorted triangle indices
    std::vector<int> constrained_vertices; // sorted union of masked-triangle vertices
    double volume = 0.0;
    double diameter_spec = 0.0;           // the D(Delta) parameter that produced the mask

    bool empty() const { return triangle_set.empty(); }
};

// Region selectors. Membership is decided per triangle by centroid inclusion,
// except LayerBand which grows by edge adjacency from the boundary layer.
struct EmptyRegion {};
struct BoundaryBand {
    double width = 0.0; // centroid distance to the polygonal boundary < width
};
struct InteriorDisk {
    Vec2 center;
    double radius = 0.0;
};
struct LayerBand {
    int layers = 1;
};
using RegionSpec = std::variant<EmptyRegion, BoundaryBand, InteriorDisk, LayerBand>;

/// Uniform triangulation of (0,1)^2: (n+1)^2 vertices, 2n^2 triangles,
/// diagonal split, total area exactly 1, h = sqrt(2)/n.
Mesh generate_unit_square_mesh(int n);

/// Polar-structured triangulation of the unit disk: central vertex fan plus
/// n_radial rings of n_angular vertices. Vertices at radius 1 are boundary.
/// Total area is that of the inscribed regular polygon; the defect vs pi is
/// recorded in area_defect.
Mesh generate_unit_disk_mesh(int n_radial, int n_angular);

/// Select the Delta region. Throws empty_selection_error if a nonempty
/// selector matches no triangle, region_covers_domain_error if
/// require_proper_subset is set and the selector matches every triangle.
RegionMask select_region(const Mesh& mesh, const RegionSpec& spec,
                         bool require_proper_subset = false);

RegionMask complement_region(const Mesh& mesh, const RegionMask& mask);

/// Exact sum of masked triangle areas.
double region_volume(const Mesh& mesh, const RegionMask& mask);

// Plain-text mesh format: header "V vertices T triangles B boundary",
// then V coordinate lines, T triangle index lines, B boundary index lines.
void write_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_mesh(std::istream& in);
void write_mesh_file(const Mesh& mesh, const std::string& path);
Mesh read_mesh_file(const std::string& path);

} // namespace stokesband
