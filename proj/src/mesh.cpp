#include "stokesband/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <istream>
#include <set>
#include <sstream>

#include "stokesband/errors.hpp"

namespace stokesband {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

namespace {

double signed_area(Vec2 a, Vec2 b, Vec2 c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

double triangle_diameter(Vec2 a, Vec2 b, Vec2 c) {
    return std::max({norm(b - a), norm(c - b), norm(a - c)});
}

void finalize(Mesh& m) {
    m.h = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tri = m.triangles[t];
        m.h = std::max(m.h, triangle_diameter(m.vertices[tri[0]], m.vertices[tri[1]],
                                              m.vertices[tri[2]]));
    }
    m.boundary_vertices.clear();
    for (int v = 0; v < m.vertex_count(); ++v)
        if (m.on_boundary[v]) m.boundary_vertices.push_back(v);
}

// Map from sorted vertex pair to the triangles sharing that edge.
std::map<std::pair<int, int>, std::vector<int>> edge_table(const Mesh& m) {
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tri = m.triangles[t];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}].push_back(t);
        }
    }
    return edges;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

} // namespace

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles.at(t);
    return signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

Vec2 Mesh::triangle_centroid(int t) const {
    const auto& tri = triangles.at(t);
    Vec2 a = vertices[tri[0]], b = vertices[tri[1]], c = vertices[tri[2]];
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

double Mesh::total_area() const {
    double s = 0.0;
    for (int t = 0; t < triangle_count(); ++t) s += triangle_area(t);
    return s;
}

Mesh generate_unit_square_mesh(int n) {
    if (n < 1) throw invalid_parameter_error("unit square mesh requires n >= 1");
    Mesh m;
    const int np = n + 1;
    m.vertices.reserve(static_cast<size_t>(np) * np);
    m.on_boundary.assign(static_cast<size_t>(np) * np, 0);
    for (int j = 0; j < np; ++j) {
        for (int i = 0; i < np; ++i) {
            m.vertices.push_back({double(i) / n, double(j) / n});
            if (i == 0 || j == 0 || i == n || j == n)
                m.on_boundary[static_cast<size_t>(j) * np + i] = 1;
        }
    }
    auto vid = [np](int i, int j) { return j * np + i; };
    m.triangles.reserve(2 * static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int v00 = vid(i, j), v10 = vid(i + 1, j);
            int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            m.triangles.push_back({v00, v10, v11});
            m.triangles.push_back({v00, v11, v01});
        }
    }
    finalize(m);
    m.area_defect = 0.0;
    return m;
}

Mesh generate_unit_disk_mesh(int n_radial, int n_angular) {
    if (n_radial < 1) throw invalid_parameter_error("unit disk mesh requires n_radial >= 1");
    if (n_angular < 3) throw invalid_parameter_error("unit disk mesh requires n_angular >= 3");
    Mesh m;
    m.vertices.push_back({0.0, 0.0});
    for (int i = 1; i <= n_radial; ++i) {
        double r = double(i) / n_radial;
        for (int j = 0; j < n_angular; ++j) {
            double th = 2.0 * M_PI * j / n_angular;
            m.vertices.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }
    m.on_boundary.assign(m.vertices.size(), 0);
    for (int j = 0; j < n_angular; ++j)
        m.on_boundary[1 + static_cast<size_t>(n_radial - 1) * n_angular + j] = 1;

    auto ring = [n_angular](int i, int j) {
        return 1 + (i - 1) * n_angular + (j % n_angular);
    };
    for (int j = 0; j < n_angular; ++j)
        m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i < n_radial; ++i) {
        for (int j = 0; j < n_angular; ++j) {
            m.triangles.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
            m.triangles.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    finalize(m);
    m.area_defect = M_PI - m.total_area();
    return m;
}

RegionMask select_region(const Mesh& mesh, const RegionSpec& spec,
                         bool require_proper_subset) {
    RegionMask mask;
    const int nt = mesh.triangle_count();

    if (std::holds_alternative<EmptyRegion>(spec)) {
        return mask; // volume 0, D(Delta) = 0
    }

    if (const auto* band = std::get_if<BoundaryBand>(&spec)) {
        if (band->width <= 0.0) throw invalid_parameter_error("BoundaryBand width must be > 0");
        // Distance measured against the polygonal boundary (boundary edges).
        std::vector<std::pair<Vec2, Vec2>> bedges;
        for (const auto& [key, tris] : edge_table(mesh))
            if (tris.size() == 1)
                bedges.emplace_back(mesh.vertices[key.first], mesh.vertices[key.second]);
        for (int t = 0; t < nt; ++t) {
            Vec2 c = mesh.triangle_centroid(t);
            double d = std::numeric_limits<double>::max();
            for (const auto& [a, b] : bedges) d = std::min(d, point_segment_distance(c, a, b));
            if (d < band->width) mask.triangle_set.push_back(t);
        }
        mask.diameter_spec = band->width;
    } else if (const auto* disk = std::get_if<InteriorDisk>(&spec)) {
        if (disk->radius <= 0.0) throw invalid_parameter_error("InteriorDisk radius must be > 0");
        for (int t = 0; t < nt; ++t)
            if (norm(mesh.triangle_centroid(t) - disk->center) < disk->radius)
                mask.triangle_set.push_back(t);
        mask.diameter_spec = 2.0 * disk->radius;
    } else if (const auto* layer = std::get_if<LayerBand>(&spec)) {
        if (layer->layers < 1) throw invalid_parameter_error("LayerBand requires k >= 1");
        // Layer 1: triangles touching a boundary vertex. Further layers grow
        // by edge adjacency.
        std::vector<char> in(nt, 0);
        for (int t = 0; t < nt; ++t)
            for (int v : mesh.triangles[t])
                if (mesh.on_boundary[v]) { in[t] = 1; break; }
        if (layer->layers > 1) {
            auto edges = edge_table(mesh);
            std::vector<std::vector<int>> nbr(nt);
            for (const auto& [key, tris] : edges)
                if (tris.size() == 2) {
                    nbr[tris[0]].push_back(tris[1]);
                    nbr[tris[1]].push_back(tris[0]);
                }
            for (int k = 1; k < layer->layers; ++k) {
                std::vector<char> next = in;
                for (int t = 0; t < nt; ++t)
                    if (in[t])
                        for (int s : nbr[t]) next[s] = 1;
                in.swap(next);
            }
        }
        for (int t = 0; t < nt; ++t)
            if (in[t]) mask.triangle_set.push_back(t);
        mask.diameter_spec = layer->layers * mesh.h;
    }

    if (mask.triangle_set.empty())
        throw empty_selection_error("region spec selected no triangles");
    if (require_proper_subset && static_cast<int>(mask.triangle_set.size()) == nt)
        throw region_covers_domain_error("region spec selects the whole domain");

    std::set<int> verts;
    for (int t : mask.triangle_set) {
        for (int v : mesh.triangles[t]) verts.insert(v);
        mask.volume += mesh.triangle_area(t);
    }
    mask.constrained_vertices.assign(verts.begin(), verts.end());
    return mask;
}

RegionMask complement_region(const Mesh& mesh, const RegionMask& mask) {
    std::vector<char> in(mesh.triangle_count(), 0);
    for (int t : mask.triangle_set) in.at(t) = 1;
    RegionMask out;
    std::set<int> verts;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        if (in[t]) continue;
        out.triangle_set.push_back(t);
        out.volume += mesh.triangle_area(t);
        for (int v : mesh.triangles[t]) verts.insert(v);
    }
    out.constrained_vertices.assign(verts.begin(), verts.end());
    return out;
}

double region_volume(const Mesh& mesh, const RegionMask& mask) {
    double vol = 0.0;
    for (int t : mask.triangle_set) {
        if (t < 0 || t >= mesh.triangle_count())
            throw std::out_of_range("region mask references triangle " + std::to_string(t));
        vol += mesh.triangle_area(t);
    }
    return vol;
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
    out.precision(17);
    out << mesh.vertex_count() << " vertices " << mesh.triangle_count() << " triangles "
        << mesh.boundary_vertices.size() << " boundary\n";
    for (const auto& v : mesh.vertices) out << v.x << " " << v.y << "\n";
    for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
    for (int b : mesh.boundary_vertices) out << b << "\n";
}

Mesh read_mesh(std::istream& in) {
    int nv = 0, nt = 0, nb = 0;
    std::string w_vertices, w_triangles, w_boundary;
    in >> nv >> w_vertices >> nt >> w_triangles >> nb >> w_boundary;
    if (!in || w_vertices != "vertices" || w_triangles != "triangles" || w_boundary != "boundary")
        throw io_error("malformed mesh header");
    Mesh m;
    m.vertices.resize(nv);
    for (auto& v : m.vertices) in >> v.x >> v.y;
    m.triangles.resize(nt);
    for (auto& t : m.triangles) in >> t[0] >> t[1] >> t[2];
    m.on_boundary.assign(nv, 0);
    for (int i = 0; i < nb; ++i) {
        int b = 0;
        in >> b;
        if (b < 0 || b >= nv) throw io_error("boundary index out of range");
        m.on_boundary[b] = 1;
    }
    if (!in) throw io_error("truncated mesh file");
    for (int t = 0; t < nt; ++t) {
        for (int v : m.triangles[t])
            if (v < 0 || v >= nv) throw io_error("triangle index out of range");
        if (m.triangle_area(t) <= 0.0)
            throw io_error("triangle " + std::to_string(t) + " has nonpositive area");
    }
    finalize(m);
    return m;
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    write_mesh(mesh, f);
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open for reading: " + path);
    return read_mesh(f);
}

} // namespace stokesband
