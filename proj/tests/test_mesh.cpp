#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "stokesband/errors.hpp"
#include "stokesband/mesh.hpp"

using namespace stokesband;

namespace {

// Edge-conformity oracle: hash every edge and count incidences.
void check_conforming(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}]++;
        }
    for (const auto& [key, count] : edges) {
        CHECK(count >= 1);
        CHECK(count <= 2);
    }
}

} // namespace

TEST_CASE("unit square mesh counts and area") {
    Mesh m1 = generate_unit_square_mesh(1);
    CHECK(m1.vertex_count() == 4);
    CHECK(m1.triangle_count() == 2);
    CHECK(m1.total_area() == doctest::Approx(1.0).epsilon(1e-14));

    Mesh m4 = generate_unit_square_mesh(4);
    CHECK(m4.vertex_count() == 25);
    CHECK(m4.triangle_count() == 32);
    CHECK(m4.total_area() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m4.h == doctest::Approx(std::sqrt(2.0) / 4.0).epsilon(1e-14));

    Mesh m2 = generate_unit_square_mesh(2);
    for (int t = 0; t < m2.triangle_count(); ++t)
        CHECK(m2.triangle_area(t) == doctest::Approx(0.125).epsilon(1e-14));

    CHECK_THROWS_AS(generate_unit_square_mesh(0), invalid_parameter_error);
}

TEST_CASE("unit square mesh positive areas and conformity") {
    for (int n : {1, 3, 8}) {
        Mesh m = generate_unit_square_mesh(n);
        for (int t = 0; t < m.triangle_count(); ++t) CHECK(m.triangle_area(t) > 0.0);
        check_conforming(m);
    }
}

TEST_CASE("unit disk mesh") {
    Mesh fan = generate_unit_disk_mesh(1, 3);
    CHECK(fan.vertex_count() == 4);
    CHECK(fan.triangle_count() == 3);

    Mesh hex = generate_unit_disk_mesh(1, 6);
    CHECK(hex.total_area() == doctest::Approx(6.0 * 0.5 * std::sin(M_PI / 3.0)).epsilon(1e-13));

    Mesh fine = generate_unit_disk_mesh(32, 128);
    CHECK(std::abs(fine.total_area() - M_PI) / M_PI < 0.002);
    CHECK(fine.area_defect == doctest::Approx(M_PI - fine.total_area()).epsilon(1e-12));
    check_conforming(fine);
    for (int t = 0; t < fine.triangle_count(); ++t) CHECK(fine.triangle_area(t) > 0.0);
    // every boundary vertex sits at radius 1
    for (int v : fine.boundary_vertices)
        CHECK(norm(fine.vertices[v]) == doctest::Approx(1.0).epsilon(1e-13));

    CHECK_THROWS_AS(generate_unit_disk_mesh(4, 2), invalid_parameter_error);
    CHECK_THROWS_AS(generate_unit_disk_mesh(0, 12), invalid_parameter_error);
}

TEST_CASE("select_region basics") {
    Mesh m = generate_unit_square_mesh(4);

    RegionMask empty = select_region(m, EmptyRegion{});
    CHECK(empty.volume == 0.0);
    CHECK(empty.constrained_vertices.empty());
    CHECK(empty.diameter_spec == 0.0);

    RegionMask layer = select_region(m, LayerBand{1});
    CHECK(layer.volume == doctest::Approx(0.75).epsilon(1e-13));

    Mesh m8 = generate_unit_square_mesh(8);
    RegionMask layer8 = select_region(m8, LayerBand{1});
    CHECK(layer8.volume == doctest::Approx(0.4375).epsilon(1e-13));

    // constrained vertices are exactly the union of masked triangle vertices
    std::vector<char> expect(m.vertex_count(), 0);
    for (int t : layer.triangle_set)
        for (int v : m.triangles[t]) expect[v] = 1;
    int count = 0;
    for (char c : expect) count += c;
    CHECK(static_cast<int>(layer.constrained_vertices.size()) == count);
    for (int v : layer.constrained_vertices) CHECK(expect[v] == 1);
}

TEST_CASE("select_region disk and errors") {
    Mesh disk = generate_unit_disk_mesh(32, 128);
    RegionMask center = select_region(disk, InteriorDisk{{0.0, 0.0}, 0.1});
    CHECK(std::abs(center.volume - M_PI * 0.01) <= 0.2 * M_PI * 0.01);
    CHECK(center.diameter_spec == doctest::Approx(0.2));

    Mesh m = generate_unit_square_mesh(4);
    CHECK_THROWS_AS(select_region(m, InteriorDisk{{10.0, 10.0}, 0.01}), empty_selection_error);
    CHECK_THROWS_AS(select_region(m, BoundaryBand{5.0}, true), region_covers_domain_error);
    CHECK_NOTHROW(select_region(m, BoundaryBand{5.0}, false));
    CHECK_THROWS_AS(select_region(m, BoundaryBand{-1.0}), invalid_parameter_error);
}

TEST_CASE("layer band monotonicity") {
    Mesh m = generate_unit_square_mesh(8);
    RegionMask k1 = select_region(m, LayerBand{1});
    RegionMask k2 = select_region(m, LayerBand{2});
    RegionMask k3 = select_region(m, LayerBand{3});
    auto subset = [](const RegionMask& a, const RegionMask& b) {
        return std::includes(b.triangle_set.begin(), b.triangle_set.end(), a.triangle_set.begin(),
                             a.triangle_set.end());
    };
    CHECK(subset(k1, k2));
    CHECK(subset(k2, k3));
}

TEST_CASE("region volume and additivity") {
    Mesh m = generate_unit_square_mesh(8);
    RegionMask full = select_region(m, BoundaryBand{5.0});
    CHECK(region_volume(m, full) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(region_volume(m, RegionMask{}) == 0.0);

    RegionMask layer = select_region(m, LayerBand{1});
    RegionMask comp = complement_region(m, layer);
    CHECK(region_volume(m, layer) + region_volume(m, comp) ==
          doctest::Approx(m.total_area()).epsilon(1e-12));

    RegionMask bad;
    bad.triangle_set = {10000};
    CHECK_THROWS_AS(region_volume(m, bad), std::out_of_range);
}

TEST_CASE("mesh text format round trip") {
    Mesh m = generate_unit_disk_mesh(3, 12);
    std::stringstream ss;
    write_mesh(m, ss);
    std::string header;
    std::getline(ss, header);
    CHECK(header ==
          std::to_string(m.vertex_count()) + " vertices " + std::to_string(m.triangle_count()) +
              " triangles " + std::to_string(m.boundary_vertices.size()) + " boundary");
    ss.seekg(0);
    Mesh back = read_mesh(ss);
    REQUIRE(back.vertex_count() == m.vertex_count());
    REQUIRE(back.triangle_count() == m.triangle_count());
    CHECK(back.boundary_vertices == m.boundary_vertices);
    CHECK(back.h == doctest::Approx(m.h).epsilon(1e-15));
    for (int v = 0; v < m.vertex_count(); ++v) {
        CHECK(back.vertices[v].x == m.vertices[v].x);
        CHECK(back.vertices[v].y == m.vertices[v].y);
    }
    std::stringstream bad("3 vertices x nonsense");
    CHECK_THROWS_AS(read_mesh(bad), io_error);
}
