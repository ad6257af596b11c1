#include <doctest.h>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"
#include "support/oracles.hpp"

using namespace netsnake;

TEST_CASE("point_segment_distance examples") {
    const auto p = point_segment_distance({1, 1}, {0, 0}, {2, 0});
    CHECK(p.distance == doctest::Approx(1.0));
    CHECK(p.phi == doctest::Approx(0.5));
    CHECK(p.foot == Vec3(1, 0));

    const auto end = point_segment_distance({5, 0}, {0, 0}, {2, 0});
    CHECK(end.distance == doctest::Approx(3.0));
    CHECK(end.phi == doctest::Approx(0.0)); // closest to c_v = (2, 0)

    const auto deg = point_segment_distance({3, 4}, {0, 0}, {0, 0});
    CHECK(deg.distance == doctest::Approx(5.0));
    CHECK(deg.phi == 0.5);
}

TEST_CASE("distance_transform matches a brute-force scan") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        const GridSpec grid = seed % 2 ? GridSpec(10, 9, 7) : GridSpec(16, 16);
        const auto g = oracle::random_chain(rng, grid, 4, 1.0);
        const double d = 5.0;
        const auto map = distance_transform(g, grid, d);
        const auto ref = oracle::brute_force_map(g, grid, d);
        for (std::size_t q = 0; q < ref.size(); ++q) CHECK(map.values()[q] == doctest::Approx(ref[q]).epsilon(1e-9));
    }
}

TEST_CASE("distance map invariants") {
    Rng rng(11);
    const GridSpec grid(20, 20);
    const auto g = oracle::random_chain(rng, grid, 6);

    SUBCASE("values lie in [0, d] and inactive voxels hold d") {
        const auto map = distance_transform(g, grid, 4.0);
        std::vector<bool> active(grid.voxel_count(), false);
        for (const auto& a : map.active()) {
            active[a.voxel] = true;
            CHECK(map.values()[a.voxel] < 4.0);
        }
        for (std::size_t q = 0; q < grid.voxel_count(); ++q) {
            CHECK(map.values()[q] >= 0.0);
            CHECK(map.values()[q] <= 4.0);
            if (!active[q]) CHECK(map.values()[q] == 4.0);
        }
    }
    SUBCASE("larger truncation never lowers a value") {
        const auto a = distance_transform(g, grid, 3.0), b = distance_transform(g, grid, 6.0);
        for (std::size_t q = 0; q < grid.voxel_count(); ++q) CHECK(b.values()[q] >= a.values()[q]);
    }
    SUBCASE("integer translation shifts the map") {
        const GridSpec big(30, 30);
        std::vector<Vec3> moved;
        for (const auto& p : g.vertices()) moved.push_back(p + Vec3(3, 2));
        const auto a = distance_transform(g, big, 4.0), b = distance_transform(g.with_vertices(moved), big, 4.0);
        for (int y = 0; y < 25; ++y)
            for (int x = 0; x < 25; ++x)
                CHECK(b.values().at(x + 3, y + 2) == doctest::Approx(a.values().at(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("a graph without edges gives the constant map") {
    const auto g = build_graph(2, {{3, 3}}, {});
    const auto map = distance_transform(g, GridSpec(8, 8), 2.5);
    CHECK(map.active().empty());
    for (double v : map.values().values()) CHECK(v == 2.5);
}

TEST_CASE("distance_transform rejects bad arguments") {
    const auto g = build_graph(2, {{1, 1}, {4, 4}}, {{0, 1}});
    CHECK_THROWS_AS((void)distance_transform(g, GridSpec(8, 8), 0.0), DomainError);
    CHECK_THROWS_AS((void)distance_transform(g, GridSpec(8, 8, 8), 3.0), GraphError);
    const auto map = distance_transform(g, GridSpec(8, 8), 3.0);
    CHECK_THROWS_AS((void)distance_subgradient(map, g, ScalarVolume(GridSpec(9, 8), 1.0)), DomainError);
}

TEST_CASE("distance_subgradient matches finite differences away from ties") {
    int instances = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Rng rng(seed);
        const GridSpec grid = seed % 4 == 0 ? GridSpec(10, 10, 10) : GridSpec(16, 14);
        const auto g = oracle::random_chain(rng, grid, 3 + static_cast<int>(rng.index(4)));
        const double d = 4.0;
        std::vector<double> up(grid.voxel_count());
        for (auto& u : up) u = rng.uniform(-1.0, 1.0);
        const ScalarVolume upstream(grid, up);
        const auto map = distance_transform(g, grid, d);
        const auto sub = distance_subgradient(map, g, upstream);

        const auto objective = [&](const AnnotationGraph& c) {
            const auto m = distance_transform(c, grid, d);
            double s = 0.0;
            for (std::size_t q = 0; q < up.size(); ++q) s += up[q] * m.values()[q];
            return s;
        };
        const auto assignment = [&](const AnnotationGraph& c) {
            std::vector<std::ptrdiff_t> e(grid.voxel_count(), -1);
            for (const auto& a : distance_transform(c, grid, d).active()) e[a.voxel] = static_cast<std::ptrdiff_t>(a.edge);
            return e;
        };
        const double h = 1e-6;
        std::vector<double> fd, an;
        for (std::size_t v = 0; v < g.vertex_count(); ++v)
            for (int a = 0; a < grid.dim(); ++a) {
                const auto plus = oracle::moved(g, v, a, h), minus = oracle::moved(g, v, a, -h);
                if (assignment(plus) != assignment(minus)) continue; // nearest edge switches: a tie
                fd.push_back((objective(plus) - objective(minus)) / (2 * h));
                an.push_back(sub[v][static_cast<std::size_t>(a)]);
            }
        REQUIRE(!fd.empty());
        CHECK(oracle::relative_error(an, fd) < 1e-4);
        ++instances;
    }
    CHECK(instances == 20);
}

TEST_CASE("zero upstream gives a zero subgradient") {
    const auto g = build_graph(2, {{1.3, 1.7}, {6.1, 4.4}}, {{0, 1}});
    const GridSpec grid(8, 8);
    const auto sub = distance_subgradient(distance_transform(g, grid, 3.0), g, ScalarVolume(grid, 0.0));
    for (const auto& s : sub) CHECK(s == Vec3());
}
