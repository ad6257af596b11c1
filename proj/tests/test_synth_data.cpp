#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "netsnake/error.hpp"
#include "netsnake/field_model.hpp"
#include "netsnake/synth.hpp"
#include "support/oracles.hpp"

using namespace netsnake;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("netsnake_synth_" + name);
    fs::remove_all(dir);
    return dir;
}

bool inside(const AnnotationGraph& g, const GridSpec& grid) {
    return std::all_of(g.vertices().begin(), g.vertices().end(), [&](const Vec3& p) { return grid.contains(p); });
}

} // namespace

TEST_CASE("fig4 fixture with default parameters") {
    const auto fx = make_fig4_fixture();
    CHECK(fx.grid == GridSpec(96, 96));
    CHECK(fx.truth.shares_topology(fx.annotation));
    CHECK(inside(fx.truth, fx.grid));
    CHECK(inside(fx.annotation, fx.grid));
    CHECK(adjusted_annotation_error(fx.annotation, fx.truth) == doctest::Approx(4.0).epsilon(0.01));

    SUBCASE("break voxels carry d, everything else is the truth's distance map") {
        REQUIRE(!fx.gap.empty());
        const auto exact = distance_transform(fx.truth, fx.grid, 20.0).values();
        std::vector<bool> in_gap(fx.grid.voxel_count(), false);
        for (auto q : fx.gap) {
            in_gap[q] = true;
            CHECK(fx.field[q] == 20.0);
            CHECK(exact[q] < 0.5);
        }
        for (std::size_t q = 0; q < fx.field.size(); ++q)
            if (!in_gap[q]) CHECK(fx.field[q] == exact[q]);
    }
    SUBCASE("the break sits inside the curve, away from its ends") {
        for (auto q : fx.gap) {
            const auto p = fx.grid.center(q);
            CHECK(p[1] > 20.0);
            CHECK(p[1] < 76.0);
        }
    }
}

TEST_CASE("fig4 fixture without offset or break is exact") {
    Fig4Params p;
    p.offset = 0.0;
    p.gap_length = 0.0;
    const auto fx = make_fig4_fixture(p);
    CHECK(fx.gap.empty());
    CHECK(adjusted_annotation_error(fx.annotation, fx.truth) < 1e-9);
    const auto lg = loss_and_grad_y(fx.truth, fx.field, 20.0);
    CHECK(lg.loss == 0.0);
}

TEST_CASE("steepen scales the field and renames the fixture") {
    const auto fx = make_fig4_fixture();
    const auto st = steepen(fx, 25.0);
    CHECK(st.name == fx.name + "-steep");
    for (std::size_t q = 0; q < fx.field.size(); q += 31) CHECK(st.field[q] == doctest::Approx(25.0 * fx.field[q]));
    CHECK(std::equal(st.annotation.vertices().begin(), st.annotation.vertices().end(), fx.annotation.vertices().begin()));
}

TEST_CASE("tree fixture") {
    const GridSpec grid(96, 96);
    const auto a = make_tree_fixture(grid, 7, 3), b = make_tree_fixture(grid, 7, 3);

    SUBCASE("same seed, same fixture") {
        CHECK(std::equal(a.truth.vertices().begin(), a.truth.vertices().end(), b.truth.vertices().begin(), b.truth.vertices().end()));
        CHECK(std::equal(a.annotation.vertices().begin(), a.annotation.vertices().end(), b.annotation.vertices().begin()));
        const auto c = make_tree_fixture(grid, 7, 4);
        CHECK(!std::equal(a.truth.vertices().begin(), a.truth.vertices().end(), c.truth.vertices().begin(), c.truth.vertices().end()));
    }
    SUBCASE("a connected tree with junctions, inside the grid") {
        CHECK(inside(a.truth, grid));
        CHECK(inside(a.annotation, grid));
        CHECK(a.truth.edge_count() + 1 == a.truth.vertex_count());
        std::size_t junctions = 0;
        for (std::size_t v = 0; v < a.truth.vertex_count(); ++v) junctions += a.truth.degree(v) >= 3;
        CHECK(junctions >= 1);
    }
    SUBCASE("field is the truth's distance map, values in [0, d]") {
        const auto exact = distance_transform(a.truth, grid, 20.0).values();
        for (std::size_t q = 0; q < grid.voxel_count(); ++q) {
            CHECK(a.field[q] == exact[q]);
            CHECK(a.field[q] >= 0.0);
            CHECK(a.field[q] <= 20.0);
        }
    }
    SUBCASE("annotation displacement is bounded by the amplitude") {
        double largest = 0.0;
        for (std::size_t v = 0; v < a.truth.vertex_count(); ++v)
            largest = std::max(largest, distance(a.truth.vertex(v), a.annotation.vertex(v)));
        CHECK(largest == doctest::Approx(2.0));
    }
    SUBCASE("one branch is a single curve") {
        const auto one = make_tree_fixture(grid, 1, 5);
        for (std::size_t v = 0; v < one.truth.vertex_count(); ++v) CHECK(one.truth.degree(v) <= 2);
    }
    SUBCASE("3D grids work") {
        const auto t = make_tree_fixture(GridSpec(40, 40, 40), 3, 1);
        CHECK(t.truth.dim() == 3);
        CHECK(inside(t.truth, GridSpec(40, 40, 40)));
    }
    SUBCASE("impossible placement is a DomainError") {
        CHECK_THROWS_AS((void)make_tree_fixture(GridSpec(8, 8), 3, 0), DomainError);
    }
}

TEST_CASE("write_fixture output is byte-identical across regenerations") {
    const auto d1 = scratch_dir("a"), d2 = scratch_dir("b");
    write_fixture(d1, make_fig4_fixture());
    write_fixture(d2, make_fig4_fixture());
    for (const auto* f : {"field.raw", "field.raw.hdr", "truth.graph", "annotation.graph", "gap.raw", "manifest.txt"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(d1 / f));
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
    const auto back = read_volume(d1 / "field.raw");
    const auto fx = make_fig4_fixture();
    for (std::size_t q = 0; q < back.size(); q += 13) CHECK(back[q] == doctest::Approx(fx.field[q]).epsilon(1e-6));
    CHECK(slurp(d1 / "manifest.txt").find("offset = ") != std::string::npos);
    fs::remove_all(d1);
    fs::remove_all(d2);
}
