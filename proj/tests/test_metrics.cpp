#include <doctest.h>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"
#include "netsnake/metrics.hpp"
#include "netsnake/synth.hpp"
#include "support/metric_oracles.hpp"
#include "support/oracles.hpp"

using namespace netsnake;

namespace {

// Random forest on at most 6 vertices: every component is a tree, so endpoints exist.
AnnotationGraph small_tree(Rng& rng, const GridSpec& grid) {
    const std::size_t n = 2 + rng.index(5);
    std::vector<Vec3> v;
    for (std::size_t i = 0; i < n; ++i)
        v.emplace_back(double(rng.index(std::size_t(grid.extent(0)))), double(rng.index(std::size_t(grid.extent(1)))));
    std::vector<Edge> e;
    for (std::size_t i = 1; i < n; ++i)
        if (rng.uniform() < 0.85) e.push_back({rng.index(i), i});
    if (e.empty()) e.push_back({0, 1});
    return build_graph(2, std::move(v), std::move(e));
}

std::size_t count_degree(const AnnotationGraph& g, std::size_t lo, std::size_t hi) {
    std::size_t n = 0;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) n += g.degree(v) >= lo && g.degree(v) <= hi;
    return n;
}

ScalarVolume tube(const AnnotationGraph& g, const GridSpec& grid) { return distance_transform(g, grid, 6.0).values(); }

} // namespace

TEST_CASE("CCQ matches a pairwise scan") {
    Rng rng(21);
    const GridSpec grid(14, 12);
    for (int it = 0; it < 40; ++it) {
        Mask a(grid), b(grid);
        for (auto& x : a.on) x = rng.uniform() < 0.15;
        for (auto& x : b.on) x = rng.uniform() < 0.15;
        if (b.count() == 0) continue;
        for (double r : {0.0, 1.0, 1.5, 3.0}) {
            const auto got = ccq(a, b, r), ref = oracle::brute_ccq(a, b, r);
            CHECK(got.correctness == ref.correctness);
            CHECK(got.completeness == ref.completeness);
            CHECK(got.quality == ref.quality);
        }
    }
}

TEST_CASE("CCQ examples and edge cases") {
    const GridSpec grid(10, 10);
    Mask gt(grid), pred(grid);
    for (int x = 0; x < 10; ++x) gt.on[grid.index(x, 5, 0)] = 1;
    for (int x = 0; x < 5; ++x) pred.on[grid.index(x, 5, 0)] = 1;
    pred.on[grid.index(9, 0, 0)] = 1; // far false positive
    const auto c = ccq(pred, gt, 0.0);
    CHECK(c.correctness == doctest::Approx(5.0 / 6.0));
    CHECK(c.completeness == doctest::Approx(0.5));
    CHECK(c.quality == doctest::Approx(5.0 / 11.0));
    const auto same = ccq(gt, gt, 3.0);
    CHECK(same.correctness == 1.0);
    CHECK(same.completeness == 1.0);
    CHECK(same.quality == 1.0);
    const auto none = ccq(Mask(grid), gt);
    CHECK(none.quality == 0.0);
    CHECK_THROWS_AS((void)ccq(pred, Mask(grid)), DomainError);
    CHECK_THROWS_AS((void)ccq(pred, Mask(GridSpec(9, 10))), DomainError);
}

TEST_CASE("APLS and TLTS match exhaustive enumeration on small graphs") {
    Rng rng(5);
    const GridSpec grid(12, 12);
    PathMetricParams params;
    params.snap_radius = 3.0;
    int compared = 0;
    for (int it = 0; it < 200; ++it) {
        const auto gt = small_tree(rng, grid);
        const auto pred = rng.uniform() < 0.2 ? gt : small_tree(rng, grid);
        CAPTURE(it);
        CHECK(apls(pred, gt, params) == doctest::Approx(oracle::brute_apls(pred, gt, 3.0)).epsilon(1e-12));
        for (double tol : {0.05, 0.15, 0.5})
            CHECK(tlts(pred, gt, tol, params) == doctest::Approx(oracle::brute_tlts(pred, gt, tol, 3.0)).epsilon(1e-12));
        ++compared;
    }
    CHECK(compared == 200);
}

TEST_CASE("APLS and TLTS hand examples") {
    // Y with arms 3, 4, 5 from a hub at (5, 5)
    const auto y = build_graph(2, {{5, 5}, {2, 5}, {5, 9}, {10, 5}}, {{0, 1}, {0, 2}, {0, 3}});
    CHECK(apls(y, y) == 1.0);
    CHECK(tlts(y, y) == 1.0);

    // drop the long arm. The hub has degree 3, so it is an endpoint too: of the six
    // truth pairs only those avoiding vertex 3 survive
    const auto two = build_graph(2, {{5, 5}, {2, 5}, {5, 9}}, {{0, 1}, {0, 2}});
    PathMetricParams p;
    p.snap_radius = 0.5;
    CHECK(tlts(two, y, 0.15, p) == doctest::Approx(3.0 / 6.0));
    // pred->truth: the single pair (1,2) matches exactly
    CHECK(apls(two, y, p) == doctest::Approx(0.5 * (3.0 / 6.0 + 1.0)));

    // a detour 20% longer fails TLTS at 15%; APLS averages 1 - 2/10 and 1 - 2/12
    const auto line = build_graph(2, {{0, 0}, {10, 0}}, {{0, 1}});
    const auto bent = build_graph(2, {{0, 0}, {5, std::sqrt(11.0)}, {10, 0}}, {{0, 1}, {1, 2}});
    CHECK(tlts(bent, line) == 0.0);
    CHECK(apls(bent, line) == doctest::Approx(0.5 * (0.8 + 1.0 - 2.0 / 12.0)));

    CHECK_THROWS_AS((void)apls(y, build_graph(2, {{0, 0}, {1, 0}, {1, 1}}, {{0, 1}, {1, 2}, {2, 0}})), DomainError);
    CHECK_THROWS_AS((void)tlts(y, y, 1.5), DomainError);
    p.n_pairs = 0;
    CHECK_THROWS_AS((void)apls(y, y, p), DomainError);
}

TEST_CASE("pair subsampling is seeded") {
    Rng rng(9);
    const GridSpec grid(40, 40);
    std::vector<Vec3> v{{20, 20}};
    std::vector<Edge> e;
    for (std::size_t i = 1; i <= 30; ++i) {
        v.push_back(oracle::random_point(rng, grid, 1.0));
        e.push_back({0, i});
    }
    const auto star = build_graph(2, v, e);
    const auto pred = star.with_vertices([&] {
        auto w = v;
        for (auto& p : w) p = p + Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1));
        return w;
    }());
    PathMetricParams p;
    p.n_pairs = 50;
    const double a = apls(pred, star, p), b = apls(pred, star, p);
    CHECK(a == b);
    p.n_pairs = 1000;
    CHECK(apls(pred, star, p) == doctest::Approx(oracle::brute_apls(pred, star, 4.0)).epsilon(1e-12));
}

TEST_CASE("identity inputs score 1 everywhere") {
    const auto fx = make_tree_fixture(GridSpec(64, 64), 5, 2);
    const auto r = evaluate_graphs(fx.truth, fx.truth, fx.grid);
    CHECK(r.correctness == 1.0);
    CHECK(r.completeness == 1.0);
    CHECK(r.quality == 1.0);
    CHECK(r.apls == 1.0);
    CHECK(r.tlts == 1.0);
    CHECK(metrics_csv_row(r) == "1.000000,1.000000,1.000000,1.000000,1.000000");
}

TEST_CASE("a break costs far more APLS than CCQ quality") {
    const auto fx = make_fig4_fixture();
    const auto broken = oracle::break_chain(fx.truth, 8.0);
    CHECK(broken.vertex_count() < fx.truth.vertex_count());
    CHECK(count_degree(broken, 1, 1) == 4);
    const auto r = evaluate_graphs(broken, fx.truth, fx.grid);
    CHECK(r.apls == doctest::Approx(0.5));
    CHECK(r.tlts == 0.0);
    CHECK(1.0 - r.apls >= 5.0 * (1.0 - r.quality));
}

TEST_CASE("rasterize") {
    const GridSpec grid(8, 8);
    const auto m = rasterize(build_graph(2, {{1, 1}, {6, 1}, {6, 4}}, {{0, 1}, {1, 2}}), grid);
    CHECK(m.count() == 9);
    CHECK(m.on[grid.index(3, 1, 0)] == 1);
    CHECK(m.on[grid.index(6, 3, 0)] == 1);
    CHECK(rasterize(build_graph(2, {{-5, -5}, {-1, -1}}, {{0, 1}}), grid).count() == 0);
}

TEST_CASE("skeletonize_and_graph") {
    SUBCASE("a thick straight tube becomes one centered curve") {
        const GridSpec grid(32, 20);
        const auto line = build_graph(2, {{4, 10}, {26, 10}}, {{0, 1}});
        const auto g = skeletonize_and_graph(tube(line, grid), 2.0);
        REQUIRE(g.vertex_count() > 0);
        CHECK(count_degree(g, 1, 1) == 2);
        CHECK(count_degree(g, 3, 99) == 0);
        for (const auto& p : g.vertices()) CHECK(std::abs(p[1] - 10.0) <= 2.0); // rounded tube ends may bend
        CHECK(g.total_length() > 16.0);
    }
    SUBCASE("a thick Y keeps one junction and three ends") {
        const GridSpec grid(40, 40);
        const auto y = build_graph(2, {{20, 20}, {20, 4}, {6, 32}, {34, 32}}, {{0, 1}, {0, 2}, {0, 3}});
        const auto g = coarsen(skeletonize_and_graph(tube(y, grid), 2.0));
        CHECK(count_degree(g, 3, 3) == 1);
        CHECK(count_degree(g, 1, 1) == 3);
    }
    SUBCASE("empty mask and determinism") {
        const GridSpec grid(10, 10);
        CHECK(skeletonize_and_graph(ScalarVolume(grid, 5.0), 1.0).vertex_count() == 0);
        const auto fx = make_tree_fixture(GridSpec(48, 48), 3, 7);
        const auto a = skeletonize_and_graph(fx.field, 2.0), b = skeletonize_and_graph(fx.field, 2.0);
        CHECK(std::equal(a.vertices().begin(), a.vertices().end(), b.vertices().begin(), b.vertices().end()));
    }
    SUBCASE("thinning keeps the mask connected and inside the input") {
        const GridSpec grid(24, 24);
        const auto y = tube(build_graph(2, {{3, 3}, {12, 20}, {20, 6}}, {{0, 1}, {1, 2}}), grid);
        const auto mask = threshold_below(y, 2.5);
        const auto thin_mask = thin(mask);
        CHECK(thin_mask.count() > 0);
        CHECK(thin_mask.count() < mask.count());
        for (std::size_t q = 0; q < mask.on.size(); ++q)
            if (thin_mask.on[q]) CHECK(mask.on[q] == 1);
    }
}
