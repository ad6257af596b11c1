#include <doctest.h>

#include <memory>

#include "netsnake/backprop.hpp"
#include "netsnake/error.hpp"
#include "netsnake/synth.hpp"
#include "support/oracles.hpp"

using namespace netsnake;

namespace {

struct SmallCase {
    GridSpec grid;
    AnnotationGraph graph;
    ScalarVolume y;
    SnakeSystem system;
    int steps;
    double d;
};

// A chain in a small grid and a target that is the distance map of a nearby chain plus
// noise, so the forces are moderate and the snake stays inside.
SmallCase small_case(std::uint64_t seed) {
    Rng rng(seed);
    const GridSpec grid = seed % 3 == 0 ? GridSpec(9, 9, 8) : GridSpec(12 + static_cast<int>(seed % 5), 12);
    const auto g = oracle::random_chain(rng, grid, 4 + static_cast<int>(rng.index(3)), 3.0);
    const double d = 6.0;
    std::vector<Vec3> shifted;
    for (const auto& p : g.vertices()) {
        Vec3 s = p;
        for (int a = 0; a < grid.dim(); ++a) s[static_cast<std::size_t>(a)] += rng.uniform(-0.8, 0.8);
        shifted.push_back(s);
    }
    auto target = distance_transform(g.with_vertices(shifted), grid, d).values();
    std::vector<double> v(target.values().begin(), target.values().end());
    for (auto& x : v) x += rng.uniform(0.0, 0.3);
    SnakeSystem sys(g, 0.05, 0.01, 10.0);
    return {grid, g, ScalarVolume(grid, std::move(v)), sys, 1 + static_cast<int>(rng.index(5)), d};
}

double fast_loss(const SmallCase& c, const ScalarVolume& y, double sigma) {
    const auto tape = record_fast_run(c.system, c.graph, std::make_shared<const SmoothedField>(y, sigma), c.steps);
    return loss_and_grad_y(tape.final_graph(), y, c.d).loss;
}

} // namespace

TEST_CASE("loss_and_grad_y is zero at the snake's own distance map") {
    const GridSpec grid(20, 20);
    const auto g = build_graph(2, {{3, 4}, {15, 12}}, {{0, 1}});
    const auto y = distance_transform(g, grid, 8.0).values();
    const auto lg = loss_and_grad_y(g, y, 8.0);
    CHECK(lg.loss == 0.0);
    for (double v : lg.gradient.values()) CHECK(v == 0.0);
}

TEST_CASE("loss_and_grad_y matches finite differences and grad_full equals it") {
    const GridSpec grid(10, 10);
    const auto g = build_graph(2, {{2.2, 3.1}, {7.4, 6.3}, {4.0, 8.7}}, {{0, 1}, {1, 2}});
    Rng rng(5);
    std::vector<double> v(grid.voxel_count());
    for (auto& x : v) x = rng.uniform(0.0, 5.0);
    const ScalarVolume y(grid, v);
    const auto lg = loss_and_grad_y(g, y, 5.0);
    const auto gf = grad_full(g, y, 5.0);
    for (std::size_t q = 0; q < y.size(); q += 7) {
        const double fd = oracle::central_difference(
            [&](double h) { return loss_and_grad_y(g, oracle::bumped(y, q, h), 5.0).loss; }, 1e-4);
        CHECK(lg.gradient[q] == doctest::Approx(fd).epsilon(1e-8));
        CHECK(gf[q] == lg.gradient[q]);
    }
}

TEST_CASE("grad_fast matches finite differences on random small fixtures") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = small_case(seed);
        const double sigma = 1.0;
        const auto field = std::make_shared<const SmoothedField>(c.y, sigma);
        const auto tape = record_fast_run(c.system, c.graph, field, c.steps);
        const auto an = grad_fast(tape, tape.final_graph(), c.y, c.d);

        // probe voxels near the snake, where the tape term is nonzero
        Rng rng(seed * 17);
        std::vector<double> fd, ref;
        while (fd.size() < 20) {
            const auto& p = c.graph.vertex(rng.index(c.graph.vertex_count()));
            int xyz[3] = {0, 0, 0};
            for (int a = 0; a < c.grid.dim(); ++a)
                xyz[a] = std::clamp(static_cast<int>(std::lround(p[static_cast<std::size_t>(a)])) +
                                        static_cast<int>(rng.index(5)) - 2,
                                    0, c.grid.extent(a) - 1);
            const auto q = c.grid.index(xyz[0], xyz[1], xyz[2]);
            fd.push_back(oracle::central_difference(
                [&](double h) { return fast_loss(c, oracle::bumped(c.y, q, h), sigma); }, 1e-5));
            ref.push_back(an[q]);
        }
        CHECK(oracle::relative_error(ref, fd) < 1e-3);
        ++checked;
    }
    CHECK(checked == 20);
}

TEST_CASE("grad_fast with an empty tape reduces to loss_and_grad_y") {
    const auto c = small_case(4);
    const auto tape = record_fast_run(c.system, c.graph, std::make_shared<const SmoothedField>(c.y, 1.0), 0);
    CHECK(tape.length() == 0);
    const auto a = grad_fast(tape, c.graph, c.y, c.d);
    const auto b = loss_and_grad_y(c.graph, c.y, c.d).gradient;
    for (std::size_t q = 0; q < a.size(); ++q) CHECK(a[q] == b[q]);
}

TEST_CASE("the tape has T steps and replays exactly") {
    const auto c = small_case(7);
    const auto tape = record_fast_run(c.system, c.graph, std::make_shared<const SmoothedField>(c.y, 1.0), 5);
    CHECK(tape.length() == 5);
    CHECK(tape.reports().size() == 5);
    CHECK(tape.replays_exactly());
}

TEST_CASE("grad_fast rejects coordinates or fields that do not belong to the tape") {
    const auto c = small_case(2);
    const auto tape = record_fast_run(c.system, c.graph, std::make_shared<const SmoothedField>(c.y, 1.0), 3);
    CHECK_THROWS_AS((void)grad_fast(tape, c.graph, c.y, c.d), DomainError);
    CHECK_THROWS_AS((void)grad_fast(tape, tape.final_graph(), oracle::bumped(c.y, 0, 1.0), c.d), DomainError);
    CHECK_THROWS_AS((void)record_fast_run(c.system, c.graph, std::make_shared<const SmoothedField>(c.y, 1.0), -1),
                    DomainError);
}

TEST_CASE("grad_simple drops the tape term") {
    const auto fx = make_fig4_fixture();
    const SnakeSystem sys(fx.annotation, SnakeParams{});
    const auto tape = record_fast_run(sys, fx.annotation, std::make_shared<const SmoothedField>(fx.field, 1.0), 10);
    const auto simple = grad_simple(tape.final_graph(), fx.field, 20.0);
    const auto fast = grad_fast(tape, tape.final_graph(), fx.field, 20.0);
    double diff = 0.0;
    for (std::size_t q = 0; q < simple.size(); ++q) diff = std::max(diff, std::abs(simple[q] - fast[q]));
    CHECK(diff > 1e-6);
}

TEST_CASE("unrolled full-driver oracle matches finite differences") {
    const auto c = small_case(5);
    const double wd = 0.07;
    const int steps = 3;
    const auto total = oracle::unrolled_total_derivative(c.system, c.graph, c.y, c.d, wd, steps);
    Rng rng(3);
    std::vector<double> fd, ref;
    for (int i = 0; i < 15; ++i) {
        const auto& p = c.graph.vertex(rng.index(c.graph.vertex_count()));
        const auto q = c.grid.index(static_cast<int>(std::lround(p[0])), static_cast<int>(std::lround(p[1])),
                                    static_cast<int>(std::lround(p[2])));
        fd.push_back(oracle::central_difference(
            [&](double h) { return oracle::unrolled_objective(c.system, c.graph, oracle::bumped(c.y, q, h), c.d, wd, steps); },
            1e-5));
        ref.push_back(total[q]);
    }
    CHECK(oracle::relative_error(ref, fd) < 1e-4);
}

TEST_CASE("envelope gradient agrees with the unrolled derivative once the full driver is stationary") {
    // Smooth arc target with the snake started 1.5 voxels aside; the update contracts here.
    const GridSpec grid(24, 24);
    std::vector<Vec3> t, s;
    std::vector<Edge> e;
    for (int i = 0; i < 12; ++i) {
        const double y = 3 + 1.6 * i, x = 12 + 3 * std::sin(y / 6);
        t.push_back({x, y});
        s.push_back({x + 1.5, y});
        if (i) e.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(i)});
    }
    const auto truth = build_graph(2, t, e), snake = build_graph(2, s, e);
    const auto y = distance_transform(truth, grid, 8.0).values();
    const SnakeSystem sys(snake, 0.01, 0.001, 10.0);
    const FullDriver drv(y, 8.0, 0.02);
    const auto run = run_snake(sys, snake, drv, 100);
    CHECK(stationarity_residual(sys, run.graph, snake, drv) < 0.01);
    const auto total = oracle::unrolled_total_derivative(sys, snake, y, 8.0, 0.02, 100);
    CHECK(oracle::cosine(grad_full(run.graph, y, 8.0).values(), total) >= 0.99);
}
