#include <doctest.h>

#include <sstream>

#include <Eigen/Eigenvalues>

#include "netsnake/error.hpp"
#include "netsnake/field_model.hpp"
#include "netsnake/snake.hpp"
#include "netsnake/synth.hpp"
#include "support/oracles.hpp"

using namespace netsnake;

namespace {

// Random tree; vertices may take several children, so junctions appear.
AnnotationGraph random_graph(Rng& rng, int dim) {
    const int n = 3 + static_cast<int>(rng.index(10));
    std::vector<Vec3> v;
    for (int i = 0; i < n; ++i) v.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), dim == 3 ? rng.uniform(-5, 5) : 0.0});
    std::vector<Edge> e;
    for (int i = 1; i < n; ++i) e.push_back({rng.index(static_cast<std::uint64_t>(i)), static_cast<std::size_t>(i)});
    return build_graph(dim, std::move(v), std::move(e));
}

// Explicit spring + elasticity sum, written independently of the library.
double explicit_energy(const AnnotationGraph& g, double alpha, double beta) {
    double r = 0.0;
    for (const auto& e : g.edges()) r += alpha * dot(g.vertex(e.u) - g.vertex(e.v), g.vertex(e.u) - g.vertex(e.v));
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        const auto nb = g.neighbors(v);
        if (nb.size() != 2) continue;
        const Vec3 k = g.vertex(nb[0]) - 2.0 * g.vertex(v) + g.vertex(nb[1]);
        r += beta * dot(k, k);
    }
    return r;
}

} // namespace

TEST_CASE("two-vertex regularizer matrix") {
    const auto g = build_graph(2, {{0, 0}, {1, 0}}, {{0, 1}});
    const Eigen::MatrixXd a(assemble_regularizer(g, 1.0, 0.0));
    Eigen::MatrixXd expected(2, 2);
    expected << 2, -2, -2, 2;
    CHECK((a - expected).norm() == 0.0);
    CHECK(regularizer_energy(g, 1.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("zero weights give a zero matrix and a straight equally spaced chain has no bending energy") {
    Rng rng(1);
    const auto g = random_graph(rng, 2);
    CHECK(Eigen::MatrixXd(assemble_regularizer(g, 0.0, 0.0)).norm() == 0.0);
    const auto line = build_graph(2, {{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {{0, 1}, {1, 2}, {2, 3}});
    CHECK(regularizer_energy(line, 0.0, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)assemble_regularizer(g, -1.0, 0.0), DomainError);
}

TEST_CASE("half c^T A c equals the explicit spring and elasticity sum") {
    Rng rng(2024);
    for (int i = 0; i < 100; ++i) {
        const auto g = random_graph(rng, i % 2 ? 3 : 2);
        const double alpha = rng.uniform(0.0, 2.0), beta = rng.uniform(0.0, 2.0);
        const SnakeSystem sys(g, alpha, beta, 1.0);
        const double ref = explicit_energy(g, alpha, beta);
        CHECK(std::abs(sys.energy(coordinates(g)) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
        CHECK(regularizer_energy(g, alpha, beta) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("the regularizer matrix is symmetric positive semidefinite") {
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        const auto g = random_graph(rng, 2);
        const Eigen::MatrixXd a(assemble_regularizer(g, rng.uniform(0, 1), rng.uniform(0, 1)));
        CHECK((a - a.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("solve residual and symmetry of the inverse") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto g = random_graph(rng, 3);
        const SnakeSystem sys(g, 0.3, 0.2, rng.uniform(0.5, 20.0));
        const auto n = static_cast<Eigen::Index>(g.vertex_count());
        const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(n, 3), z = Eigen::MatrixXd::Random(n, 3);
        const Eigen::MatrixXd x = sys.solve(rhs);
        const Eigen::MatrixXd lhs = Eigen::MatrixXd(sys.matrix()) * x + sys.gamma() * x;
        CHECK((lhs - rhs).norm() / rhs.norm() < 1e-8);
        CHECK((sys.solve(rhs).cwiseProduct(z)).sum() == doctest::Approx((rhs.cwiseProduct(sys.solve(z))).sum()));
    }
    const auto g = build_graph(2, {{0, 0}, {1, 0}}, {{0, 1}});
    CHECK_THROWS_AS(SnakeSystem(g, 1.0, 0.0, 0.0), DomainError);
}

TEST_CASE("semi-implicit step with no regularizer is a gradient step of size 1/gamma") {
    const auto g = build_graph(2, {{0, 0}, {1, 0}, {2, 1}}, {{0, 1}, {1, 2}});
    const SnakeSystem sys(g, 0.0, 0.0, 1.0);
    const Eigen::MatrixXd c = coordinates(g), force = Eigen::MatrixXd::Constant(3, 2, 0.25);
    CHECK((semi_implicit_step(sys, c, force) - (c - force)).norm() < 1e-12);
    Eigen::MatrixXd bad = force;
    bad(1, 0) = std::nan("");
    CHECK_THROWS_AS((void)semi_implicit_step(sys, c, bad), DivergenceError);
}

TEST_CASE("fast driver on a linear ramp exerts the ramp slope on every vertex") {
    const GridSpec grid(40, 40);
    std::vector<double> v(grid.voxel_count());
    for (std::size_t q = 0; q < v.size(); ++q) v[q] = 0.5 * grid.center(q)[0];
    const auto field = std::make_shared<const SmoothedField>(ScalarVolume(grid, v), 1.0);
    const auto g = build_graph(2, {{15, 10}, {17, 20}, {20, 30}}, {{0, 1}, {1, 2}});
    const auto f = FastDriver(field).forces(g);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(f.gradient(i, 0) == doctest::Approx(0.5).epsilon(1e-3)); // kernel cut at 4 sigma
        CHECK(f.gradient(i, 1) == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("constant field leaves only the regularizer acting") {
    const GridSpec grid(30, 30);
    const auto field = std::make_shared<const SmoothedField>(ScalarVolume(grid, 3.0), 1.0);
    const auto g = build_graph(2, {{10, 10}, {14, 12}, {20, 11}}, {{0, 1}, {1, 2}});
    const SnakeSystem sys(g, 0.1, 0.01, 10.0);
    const auto next = snake_step(sys, g, FastDriver(field));
    const Eigen::MatrixXd expected = sys.solve(sys.gamma() * coordinates(g));
    CHECK((coordinates(next) - expected).norm() < 1e-9);
}

TEST_CASE("full driver decreases L + R monotonically on the fig4 fixture") {
    const auto fx = make_fig4_fixture();
    const SnakeParams p;
    const SnakeSystem sys(fx.annotation, p);
    const FullDriver drv(fx.field, p.truncation, p.data_weight);
    const auto n = static_cast<double>(fx.field.size());
    auto g = fx.annotation;
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 10; ++t) {
        const auto f = drv.forces(g);
        const double e = p.data_weight * n * f.loss + sys.energy(coordinates(g));
        CHECK(e <= prev);
        prev = e;
        g = snake_step(sys, g, drv);
    }
}

TEST_CASE("a snake already on its target does not move") {
    // spans the grid, so smoothing does not pull free ends inward
    const GridSpec grid(40, 40);
    std::vector<Vec3> v;
    std::vector<Edge> e;
    for (int i = 0; i < 27; ++i) {
        v.push_back({20.0, 1.5 * i});
        if (i) e.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(i)});
    }
    const auto g = build_graph(2, v, e);
    const auto y = distance_transform(g, grid, 10.0).values();
    const SnakeSystem sys(g, 0.0, 0.01, 10.0);
    const auto full = run_snake(sys, g, FullDriver(y, 10.0, 0.07), 5);
    CHECK((coordinates(full.graph) - coordinates(g)).cwiseAbs().maxCoeff() < 1e-6);
    // the hard 4-sigma kernel cutoff leaves jumps of order G'(4 sigma) when a vertex crosses a voxel plane
    const auto fast = run_snake(sys, g, FastDriver(std::make_shared<const SmoothedField>(y, 1.0)), 5);
    CHECK((coordinates(fast.graph) - coordinates(g)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("stationarity residual is at least 1 before any update when A c0 = 0") {
    const GridSpec grid(40, 40);
    std::vector<Vec3> truth, start;
    std::vector<Edge> e;
    for (int i = 0; i < 20; ++i) {
        truth.push_back({20.0, 5.0 + 1.5 * i});
        start.push_back({23.0, 5.0 + 1.5 * i});
        if (i) e.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(i)});
    }
    const auto t = build_graph(2, truth, e), c0 = build_graph(2, start, e);
    const SnakeSystem sys(c0, 0.0, 0.01, 10.0); // straight, equally spaced: A c0 = 0
    CHECK(sys.gradient(coordinates(c0)).norm() < 1e-12);
    const FullDriver drv(distance_transform(t, grid, 10.0).values(), 10.0, 0.07);
    CHECK(stationarity_residual(sys, c0, c0, drv) >= 1.0);
}

TEST_CASE("fast driver moves an offset snake toward the curve") {
    Fig4Params fp;
    fp.offset = 3.0;
    const auto fx = make_fig4_fixture(fp);
    const SnakeParams p;
    const SnakeSystem sys(fx.annotation, p);
    const auto run = run_snake(sys, fx.annotation, FastDriver(std::make_shared<const SmoothedField>(fx.field, 1.0)), 10);
    CHECK(run.residuals.size() == 10);
    CHECK(adjusted_annotation_error(run.graph, fx.truth) < adjusted_annotation_error(fx.annotation, fx.truth));
}

TEST_CASE("gamma = 1 diverges on the steep fixture and the error names step and vertex") {
    const auto fx = steepen(make_fig4_fixture(), 25.0);
    SnakeParams p;
    p.gamma = 1.0;
    const SnakeSystem sys(fx.annotation, p);
    try {
        (void)run_snake(sys, fx.annotation, FastDriver(std::make_shared<const SmoothedField>(fx.field, 1.0)), 10);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step() >= 0);
        CHECK(e.vertex() >= 0);
    }
}

TEST_CASE("vertices pushed outside the grid are clamped and reported") {
    const GridSpec grid(20, 20);
    std::vector<double> v(grid.voxel_count());
    for (std::size_t q = 0; q < v.size(); ++q) v[q] = grid.center(q)[0];
    const auto field = std::make_shared<const SmoothedField>(ScalarVolume(grid, v), 1.0);
    const auto g = build_graph(2, {{-0.5, 5}, {3, 5}}, {{0, 1}});
    const auto f = FastDriver(field).forces(g);
    CHECK(f.clamped_vertices == 1);
    CHECK(f.gradient(0, 0) == 0.0);
    const auto sp = clamp_to_grid({-0.5, 5}, grid);
    CHECK(sp.position == Vec3(0, 5));
    CHECK(sp.clamped[0]);
    CHECK(!sp.clamped[1]);
}

TEST_CASE("step report CSV") {
    std::vector<StepReport> r(2);
    r[0] = {0, 0.5, 0.25, 1.0, std::nan(""), 0};
    r[1] = {1, 0.125, std::nan(""), 2.0, 3.0, 0};
    std::ostringstream out;
    write_step_reports(out, r);
    const auto s = out.str();
    CHECK(s.rfind("step,residual,L,R,S\n", 0) == 0);
    CHECK(s.find("\n0,") != std::string::npos);
    CHECK(s.find("\n1,") != std::string::npos);
}
