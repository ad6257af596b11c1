#include "netsnake/snake.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"

namespace netsnake {

Eigen::MatrixXd coordinates(const AnnotationGraph& graph) {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(graph.vertex_count()), graph.dim());
    for (std::size_t i = 0; i < graph.vertex_count(); ++i)
        for (int a = 0; a < graph.dim(); ++a) c(static_cast<Eigen::Index>(i), a) = graph.vertex(i)[static_cast<std::size_t>(a)];
    return c;
}

std::vector<Vec3> to_points(const Eigen::MatrixXd& coords) {
    std::vector<Vec3> out(static_cast<std::size_t>(coords.rows()));
    for (Eigen::Index i = 0; i < coords.rows(); ++i)
        for (Eigen::Index a = 0; a < coords.cols(); ++a) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = coords(i, a);
    return out;
}

Eigen::SparseMatrix<double> assemble_regularizer(const AnnotationGraph& graph, double alpha, double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DomainError("assemble_regularizer: alpha and beta must be >= 0");
    using Index = Eigen::Index;
    std::vector<Eigen::Triplet<double>> t;
    // Each squared linear form k^T c contributes 2 * weight * k k^T.
    for (const auto& e : graph.edges()) {
        const auto u = static_cast<Index>(e.u), v = static_cast<Index>(e.v);
        const double w = 2.0 * alpha;
        t.emplace_back(u, u, w);
        t.emplace_back(v, v, w);
        t.emplace_back(u, v, -w);
        t.emplace_back(v, u, -w);
    }
    for (const auto& tr : graph.triples()) {
        const std::array<Index, 3> idx{static_cast<Index>(tr.u), static_cast<Index>(tr.v), static_cast<Index>(tr.w)};
        constexpr std::array<double, 3> k{1.0, -2.0, 1.0};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) t.emplace_back(idx[i], idx[j], 2.0 * beta * k[i] * k[j]);
    }
    const auto n = static_cast<Index>(graph.vertex_count());
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

double regularizer_energy(const AnnotationGraph& graph, double alpha, double beta) {
    double springs = 0.0, bending = 0.0;
    for (const auto& e : graph.edges()) {
        const Vec3 d = graph.vertex(e.u) - graph.vertex(e.v);
        springs += dot(d, d);
    }
    for (const auto& t : graph.triples()) {
        const Vec3 d = graph.vertex(t.u) - 2.0 * graph.vertex(t.v) + graph.vertex(t.w);
        bending += dot(d, d);
    }
    return alpha * springs + beta * bending;
}

SnakeSystem::SnakeSystem(const AnnotationGraph& graph, double alpha, double beta, double gamma)
    : alpha_(alpha), beta_(beta), gamma_(gamma) {
    if (!(gamma > 0.0)) throw DomainError("SnakeSystem: gamma must be > 0");
    auto a = std::make_shared<Eigen::SparseMatrix<double>>(assemble_regularizer(graph, alpha, beta));
    Eigen::SparseMatrix<double> shifted(a->rows(), a->cols());
    shifted.setIdentity();
    shifted = *a + gamma * shifted;
    auto solver = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    if (a->rows() > 0) {
        solver->compute(shifted);
        if (solver->info() != Eigen::Success) throw Error("SnakeSystem: factorization of A + gamma I failed");
    }
    a_ = std::move(a);
    solver_ = std::move(solver);
}

Eigen::MatrixXd SnakeSystem::solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != a_->rows()) throw DomainError("SnakeSystem::solve: row count differs from the system");
    if (rhs.rows() == 0) return rhs;
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solver_->solve(rhs.col(c));
    return out;
}

double SnakeSystem::energy(const Eigen::MatrixXd& coords) const {
    double e = 0.0;
    for (Eigen::Index c = 0; c < coords.cols(); ++c) e += 0.5 * coords.col(c).dot(*a_ * coords.col(c));
    return e;
}

Eigen::MatrixXd SnakeSystem::gradient(const Eigen::MatrixXd& coords) const { return *a_ * coords; }

FullDriver::FullDriver(ScalarVolume target, double truncation, double data_weight)
    : target_(std::move(target)), truncation_(truncation), data_weight_(data_weight) {
    if (!(truncation > 0.0)) throw DomainError("FullDriver: truncation must be > 0");
    if (!(data_weight > 0.0)) throw DomainError("FullDriver: data_weight must be > 0");
}

DriverForces FullDriver::forces(const AnnotationGraph& graph) const {
    const auto map = distance_transform(graph, target_.grid(), truncation_);
    const auto& d = map.values();
    std::vector<double> upstream(d.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = d[i] - target_[i];
        sse += r * r;
        upstream[i] = 2.0 * data_weight_ * r;
    }
    const auto grad = distance_subgradient(map, graph, ScalarVolume(target_.grid(), std::move(upstream)));
    DriverForces out;
    out.gradient = Eigen::MatrixXd(static_cast<Eigen::Index>(grad.size()), graph.dim());
    for (std::size_t i = 0; i < grad.size(); ++i)
        for (int a = 0; a < graph.dim(); ++a) out.gradient(static_cast<Eigen::Index>(i), a) = grad[i][static_cast<std::size_t>(a)];
    out.loss = sse / static_cast<double>(d.size());
    return out;
}

SamplePoint clamp_to_grid(const Vec3& p, const GridSpec& grid) noexcept {
    SamplePoint s{p, {false, false, false}};
    for (int a = 0; a < grid.dim(); ++a) {
        const auto i = static_cast<std::size_t>(a);
        const double hi = grid.extent(a) - 1.0;
        if (p[i] < 0.0) {
            s.position[i] = 0.0;
            s.clamped[i] = true;
        } else if (p[i] > hi) {
            s.position[i] = hi;
            s.clamped[i] = true;
        }
    }
    return s;
}

FastDriver::FastDriver(std::shared_ptr<const SmoothedField> field) : field_(std::move(field)) {
    if (!field_) throw DomainError("FastDriver: field is null");
}

DriverForces FastDriver::forces(const AnnotationGraph& graph) const {
    const auto& grid = field_->grid();
    if (graph.dim() != grid.dim()) throw GraphError(GraphError::Kind::DimensionMismatch, "graph and field dimensionality differ");
    DriverForces out;
    out.gradient = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(graph.vertex_count()), graph.dim());
    double s = 0.0;
    for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
        const auto sp = clamp_to_grid(graph.vertex(v), grid);
        const auto g = field_->gradient_at(sp.position);
        s += field_->value_at(sp.position);
        bool any = false;
        for (int a = 0; a < graph.dim(); ++a) {
            const auto i = static_cast<std::size_t>(a);
            any = any || sp.clamped[i];
            out.gradient(static_cast<Eigen::Index>(v), a) = sp.clamped[i] ? 0.0 : g[i];
        }
        if (any) ++out.clamped_vertices;
    }
    out.fast_energy = s;
    return out;
}

Eigen::MatrixXd semi_implicit_step(const SnakeSystem& system, const Eigen::MatrixXd& coords,
                                   const Eigen::MatrixXd& force) {
    for (Eigen::Index v = 0; v < force.rows(); ++v)
        if (!force.row(v).allFinite())
            throw DivergenceError("non-finite snake force at vertex " + std::to_string(v), -1, v);
    return system.solve(system.gamma() * coords - force);
}

AnnotationGraph snake_step(const SnakeSystem& system, const AnnotationGraph& graph, const SnakeDriver& driver) {
    const auto c = coordinates(graph);
    return graph.with_vertices(to_points(semi_implicit_step(system, c, driver.forces(graph).gradient)));
}

AnnotationGraph snake_step_full(const SnakeSystem& system, const AnnotationGraph& graph, const ScalarVolume& y,
                                double truncation, double data_weight) {
    return snake_step(system, graph, FullDriver(y, truncation, data_weight));
}

AnnotationGraph snake_step_fast(const SnakeSystem& system, const AnnotationGraph& graph, const SmoothedField& field) {
    // Non-owning alias: the driver does not outlive this call.
    const FastDriver driver(std::shared_ptr<const SmoothedField>(&field, [](const SmoothedField*) {}));
    return snake_step(system, graph, driver);
}

void check_divergence(const Eigen::MatrixXd& start, const Eigen::MatrixXd& next, int step, double radius) {
    for (Eigen::Index v = 0; v < next.rows(); ++v) {
        if (!next.row(v).allFinite())
            throw DivergenceError("snake diverged: non-finite coordinates at vertex " + std::to_string(v) + ", step " +
                                      std::to_string(step),
                                  step, v);
        if ((next.row(v) - start.row(v)).norm() > radius)
            throw DivergenceError("snake diverged: vertex " + std::to_string(v) + " moved farther than " +
                                      std::to_string(radius) + " voxels by step " + std::to_string(step),
                                  step, v);
    }
}

SnakeRun run_snake(const SnakeSystem& system, const AnnotationGraph& graph, const SnakeDriver& driver, int steps,
                   double divergence_radius) {
    if (steps < 1) throw DomainError("run_snake: steps must be >= 1");
    if (system.vertex_count() != graph.vertex_count())
        throw DomainError("run_snake: system and graph vertex counts differ");
    const Eigen::MatrixXd start = coordinates(graph);
    Eigen::MatrixXd c = start;
    SnakeRun run;
    AnnotationGraph current = graph;
    for (int t = 0; t < steps; ++t) {
        const auto f = driver.forces(current);
        Eigen::MatrixXd next;
        try {
            next = semi_implicit_step(system, c, f.gradient);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(t), t, e.vertex());
        }
        check_divergence(start, next, t, divergence_radius);
        const double residual = c.rows() > 0 ? (next - c).cwiseAbs().maxCoeff() : 0.0;
        StepReport rep;
        rep.step = t;
        rep.residual = residual;
        rep.loss = f.loss;
        rep.regularizer = system.energy(c);
        rep.fast_energy = f.fast_energy;
        rep.clamped_vertices = f.clamped_vertices;
        run.reports.push_back(rep);
        run.residuals.push_back(residual);
        c = std::move(next);
        current = current.with_vertices(to_points(c));
    }
    run.graph = std::move(current);
    return run;
}

double stationarity_residual(const SnakeSystem& system, const AnnotationGraph& graph, const AnnotationGraph& initial,
                             const FullDriver& driver) {
    const auto g = driver.forces(graph).gradient;
    const double num = (system.gradient(coordinates(graph)) + g).norm();
    const double den = std::max(1.0, driver.forces(initial).gradient.norm());
    return num / den;
}

void write_step_reports(std::ostream& out, std::span<const StepReport> reports) {
    auto field = [](double v) {
        if (std::isnan(v)) return std::string();
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    out << "step,residual,L,R,S\n";
    for (const auto& r : reports)
        out << r.step << ',' << field(r.residual) << ',' << field(r.loss) << ',' << field(r.regularizer) << ','
            << field(r.fast_energy) << '\n';
}

} // namespace netsnake
