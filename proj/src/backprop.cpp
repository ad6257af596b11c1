#include "netsnake/backprop.hpp"

#include <algorithm>
#include <string>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"

namespace netsnake {

std::string_view to_string(TrainingMode mode) noexcept {
    switch (mode) {
    case TrainingMode::Baseline: return "baseline";
    case TrainingMode::SnakeSimple: return "simple";
    case TrainingMode::SnakeFull: return "full";
    case TrainingMode::SnakeFast: return "fast";
    }
    return "?";
}

TrainingMode parse_training_mode(std::string_view name) {
    if (name == "baseline") return TrainingMode::Baseline;
    if (name == "simple") return TrainingMode::SnakeSimple;
    if (name == "full") return TrainingMode::SnakeFull;
    if (name == "fast") return TrainingMode::SnakeFast;
    throw ConfigError("unknown training mode '" + std::string(name) + "' (expected baseline, simple, full or fast)");
}

LossGradient loss_and_grad_y(const AnnotationGraph& c, const ScalarVolume& y, double d) {
    const auto map = distance_transform(c, y.grid(), d);
    const auto n = static_cast<double>(y.size());
    std::vector<double> g(y.size());
    double sse = 0.0;
    for (std::size_t q = 0; q < y.size(); ++q) {
        const double r = y[q] - map.values()[q];
        sse += r * r;
        g[q] = 2.0 * r / n;
    }
    return {sse / n, ScalarVolume(y.grid(), std::move(g))};
}

ScalarVolume grad_full(const AnnotationGraph& c_star, const ScalarVolume& y, double d) {
    return loss_and_grad_y(c_star, y, d).gradient;
}

ScalarVolume grad_simple(const AnnotationGraph& c_dagger, const ScalarVolume& y, double d) {
    return loss_and_grad_y(c_dagger, y, d).gradient;
}

Tape::Tape(SnakeSystem system, std::shared_ptr<const SmoothedField> field, AnnotationGraph initial)
    : system_(std::move(system)), field_(std::move(field)), initial_(initial), final_(std::move(initial)) {
    if (!field_) throw DomainError("Tape: field is null");
}

namespace {

// Force of the fast driver together with what the reverse sweep needs.
Eigen::MatrixXd sample_forces(const SmoothedField& field, const Eigen::MatrixXd& c, int dim, TapeStep* record) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(c.rows(), c.cols());
    for (Eigen::Index v = 0; v < c.rows(); ++v) {
        Vec3 p;
        for (int a = 0; a < dim; ++a) p[static_cast<std::size_t>(a)] = c(v, a);
        const auto sp = clamp_to_grid(p, field.grid());
        const auto grad = field.gradient_at(sp.position);
        for (int a = 0; a < dim; ++a)
            if (!sp.clamped[static_cast<std::size_t>(a)]) g(v, a) = grad[static_cast<std::size_t>(a)];
        if (record) {
            record->samples.push_back(sp);
            record->hessians.push_back(field.hessian_at(sp.position));
        }
    }
    return g;
}

} // namespace

bool Tape::replays_exactly() const {
    Eigen::MatrixXd c = coordinates(initial_);
    for (const auto& s : steps_) {
        if (c != s.coords) return false;
        c = semi_implicit_step(system_, c, sample_forces(*field_, c, initial_.dim(), nullptr));
    }
    return c == coordinates(final_);
}

Tape record_fast_run(const SnakeSystem& system, const AnnotationGraph& graph, std::shared_ptr<const SmoothedField> field,
                     int steps, double divergence_radius) {
    if (steps < 0) throw DomainError("record_fast_run: steps must be >= 0");
    if (system.vertex_count() != graph.vertex_count())
        throw DomainError("record_fast_run: system and graph vertex counts differ");
    if (field && field->grid().dim() != graph.dim())
        throw GraphError(GraphError::Kind::DimensionMismatch, "graph and field dimensionality differ");
    Tape tape(system, std::move(field), graph);
    const Eigen::MatrixXd start = coordinates(graph);
    Eigen::MatrixXd c = start;
    for (int t = 0; t < steps; ++t) {
        TapeStep rec;
        rec.coords = c;
        const auto g = sample_forces(*tape.field_, c, graph.dim(), &rec);
        Eigen::MatrixXd next = semi_implicit_step(system, c, g);
        check_divergence(start, next, t, divergence_radius);

        StepReport rep;
        rep.step = t;
        rep.residual = c.rows() > 0 ? (next - c).cwiseAbs().maxCoeff() : 0.0;
        rep.regularizer = system.energy(c);
        double s = 0.0;
        for (const auto& sp : rec.samples) {
            s += tape.field_->value_at(sp.position);
            if (sp.clamped[0] || sp.clamped[1] || sp.clamped[2]) ++rep.clamped_vertices;
        }
        rep.fast_energy = s;
        tape.reports_.push_back(rep);
        tape.steps_.push_back(std::move(rec));
        c = std::move(next);
    }
    tape.final_ = graph.with_vertices(to_points(c));
    return tape;
}

ScalarVolume grad_fast(const Tape& tape, const AnnotationGraph& c_dagger, const ScalarVolume& y, double d) {
    const auto& field = tape.field();
    if (!(field.grid() == y.grid())) throw DomainError("grad_fast: tape field grid differs from y");
    if (!std::equal(y.values().begin(), y.values().end(), field.base().values().begin()))
        throw DomainError("grad_fast: tape was recorded on a different field");
    if (c_dagger.vertex_count() != tape.final_graph().vertex_count() ||
        coordinates(c_dagger) != coordinates(tape.final_graph()))
        throw DomainError("grad_fast: coordinates do not match the end of the tape");

    const auto map = distance_transform(c_dagger, y.grid(), d);
    const auto n = static_cast<double>(y.size());
    std::vector<double> direct(y.size()), dl_dd(y.size());
    for (std::size_t q = 0; q < y.size(); ++q) {
        const double r = y[q] - map.values()[q];
        direct[q] = 2.0 * r / n;
        dl_dd[q] = -direct[q];
    }
    const int dim = c_dagger.dim();
    const auto dc = distance_subgradient(map, c_dagger, ScalarVolume(y.grid(), std::move(dl_dd)));
    Eigen::MatrixXd u(static_cast<Eigen::Index>(dc.size()), dim);
    for (std::size_t v = 0; v < dc.size(); ++v)
        for (int a = 0; a < dim; ++a) u(static_cast<Eigen::Index>(v), a) = dc[v][static_cast<std::size_t>(a)];

    const auto& sys = tape.system();
    std::vector<double> ybar(y.size(), 0.0);
    const auto& steps = tape.steps();
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const Eigen::MatrixXd w = sys.solve(u);
        Eigen::MatrixXd next = sys.gamma() * w;
        for (Eigen::Index v = 0; v < w.rows(); ++v) {
            const auto& sp = it->samples[static_cast<std::size_t>(v)];
            const auto& h = it->hessians[static_cast<std::size_t>(v)];
            Vec3 wm;
            for (int a = 0; a < dim; ++a)
                if (!sp.clamped[static_cast<std::size_t>(a)]) wm[static_cast<std::size_t>(a)] = w(v, a);
            field.accumulate_gradient_adjoint(sp.position, -1.0 * wm, ybar);
            for (int a = 0; a < dim; ++a) {
                const auto ia = static_cast<std::size_t>(a);
                if (sp.clamped[ia]) continue;
                double hw = 0.0;
                for (int b = 0; b < dim; ++b) hw += h[ia][static_cast<std::size_t>(b)] * wm[static_cast<std::size_t>(b)];
                next(v, a) -= hw;
            }
        }
        u = std::move(next);
    }
    for (std::size_t q = 0; q < y.size(); ++q) direct[q] += ybar[q];
    return ScalarVolume(y.grid(), std::move(direct));
}

} // namespace netsnake
