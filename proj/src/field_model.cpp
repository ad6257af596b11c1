#include "netsnake/field_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"

namespace netsnake {

PixelField::PixelField(const ScalarVolume& initial)
    : grid_(initial.grid()), theta_(initial.values().begin(), initial.values().end()) {}

ScalarVolume PixelField::evaluate() const { return ScalarVolume(grid_, theta_); }

std::vector<double> PixelField::pullback(const ScalarVolume& dy) const {
    if (!(dy.grid() == grid_)) throw DomainError("PixelField::pullback: gradient grid differs from the field");
    return {dy.values().begin(), dy.values().end()};
}

UpsampledField::UpsampledField(const GridSpec& fine, const GridSpec& coarse, double fill)
    : fine_(fine), coarse_(coarse), theta_(coarse.voxel_count(), fill) {
    if (fine.dim() != coarse.dim()) throw DomainError("UpsampledField: fine and coarse dimensionality differ");
    for (int a = 0; a < fine.dim(); ++a)
        if (coarse.extent(a) > fine.extent(a)) throw DomainError("UpsampledField: coarse grid larger than fine grid");
}

template <class Visit>
void UpsampledField::for_each_tap(std::size_t fine_index, Visit&& visit) const {
    const auto v = fine_.voxel(fine_index);
    std::array<std::array<int, 2>, 3> idx{};
    std::array<std::array<double, 2>, 3> w{};
    for (std::size_t a = 0; a < 3; ++a) {
        const int nf = fine_.extent(static_cast<int>(a)), nc = coarse_.extent(static_cast<int>(a));
        if (nc == 1 || nf == 1) {
            idx[a] = {0, 0};
            w[a] = {1.0, 0.0};
            continue;
        }
        const double t = v[a] * double(nc - 1) / double(nf - 1);
        const int i = std::min(static_cast<int>(std::floor(t)), nc - 2);
        const double f = t - i;
        idx[a] = {i, i + 1};
        w[a] = {1.0 - f, f};
    }
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                const double weight = w[0][i] * w[1][j] * w[2][k];
                if (weight != 0.0) visit(Tap{coarse_.index(idx[0][i], idx[1][j], idx[2][k]), weight});
            }
}

ScalarVolume UpsampledField::evaluate() const {
    std::vector<double> y(fine_.voxel_count(), 0.0);
    for (std::size_t q = 0; q < y.size(); ++q) for_each_tap(q, [&](Tap t) { y[q] += t.weight * theta_[t.coarse]; });
    return ScalarVolume(fine_, std::move(y));
}

std::vector<double> UpsampledField::pullback(const ScalarVolume& dy) const {
    if (!(dy.grid() == fine_)) throw DomainError("UpsampledField::pullback: gradient grid differs from the field");
    std::vector<double> g(theta_.size(), 0.0);
    for (std::size_t q = 0; q < dy.size(); ++q) for_each_tap(q, [&](Tap t) { g[t.coarse] += t.weight * dy[q]; });
    return g;
}

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(snake.alpha >= 0.0) || !(snake.beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
    if (!(snake.gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (snake.steps < 1) throw ConfigError("snake steps (T) must be >= 1");
    if (!(snake.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (!(snake.truncation > 0.0)) throw ConfigError("truncation d must be > 0");
    if (!(snake.data_weight > 0.0)) throw ConfigError("data weight must be > 0");
    if (!(divergence_radius > 0.0)) throw ConfigError("divergence radius must be > 0");
}

namespace {

double mean_displacement(const AnnotationGraph& a, const AnnotationGraph& b) {
    if (a.vertex_count() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t v = 0; v < a.vertex_count(); ++v) s += distance(a.vertex(v), b.vertex(v));
    return s / static_cast<double>(a.vertex_count());
}

} // namespace

TrainResult train(const Field& field, const AnnotationGraph& graph, const TrainConfig& config,
                  const TrainObserver& observer) {
    config.validate();
    const auto& grid = field.grid();
    if (graph.dim() != grid.dim())
        throw GraphError(GraphError::Kind::DimensionMismatch, "graph and field dimensionality differ");
    for (const auto& p : graph.vertices())
        if (!grid.contains(p)) throw DomainError("train: annotation vertex outside the grid");

    const auto& sp = config.snake;
    const SnakeSystem system(graph, sp);
    TrainResult out{field.clone(), graph, {}};
    auto& theta = *out.field;
    AnnotationGraph annotation = graph;

    for (int step = 0; step < config.steps; ++step) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        const ScalarVolume y = theta.evaluate();
        AnnotationGraph adjusted = annotation;
        ScalarVolume grad;
        double loss = std::numeric_limits<double>::quiet_NaN();
        try {
            switch (config.mode) {
            case TrainingMode::Baseline: {
                auto lg = loss_and_grad_y(annotation, y, sp.truncation);
                loss = lg.loss;
                grad = std::move(lg.gradient);
                break;
            }
            case TrainingMode::SnakeSimple: {
                const FastDriver driver(std::make_shared<const SmoothedField>(y, sp.sigma));
                adjusted = run_snake(system, annotation, driver, sp.steps, config.divergence_radius).graph;
                auto lg = loss_and_grad_y(adjusted, y, sp.truncation);
                loss = lg.loss;
                grad = std::move(lg.gradient);
                break;
            }
            case TrainingMode::SnakeFull: {
                const FullDriver driver(y, sp.truncation, sp.data_weight);
                adjusted = run_snake(system, annotation, driver, sp.steps, config.divergence_radius).graph;
                auto lg = loss_and_grad_y(adjusted, y, sp.truncation);
                loss = lg.loss;
                grad = std::move(lg.gradient);
                break;
            }
            case TrainingMode::SnakeFast: {
                const auto tape = record_fast_run(system, annotation, std::make_shared<const SmoothedField>(y, sp.sigma),
                                                  sp.steps, config.divergence_radius);
                adjusted = tape.final_graph();
                grad = grad_fast(tape, adjusted, y, sp.truncation);
                break;
            }
            }
        } catch (const DivergenceError& e) {
            throw DivergenceError("training step " + std::to_string(step) + ": " + e.what(), step, e.vertex());
        }
        const auto g = theta.pullback(grad);
        auto params = theta.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * g[i];
        const double seconds = std::chrono::duration<double>(clock::now() - t0).count();

        if (std::isnan(loss)) loss = loss_and_grad_y(adjusted, y, sp.truncation).loss;
        if (!std::isfinite(loss))
            throw DivergenceError("training step " + std::to_string(step) + ": non-finite loss", step);

        TrainRecord rec;
        rec.step = step;
        rec.loss = loss;
        rec.regularizer = system.energy(coordinates(adjusted));
        rec.stationarity =
            stationarity_residual(system, adjusted, annotation, FullDriver(y, sp.truncation, sp.data_weight));
        rec.mean_displacement = mean_displacement(adjusted, annotation);
        rec.seconds = seconds;
        out.history.push_back(rec);
        if (observer) observer(rec, theta, adjusted);
        if (config.warm_start) annotation = adjusted;
        out.graph = std::move(adjusted);
    }
    return out;
}

void write_history(std::ostream& out, std::span<const TrainRecord> history) {
    out << "step,L,R,stationarity,displacement,seconds\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.6f\n", r.step, r.loss, r.regularizer, r.stationarity,
                      r.mean_displacement, r.seconds);
        out << buf;
    }
}

double adjusted_annotation_error(const AnnotationGraph& adjusted, const AnnotationGraph& truth) {
    if (truth.vertex_count() == 0) throw GraphError(GraphError::Kind::Empty, "truth graph has no vertices");
    if (adjusted.vertex_count() == 0) return 0.0;
    double sum = 0.0;
    for (const auto& p : adjusted.vertices()) {
        double best = std::numeric_limits<double>::infinity();
        if (truth.edge_count() == 0)
            for (const auto& t : truth.vertices()) best = std::min(best, distance(p, t));
        for (const auto& e : truth.edges())
            best = std::min(best, point_segment_distance(p, truth.vertex(e.u), truth.vertex(e.v)).distance);
        sum += best;
    }
    return sum / static_cast<double>(adjusted.vertex_count());
}

} // namespace netsnake
