#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "netsnake/graph.hpp"
#include "netsnake/smoothing.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

/// Snake hyperparameters. Defaults: alpha, beta from the best regularizer setting,
/// gamma = 10 and 10 updates per adjustment.
struct SnakeParams {
    double alpha = 1e-2;      // spring weight
    double beta = 1e-3;       // elasticity weight
    double gamma = 10.0;      // viscosity (inverse step size)
    int steps = 10;           // updates per adjustment (T)
    double sigma = 1.0;       // Gaussian width of the fast driver's field, voxels
    double truncation = 20.0; // distance-map truncation d, voxels
    /// Scale of the full driver's data energy: data_weight * sum_q (D(c)[q] - y[q])^2.
    double data_weight = 0.07;
};

/// Coordinates as an n x dim matrix (one column per axis).
[[nodiscard]] Eigen::MatrixXd coordinates(const AnnotationGraph& graph);
[[nodiscard]] std::vector<Vec3> to_points(const Eigen::MatrixXd& coords);

/// Per-axis regularizer matrix with R(c) = 1/2 sum_axis c_axis^T A c_axis.
[[nodiscard]] Eigen::SparseMatrix<double> assemble_regularizer(const AnnotationGraph& graph, double alpha, double beta);

/// R(c) = alpha * sum_edges |c_u - c_v|^2 + beta * sum_triples |c_u - 2 c_v + c_w|^2, summed term by term.
[[nodiscard]] double regularizer_energy(const AnnotationGraph& graph, double alpha, double beta);

/// Regularizer matrix together with the factorization of A + gamma I. Immutable and
/// cheap to copy (the factorization is shared).
class SnakeSystem {
public:
    SnakeSystem(const AnnotationGraph& graph, double alpha, double beta, double gamma);
    SnakeSystem(const AnnotationGraph& graph, const SnakeParams& params)
        : SnakeSystem(graph, params.alpha, params.beta, params.gamma) {}

    [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const noexcept { return *a_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] std::size_t vertex_count() const noexcept { return static_cast<std::size_t>(a_->rows()); }

    /// (A + gamma I)^{-1} rhs, column by column.
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    /// 1/2 sum over columns of c^T A c.
    [[nodiscard]] double energy(const Eigen::MatrixXd& coords) const;
    /// A c (the regularizer gradient).
    [[nodiscard]] Eigen::MatrixXd gradient(const Eigen::MatrixXd& coords) const;

private:
    double alpha_, beta_, gamma_;
    std::shared_ptr<const Eigen::SparseMatrix<double>> a_;
    std::shared_ptr<const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

/// External force (energy gradient with respect to the coordinates) for one snake state.
struct DriverForces {
    Eigen::MatrixXd gradient; // n x dim
    double loss = std::numeric_limits<double>::quiet_NaN();        // MSE(D(c), y), full driver only
    double fast_energy = std::numeric_limits<double>::quiet_NaN(); // S(c), fast driver only
    std::size_t clamped_vertices = 0;
};

/// Source of the dE/dc term of the semi-implicit update.
class SnakeDriver {
public:
    virtual ~SnakeDriver() = default;
    [[nodiscard]] virtual DriverForces forces(const AnnotationGraph& graph) const = 0;
};

/// Full data term: E = data_weight * sum_q (D(c)[q] - y[q])^2 with D the truncated
/// distance map of the snake.
class FullDriver final : public SnakeDriver {
public:
    FullDriver(ScalarVolume target, double truncation, double data_weight);

    [[nodiscard]] DriverForces forces(const AnnotationGraph& graph) const override;
    [[nodiscard]] const ScalarVolume& target() const noexcept { return target_; }
    [[nodiscard]] double truncation() const noexcept { return truncation_; }
    [[nodiscard]] double data_weight() const noexcept { return data_weight_; }

private:
    ScalarVolume target_;
    double truncation_;
    double data_weight_;
};

/// Where a vertex samples the smoothed field: its position clamped to the grid box,
/// with the axes that were clamped flagged.
struct SamplePoint {
    Vec3 position;
    std::array<bool, 3> clamped{false, false, false};
};
[[nodiscard]] SamplePoint clamp_to_grid(const Vec3& p, const GridSpec& grid) noexcept;

/// Fast data term: S(c) = sum_v (y * G)(c_v). Gradient components normal to a grid face
/// a vertex has crossed are zeroed.
class FastDriver final : public SnakeDriver {
public:
    explicit FastDriver(std::shared_ptr<const SmoothedField> field);

    [[nodiscard]] DriverForces forces(const AnnotationGraph& graph) const override;
    [[nodiscard]] const SmoothedField& field() const noexcept { return *field_; }
    [[nodiscard]] std::shared_ptr<const SmoothedField> shared_field() const noexcept { return field_; }

private:
    std::shared_ptr<const SmoothedField> field_;
};

/// c' = (A + gamma I)^{-1} (gamma c - g). Throws DivergenceError naming the first
/// vertex with a non-finite force.
[[nodiscard]] Eigen::MatrixXd semi_implicit_step(const SnakeSystem& system, const Eigen::MatrixXd& coords,
                                                 const Eigen::MatrixXd& force);

[[nodiscard]] AnnotationGraph snake_step(const SnakeSystem& system, const AnnotationGraph& graph,
                                         const SnakeDriver& driver);
[[nodiscard]] AnnotationGraph snake_step_full(const SnakeSystem& system, const AnnotationGraph& graph,
                                              const ScalarVolume& y, double truncation, double data_weight);
[[nodiscard]] AnnotationGraph snake_step_fast(const SnakeSystem& system, const AnnotationGraph& graph,
                                              const SmoothedField& field);

/// One row of a snake run report. `loss` is the MSE between D(c) and the target when
/// the driver computes it, NaN otherwise; `fast_energy` is S for the fast driver.
struct StepReport {
    int step = 0;
    double residual = 0.0;
    double loss = std::numeric_limits<double>::quiet_NaN();
    double regularizer = 0.0;
    double fast_energy = std::numeric_limits<double>::quiet_NaN();
    std::size_t clamped_vertices = 0;
};

struct SnakeRun {
    AnnotationGraph graph;
    std::vector<double> residuals; // |c^{t+1} - c^t|_inf per step
    std::vector<StepReport> reports;
};

/// Throws DivergenceError if `next` holds a non-finite coordinate or a vertex farther
/// than `radius` from `start`.
void check_divergence(const Eigen::MatrixXd& start, const Eigen::MatrixXd& next, int step, double radius);

/// Applies `steps` updates. Throws DivergenceError when coordinates become non-finite
/// or a vertex moves farther than `divergence_radius` from where the run started
/// (the data terms carry no information beyond the truncation distance).
[[nodiscard]] SnakeRun run_snake(const SnakeSystem& system, const AnnotationGraph& graph, const SnakeDriver& driver,
                                 int steps, double divergence_radius = 20.0);

/// |A c + g(c)|_2 / max(1, |g(c0)|_2) with g the full driver's force: the normalized
/// defect of the stationarity condition of R + E_data.
[[nodiscard]] double stationarity_residual(const SnakeSystem& system, const AnnotationGraph& graph,
                                           const AnnotationGraph& initial, const FullDriver& driver);

/// CSV with header "step,residual,L,R,S"; missing values are written empty.
void write_step_reports(std::ostream& out, std::span<const StepReport> reports);

} // namespace netsnake
