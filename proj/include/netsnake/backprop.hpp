#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "netsnake/graph.hpp"
#include "netsnake/smoothing.hpp"
#include "netsnake/snake.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

enum class TrainingMode { Baseline, SnakeSimple, SnakeFull, SnakeFast };

[[nodiscard]] std::string_view to_string(TrainingMode mode) noexcept;
/// Accepts "baseline", "simple", "full", "fast" (case-sensitive). Throws ConfigError.
[[nodiscard]] TrainingMode parse_training_mode(std::string_view name);

struct LossGradient {
    double loss = 0.0;     // mean_q (y[q] - D(c)[q])^2
    ScalarVolume gradient; // dL/dy = 2 (y - D(c)) / N
};

[[nodiscard]] LossGradient loss_and_grad_y(const AnnotationGraph& c, const ScalarVolume& y, double d);

/// Envelope gradient: c* is treated as a constant.
[[nodiscard]] ScalarVolume grad_full(const AnnotationGraph& c_star, const ScalarVolume& y, double d);
/// Fast-driver result with the dependence of c on y dropped.
[[nodiscard]] ScalarVolume grad_simple(const AnnotationGraph& c_dagger, const ScalarVolume& y, double d);

/// One recorded fast-driver update: the input coordinates, where each vertex sampled
/// the field, and the field Hessian there.
struct TapeStep {
    Eigen::MatrixXd coords;
    std::vector<SamplePoint> samples;
    std::vector<Mat3> hessians;
};

/// Record of T fast-driver updates c^{t+1} = M (gamma c^t - g(c^t, y)), M = (A + gamma I)^{-1}.
class Tape {
public:
    Tape(SnakeSystem system, std::shared_ptr<const SmoothedField> field, AnnotationGraph initial);

    [[nodiscard]] const SnakeSystem& system() const noexcept { return system_; }
    [[nodiscard]] const SmoothedField& field() const noexcept { return *field_; }
    [[nodiscard]] std::size_t length() const noexcept { return steps_.size(); }
    [[nodiscard]] const std::vector<TapeStep>& steps() const noexcept { return steps_; }
    [[nodiscard]] const AnnotationGraph& initial() const noexcept { return initial_; }
    [[nodiscard]] const AnnotationGraph& final_graph() const noexcept { return final_; }
    [[nodiscard]] const std::vector<StepReport>& reports() const noexcept { return reports_; }

    /// Runs the updates again from the initial coordinates and checks that every
    /// recorded state and the final coordinates are reproduced bit for bit.
    [[nodiscard]] bool replays_exactly() const;

private:
    friend Tape record_fast_run(const SnakeSystem&, const AnnotationGraph&, std::shared_ptr<const SmoothedField>, int,
                                double);

    SnakeSystem system_;
    std::shared_ptr<const SmoothedField> field_;
    AnnotationGraph initial_;
    AnnotationGraph final_;
    std::vector<TapeStep> steps_;
    std::vector<StepReport> reports_;
};

/// Runs `steps` (>= 0) fast-driver updates and records them. Divergence is detected as
/// in run_snake.
[[nodiscard]] Tape record_fast_run(const SnakeSystem& system, const AnnotationGraph& graph,
                                   std::shared_ptr<const SmoothedField> field, int steps,
                                   double divergence_radius = 20.0);

/// Total derivative d/dy L(c_dagger(y), y) by a reverse sweep over the tape. The tape's
/// field must be built on `y` and its final coordinates must equal c_dagger.
[[nodiscard]] ScalarVolume grad_fast(const Tape& tape, const AnnotationGraph& c_dagger, const ScalarVolume& y,
                                     double d);

} // namespace netsnake
