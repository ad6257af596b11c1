#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "netsnake/backprop.hpp"
#include "netsnake/graph.hpp"
#include "netsnake/snake.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

/// Differentiable scalar field y(theta) on a voxel grid; stands in for the network output.
class Field {
public:
    virtual ~Field() = default;

    [[nodiscard]] virtual const GridSpec& grid() const noexcept = 0;
    [[nodiscard]] virtual ScalarVolume evaluate() const = 0;
    /// dL/dtheta given dL/dy.
    [[nodiscard]] virtual std::vector<double> pullback(const ScalarVolume& dy) const = 0;
    [[nodiscard]] virtual std::span<double> parameters() noexcept = 0;
    [[nodiscard]] virtual std::span<const double> parameters() const noexcept = 0;
    [[nodiscard]] virtual std::unique_ptr<Field> clone() const = 0;
};

/// One parameter per voxel: y is the parameter vector.
class PixelField final : public Field {
public:
    explicit PixelField(const ScalarVolume& initial);

    [[nodiscard]] const GridSpec& grid() const noexcept override { return grid_; }
    [[nodiscard]] ScalarVolume evaluate() const override;
    [[nodiscard]] std::vector<double> pullback(const ScalarVolume& dy) const override;
    [[nodiscard]] std::span<double> parameters() noexcept override { return theta_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept override { return theta_; }
    [[nodiscard]] std::unique_ptr<Field> clone() const override { return std::make_unique<PixelField>(*this); }

private:
    GridSpec grid_;
    std::vector<double> theta_;
};

/// Parameters on a coarse grid, multilinearly upsampled so that the coarse grid's
/// corner voxels coincide with the fine grid's.
class UpsampledField final : public Field {
public:
    UpsampledField(const GridSpec& fine, const GridSpec& coarse, double fill);

    [[nodiscard]] const GridSpec& grid() const noexcept override { return fine_; }
    [[nodiscard]] const GridSpec& coarse_grid() const noexcept { return coarse_; }
    [[nodiscard]] ScalarVolume evaluate() const override;
    [[nodiscard]] std::vector<double> pullback(const ScalarVolume& dy) const override;
    [[nodiscard]] std::span<double> parameters() noexcept override { return theta_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept override { return theta_; }
    [[nodiscard]] std::unique_ptr<Field> clone() const override { return std::make_unique<UpsampledField>(*this); }

private:
    struct Tap {
        std::size_t coarse;
        double weight;
    };
    template <class Visit>
    void for_each_tap(std::size_t fine_index, Visit&& visit) const;

    GridSpec fine_, coarse_;
    std::vector<double> theta_;
};

struct TrainConfig {
    TrainingMode mode = TrainingMode::SnakeFast;
    int steps = 100;
    double learning_rate = 400.0;
    SnakeParams snake;
    double divergence_radius = 20.0;
    /// Start each adjustment where the previous one ended instead of at the input annotation.
    bool warm_start = true;
    std::uint64_t seed = 0;

    /// Throws ConfigError on an out-of-range value.
    void validate() const;
};

struct TrainRecord {
    int step = 0;
    double loss = 0.0;               // L at the adjusted annotation
    double regularizer = 0.0;        // R at the adjusted annotation
    double stationarity = 0.0;       // full-driver stationarity residual of the adjusted annotation
    double mean_displacement = 0.0;  // mean vertex movement during this step's adjustment
    double seconds = 0.0;            // adjustment, gradient assembly and parameter update
};

struct TrainResult {
    std::unique_ptr<Field> field;
    AnnotationGraph graph;
    std::vector<TrainRecord> history;
};

using TrainObserver = std::function<void(const TrainRecord&, const Field&, const AnnotationGraph&)>;

/// Plain gradient descent on L under the chosen mode. With warm_start each adjustment
/// starts where the previous one ended, otherwise at the input annotation; Baseline never
/// moves it. The returned graph is the last adjusted annotation. Throws DivergenceError (with the training step) on a non-finite loss
/// or a diverging snake.
[[nodiscard]] TrainResult train(const Field& field, const AnnotationGraph& graph, const TrainConfig& config,
                                const TrainObserver& observer = {});

/// CSV with header "step,L,R,stationarity,displacement,seconds".
void write_history(std::ostream& out, std::span<const TrainRecord> history);

/// Mean over the vertices of `adjusted` of the distance to the nearest point of `truth`.
[[nodiscard]] double adjusted_annotation_error(const AnnotationGraph& adjusted, const AnnotationGraph& truth);

} // namespace netsnake
