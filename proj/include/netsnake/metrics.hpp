#pragma once

#include <cstdint>
#include <vector>

#include "netsnake/graph.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

/// Binary voxel mask, x-fastest like ScalarVolume.
struct Mask {
    GridSpec grid;
    std::vector<std::uint8_t> on;

    Mask() = default;
    explicit Mask(GridSpec g) : grid(g), on(g.voxel_count(), 0) {}
    [[nodiscard]] std::size_t count() const noexcept;
};

/// Voxels where y < threshold.
[[nodiscard]] Mask threshold_below(const ScalarVolume& y, double threshold);

/// Voxels crossed by the graph's edges (edges sampled at quarter-voxel steps, rounded to
/// the nearest voxel) plus the voxels holding its vertices. Points outside the grid are skipped.
[[nodiscard]] Mask rasterize(const AnnotationGraph& graph, const GridSpec& grid);

struct Ccq {
    double correctness = 0.0;
    double completeness = 0.0;
    double quality = 0.0;
};

/// Relaxed precision / recall / IoU. A predicted voxel is matched when a ground-truth
/// voxel lies within `match_distance` (Euclidean), and vice versa. Throws DomainError on
/// differing grids or an empty ground truth; an empty prediction scores 0 everywhere.
[[nodiscard]] Ccq ccq(const Mask& pred, const Mask& gt, double match_distance = 3.0);

struct PathMetricParams {
    int n_pairs = 200;
    std::uint64_t seed = 0;
    double snap_radius = 4.0;
};

/// Average path length similarity, symmetrized over both directions. Pairs are drawn
/// from the source graph's endpoints (vertices of degree != 2) that are connected in the
/// source; when there are at most `n_pairs` such pairs all of them are used. Each
/// endpoint snaps to the nearest target vertex within the snap radius. Throws
/// DomainError when a graph has no connected endpoint pair or n_pairs < 1.
[[nodiscard]] double apls(const AnnotationGraph& pred, const AnnotationGraph& gt, const PathMetricParams& params = {});

/// Fraction of ground-truth endpoint pairs whose matched prediction path exists and has
/// relative length error below `tolerance`. Same sampling and snapping as apls.
[[nodiscard]] double tlts(const AnnotationGraph& pred, const AnnotationGraph& gt, double tolerance = 0.15,
                          const PathMetricParams& params = {});

/// Thinning of {y < threshold} to a unit-width skeleton, converted to a graph: skeleton
/// voxels become vertices, adjacent junction voxels are merged, and spurs shorter than
/// `prune_length` voxels are cut. An empty mask gives an empty graph.
[[nodiscard]] AnnotationGraph skeletonize_and_graph(const ScalarVolume& y, double threshold,
                                                    double prune_length = 3.0);

/// Iterative directional boundary peeling that keeps topology and curve ends.
[[nodiscard]] Mask thin(const Mask& mask);

struct MetricsReport {
    double correctness = 0.0;
    double completeness = 0.0;
    double quality = 0.0;
    double apls = 0.0;
    double tlts = 0.0;
    double match_distance = 3.0;
    double tolerance = 0.15;
    PathMetricParams path;
};

/// CCQ on the rasterized graphs plus APLS and TLTS.
[[nodiscard]] MetricsReport evaluate_graphs(const AnnotationGraph& pred, const AnnotationGraph& gt,
                                            const GridSpec& grid, double match_distance = 3.0,
                                            double tolerance = 0.15, const PathMetricParams& params = {});

/// Column order of `metrics_csv_row`.
inline constexpr const char* kMetricsCsvHeader = "correctness,completeness,quality,apls,tlts";
[[nodiscard]] std::string metrics_csv_row(const MetricsReport& report);

} // namespace netsnake
