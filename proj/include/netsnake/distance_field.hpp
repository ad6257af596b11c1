#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "netsnake/graph.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

/// Closest point of segment [c_u, c_v] to q, parameterized as phi * c_u + (1 - phi) * c_v.
struct SegmentProjection {
    double distance = 0.0;
    double phi = 0.0;
    Vec3 foot;
};

/// A degenerate segment (c_u == c_v) reports the distance to that point with phi = 0.5.
[[nodiscard]] SegmentProjection point_segment_distance(const Vec3& q, const Vec3& c_u, const Vec3& c_v) noexcept;

/// Voxel closer than the truncation distance to some edge.
struct ActiveVoxel {
    std::size_t voxel = 0;
    std::size_t edge = 0;
    double phi = 0.0;
};

/// min(distance to the closest edge, d) on every voxel center. Voxels left out of
/// `active` hold exactly `truncation`.
class TruncatedDistanceMap {
public:
    TruncatedDistanceMap(ScalarVolume values, double truncation, std::vector<ActiveVoxel> active)
        : values_(std::move(values)), truncation_(truncation), active_(std::move(active)) {}

    [[nodiscard]] const ScalarVolume& values() const noexcept { return values_; }
    [[nodiscard]] double truncation() const noexcept { return truncation_; }
    [[nodiscard]] std::span<const ActiveVoxel> active() const noexcept { return active_; }

private:
    ScalarVolume values_;
    double truncation_;
    std::vector<ActiveVoxel> active_;
};

/// Each edge scatters into the voxels of its bounding box grown by d; the closest edge
/// wins, ties going to the lowest edge index.
[[nodiscard]] TruncatedDistanceMap distance_transform(const AnnotationGraph& graph, const GridSpec& grid, double d);

/// sum_q upstream[q] * dD[q]/dc, one vector per vertex. Truncated voxels and voxels the
/// graph passes exactly through contribute nothing.
[[nodiscard]] std::vector<Vec3> distance_subgradient(const TruncatedDistanceMap& map, const AnnotationGraph& graph,
                                                     const ScalarVolume& upstream);

} // namespace netsnake
