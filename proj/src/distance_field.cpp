#include "netsnake/distance_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "netsnake/error.hpp"

namespace netsnake {

SegmentProjection point_segment_distance(const Vec3& q, const Vec3& c_u, const Vec3& c_v) noexcept {
    const Vec3 e = c_u - c_v;
    const double len2 = dot(e, e);
    double phi = 0.5;
    if (len2 > 0.0) phi = std::clamp(dot(q - c_v, e) / len2, 0.0, 1.0);
    const Vec3 foot = c_u * phi + c_v * (1.0 - phi);
    return {distance(foot, q), phi, foot};
}

TruncatedDistanceMap distance_transform(const AnnotationGraph& graph, const GridSpec& grid, double d) {
    if (!(d > 0.0)) throw DomainError("distance_transform: truncation must be > 0");
    if (graph.dim() != grid.dim())
        throw GraphError(GraphError::Kind::DimensionMismatch, "graph and grid dimensionality differ");

    const auto n = grid.voxel_count();
    constexpr auto none = std::numeric_limits<std::size_t>::max();
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_edge(n, none);
    std::vector<double> best_phi(n, 0.0);

    const auto edges = graph.edges();
    for (std::size_t ei = 0; ei < edges.size(); ++ei) {
        const auto& cu = graph.vertex(edges[ei].u);
        const auto& cv = graph.vertex(edges[ei].v);
        std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
        bool empty = false;
        for (int a = 0; a < grid.dim(); ++a) {
            const auto i = static_cast<std::size_t>(a);
            const double mn = std::min(cu[i], cv[i]) - d;
            const double mx = std::max(cu[i], cv[i]) + d;
            lo[i] = static_cast<int>(std::max(0.0, std::ceil(mn)));
            hi[i] = static_cast<int>(std::min(grid.extent(a) - 1.0, std::floor(mx)));
            if (!(mx >= 0.0 && mn <= grid.extent(a) - 1.0) || lo[i] > hi[i]) empty = true;
        }
        if (empty) continue;
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    const auto idx = grid.index(x, y, z);
                    const auto proj = point_segment_distance({double(x), double(y), double(z)}, cu, cv);
                    if (proj.distance < best[idx]) {
                        best[idx] = proj.distance;
                        best_edge[idx] = ei;
                        best_phi[idx] = proj.phi;
                    }
                }
    }

    std::vector<double> values(n, d);
    std::vector<ActiveVoxel> active;
    for (std::size_t i = 0; i < n; ++i) {
        if (best_edge[i] == none || !(best[i] < d)) continue;
        values[i] = best[i];
        active.push_back({i, best_edge[i], best_phi[i]});
    }
    return {ScalarVolume(grid, std::move(values)), d, std::move(active)};
}

std::vector<Vec3> distance_subgradient(const TruncatedDistanceMap& map, const AnnotationGraph& graph,
                                       const ScalarVolume& upstream) {
    const auto& grid = map.values().grid();
    if (!(upstream.grid() == grid)) throw DomainError("distance_subgradient: upstream grid differs from the map");
    std::vector<Vec3> grad(graph.vertex_count());
    const auto edges = graph.edges();
    for (const auto& a : map.active()) {
        const double w = upstream[a.voxel];
        if (w == 0.0) continue;
        const auto& e = edges[a.edge];
        const Vec3 foot = graph.vertex(e.u) * a.phi + graph.vertex(e.v) * (1.0 - a.phi);
        const Vec3 diff = foot - grid.center(a.voxel);
        const double dist = norm(diff);
        if (dist == 0.0) continue;
        const Vec3 dir = diff * (w / dist);
        grad[e.u] += dir * a.phi;
        grad[e.v] += dir * (1.0 - a.phi);
    }
    return grad;
}

} // namespace netsnake
