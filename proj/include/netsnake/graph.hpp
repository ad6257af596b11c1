#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "netsnake/vec.hpp"

namespace netsnake {

struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// (u, v, w) with u-v and v-w edges and degree(v) == 2; u < w.
struct Triple {
    std::size_t u = 0;
    std::size_t v = 0;
    std::size_t w = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
};

/// Maximal run of degree-2 vertices between two anchors (vertices of degree != 2),
/// anchors included. For a component that is a pure cycle, `vertices` starts and ends
/// at the same vertex and `closed` is set.
struct Chain {
    std::vector<std::size_t> vertices;
    bool closed = false;
};

/// Centerline annotation as a polyline network. The topology (vertex count, edges,
/// triples) is fixed at construction and shared between graphs derived through
/// `with_vertices`; only coordinates change.
class AnnotationGraph {
public:
    AnnotationGraph();

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t vertex_count() const noexcept { return vertices_.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept;
    [[nodiscard]] std::span<const Vec3> vertices() const noexcept { return vertices_; }
    [[nodiscard]] const Vec3& vertex(std::size_t i) const noexcept { return vertices_[i]; }
    [[nodiscard]] std::span<const Edge> edges() const noexcept;
    [[nodiscard]] std::span<const Triple> triples() const noexcept;
    /// Sorted neighbor indices.
    [[nodiscard]] std::span<const std::size_t> neighbors(std::size_t v) const noexcept;
    [[nodiscard]] std::size_t degree(std::size_t v) const noexcept { return neighbors(v).size(); }

    /// Same topology, new coordinates. Throws GraphError on a count or dimension mismatch.
    [[nodiscard]] AnnotationGraph with_vertices(std::vector<Vec3> vertices) const;
    [[nodiscard]] bool shares_topology(const AnnotationGraph& other) const noexcept;

    [[nodiscard]] double total_length() const;
    [[nodiscard]] std::vector<Chain> chains() const;

    friend AnnotationGraph build_graph(int dim, std::vector<Vec3> vertices, std::vector<Edge> edges);

private:
    struct Topology;
    AnnotationGraph(int dim, std::vector<Vec3> vertices, std::shared_ptr<const Topology> topology);

    int dim_ = 2;
    std::vector<Vec3> vertices_;
    std::shared_ptr<const Topology> topology_;
};

/// Validates edges (range, self-loops, duplicates in either orientation) and derives triples.
/// 2D graphs must have zero z coordinates.
[[nodiscard]] AnnotationGraph build_graph(int dim, std::vector<Vec3> vertices, std::vector<Edge> edges);

/// Re-divides every degree-2 chain at uniform arc length so consecutive vertices are
/// about `target_spacing` apart. Anchors (degree != 2) keep their exact coordinates and
/// come first in the output, in input order; new chain vertices follow.
[[nodiscard]] AnnotationGraph resample_polylines(const AnnotationGraph& graph, double target_spacing);

/// Replaces every maximal degree-2 chain with one straight edge. Loops keep two extra
/// vertices so no self-loop or duplicate edge appears.
[[nodiscard]] AnnotationGraph coarsen(const AnnotationGraph& graph);

/// Slowly varying vector field: per axis, a sum of K random-phase plane sinusoids with
/// wavelengths in [correlation_length, 4 * correlation_length].
class SmoothDisplacementField {
public:
    static constexpr int kWaves = 8;

    SmoothDisplacementField(int dim, double correlation_length, std::uint64_t seed);

    /// Unscaled field value; each component lies in [-1, 1].
    [[nodiscard]] Vec3 operator()(const Vec3& p) const noexcept;

private:
    struct Wave {
        Vec3 direction;
        double wavenumber = 0.0;
        double phase = 0.0;
    };
    int dim_;
    std::vector<Wave> waves_; // kWaves per axis
};

/// Displaces every vertex by the seeded smooth field, scaled so the largest vertex
/// displacement has norm `amplitude`.
[[nodiscard]] AnnotationGraph perturb_smooth(const AnnotationGraph& graph, double amplitude,
                                             double correlation_length, std::uint64_t seed);

// Text format: "v <id> <x> <y> [<z>]" and "e <id1> <id2>" records, '#' comments.
void write_graph(std::ostream& out, const AnnotationGraph& graph);
void write_graph(const std::filesystem::path& path, const AnnotationGraph& graph);
[[nodiscard]] AnnotationGraph read_graph(std::istream& in);
[[nodiscard]] AnnotationGraph read_graph(const std::filesystem::path& path);

} // namespace netsnake
