#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "netsnake/graph.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

struct Fixture {
    std::string name;
    GridSpec grid;
    AnnotationGraph truth;
    AnnotationGraph annotation;
    ScalarVolume field;              // initial y
    std::vector<std::size_t> gap;    // voxels reset to d (fig4 only)
    std::vector<std::pair<std::string, std::string>> parameters;
};

struct Fig4Params {
    int size = 96;
    double offset = 4.0;      // lateral shift of the annotation, voxels
    double gap_length = 16.0; // arc length of the break along the centerline
    double gap_width = 0.5;   // voxels with true distance below this are reset
    double truncation = 20.0;
    double amplitude = 6.0;   // lateral swing of the sinusoidal centerline
    double spacing = 1.0;     // vertex spacing
};

/// Smooth, mostly vertical open curve spanning the grid. The field is its truncated distance map with a
/// run of centerline voxels (the break) set to d; the annotation is the curve shifted
/// along its normal by `offset`.
[[nodiscard]] Fixture make_fig4_fixture(const Fig4Params& params = {});

/// Same fixture with every field value multiplied by `factor` (names it "<name>-steep").
/// Scaling the map scales the fast driver's force, so a run that is stable at one
/// viscosity can overshoot at a lower one.
[[nodiscard]] Fixture steepen(const Fixture& fixture, double factor);

struct TreeParams {
    double truncation = 20.0;
    double amplitude = 2.0;          // perturb_smooth amplitude of the annotation
    double correlation_length = 24.0;
    double spacing = 1.0;
    double min_branch_length = 14.0;
    double max_branch_length = 30.0;
    int max_retries = 200;
};

/// Random binary tree of smooth polylines with `n_branches` branches. Throws DomainError
/// when a branch cannot be placed inside the grid after the retry budget.
[[nodiscard]] Fixture make_tree_fixture(const GridSpec& grid, int n_branches, std::uint64_t seed,
                                        const TreeParams& params = {});

/// Writes field.raw(+.hdr), truth.graph, annotation.graph, gap.raw (when present) and
/// manifest.txt into `dir`, creating it if needed.
void write_fixture(const std::filesystem::path& dir, const Fixture& fixture);

} // namespace netsnake
