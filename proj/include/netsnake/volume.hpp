#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "netsnake/vec.hpp"

namespace netsnake {

/// Regular voxel grid. Voxel centers sit at integer coordinates 0..extent-1 on each axis.
/// A 2D grid has extent 1 on z.
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(int nx, int ny);
    GridSpec(int nx, int ny, int nz);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int extent(int axis) const noexcept { return extents_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] const std::array<int, 3>& extents() const noexcept { return extents_; }
    [[nodiscard]] std::size_t voxel_count() const noexcept;

    [[nodiscard]] std::size_t index(int x, int y, int z = 0) const noexcept {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(extents_[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(extents_[1]) * static_cast<std::size_t>(z));
    }
    [[nodiscard]] std::array<int, 3> voxel(std::size_t index) const noexcept;
    [[nodiscard]] Vec3 center(std::size_t index) const noexcept;

    [[nodiscard]] bool contains(int x, int y, int z = 0) const noexcept;
    /// True when p lies in the closed box spanned by the voxel centers.
    [[nodiscard]] bool contains(const Vec3& p) const noexcept;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    int dim_ = 2;
    std::array<int, 3> extents_{1, 1, 1};
};

/// Dense scalar field on a GridSpec, x-fastest storage.
class ScalarVolume {
public:
    ScalarVolume() = default;
    ScalarVolume(GridSpec grid, double fill);
    ScalarVolume(GridSpec grid, std::vector<double> values);

    [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
    [[nodiscard]] double at(int x, int y, int z = 0) const noexcept { return values_[grid_.index(x, y, z)]; }

    /// Releases the storage so callers can build a modified copy without reallocating.
    [[nodiscard]] std::vector<double> take_values() && { return std::move(values_); }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

/// Writes `path` as raw little-endian float32 (x fastest) and `path`.hdr as a text header.
void write_volume(const std::filesystem::path& path, const ScalarVolume& volume);
[[nodiscard]] ScalarVolume read_volume(const std::filesystem::path& path);

/// Binary 8-bit PGM; values are mapped linearly from [lo, hi] to [0, 255] and clamped.
/// 3D volumes are written as a maximum-intensity projection along z.
void write_pgm(const std::filesystem::path& path, const ScalarVolume& volume, double lo, double hi);

} // namespace netsnake
