#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "netsnake/volume.hpp"

namespace netsnake {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Gaussian-smoothed view of a base volume, y * G.
///
/// The smoothed field is evaluated at arbitrary points as the continuous sum
/// sum_q y[q] G(p - q) over the truncated kernel support, so its gradient and Hessian
/// are the same sum with analytic first- and second-derivative-of-Gaussian kernels and
/// are exactly consistent with each other. Out-of-grid voxel indices are clamped to the
/// border (replicate padding). At voxel centers the point evaluation coincides with the
/// cached separable-convolution volumes.
///
/// sigma == 0 disables smoothing: the field is the multilinear interpolant of the base
/// volume, with the interpolant's derivatives.
class SmoothedField {
public:
    SmoothedField(ScalarVolume base, double sigma, double truncate = 4.0);

    [[nodiscard]] const ScalarVolume& base() const noexcept { return base_; }
    [[nodiscard]] const GridSpec& grid() const noexcept { return base_.grid(); }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    /// Kernel support half-width in voxels.
    [[nodiscard]] double support_radius() const noexcept { return radius_; }

    [[nodiscard]] double value_at(const Vec3& p) const;
    [[nodiscard]] Vec3 gradient_at(const Vec3& p) const;
    [[nodiscard]] Mat3 hessian_at(const Vec3& p) const;

    /// Adds d<w, gradient_at(p)>/dy to `out` (one entry per base voxel).
    void accumulate_gradient_adjoint(const Vec3& p, const Vec3& w, std::span<double> out) const;

    /// Cached y * G and y * dG/dx_axis volumes.
    [[nodiscard]] const ScalarVolume& smoothed_volume() const;
    [[nodiscard]] const ScalarVolume& derivative_volume(int axis) const;

private:
    struct AxisWeights;
    void axis_weights(int axis, double t, AxisWeights& out) const;

    template <class Visit>
    void for_each_tap(const Vec3& p, Visit&& visit) const;

    ScalarVolume base_;
    double sigma_;
    double radius_;

    struct Cache {
        std::once_flag once;
        std::optional<ScalarVolume> smoothed;
        std::array<std::optional<ScalarVolume>, 3> derivative;
    };
    std::unique_ptr<Cache> cache_;
    void fill_cache() const;
};

/// Sampled 1D Gaussian derivative kernel of order 0, 1 or 2 on integer offsets
/// -radius..radius (index radius + k holds the value at offset k).
[[nodiscard]] std::vector<double> gaussian_kernel(double sigma, int order, int radius);

} // namespace netsnake
