#include "netsnake/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netsnake/error.hpp"

namespace netsnake {

namespace {

double gauss(double s, double sigma) {
    return std::exp(-0.5 * s * s / (sigma * sigma)) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

/// Order-th derivative of the Gaussian evaluated at offset s.
double gauss_derivative(double s, double sigma, int order) {
    const double g = gauss(s, sigma);
    const double s2 = sigma * sigma;
    switch (order) {
    case 0: return g;
    case 1: return -s / s2 * g;
    default: return (s * s / (s2 * s2) - 1.0 / s2) * g;
    }
}

} // namespace

std::vector<double> gaussian_kernel(double sigma, int order, int radius) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_kernel: sigma must be > 0");
    if (order < 0 || order > 2) throw DomainError("gaussian_kernel: order must be 0, 1 or 2");
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (int s = -radius; s <= radius; ++s) k[static_cast<std::size_t>(s + radius)] = gauss_derivative(s, sigma, order);
    return k;
}

// Per-axis taps after folding out-of-grid indices onto the border voxel.
struct SmoothedField::AxisWeights {
    std::vector<int> index;
    std::array<std::vector<double>, 3> w; // by derivative order
};

SmoothedField::SmoothedField(ScalarVolume base, double sigma, double truncate)
    : base_(std::move(base)), sigma_(sigma), radius_(sigma * truncate), cache_(std::make_unique<Cache>()) {
    if (!(sigma >= 0.0)) throw DomainError("SmoothedField: sigma must be >= 0");
    if (!(truncate > 0.0)) throw DomainError("SmoothedField: truncate must be > 0");
}

void SmoothedField::axis_weights(int axis, double t, AxisWeights& out) const {
    const int n = grid().extent(axis);
    out.index.clear();
    for (auto& w : out.w) w.clear();
    auto add = [&](int k, double w0, double w1, double w2) {
        const int kc = std::clamp(k, 0, n - 1);
        if (!out.index.empty() && out.index.back() == kc) {
            out.w[0].back() += w0;
            out.w[1].back() += w1;
            out.w[2].back() += w2;
            return;
        }
        out.index.push_back(kc);
        out.w[0].push_back(w0);
        out.w[1].push_back(w1);
        out.w[2].push_back(w2);
    };
    if (axis >= grid().dim()) {
        add(0, 1.0, 0.0, 0.0);
        return;
    }
    if (sigma_ == 0.0) {
        if (n == 1) {
            add(0, 1.0, 0.0, 0.0);
            return;
        }
        const double tc = std::clamp(t, 0.0, n - 1.0);
        const int i = std::min(static_cast<int>(std::floor(tc)), n - 2);
        const double f = tc - i;
        add(i, 1.0 - f, -1.0, 0.0);
        add(i + 1, f, 1.0, 0.0);
        return;
    }
    const int lo = static_cast<int>(std::ceil(t - radius_));
    const int hi = static_cast<int>(std::floor(t + radius_));
    for (int k = lo; k <= hi; ++k) {
        const double s = t - k;
        add(k, gauss_derivative(s, sigma_, 0), gauss_derivative(s, sigma_, 1), gauss_derivative(s, sigma_, 2));
    }
}

template <class Visit>
void SmoothedField::for_each_tap(const Vec3& p, Visit&& visit) const {
    std::array<AxisWeights, 3> ax;
    for (int a = 0; a < 3; ++a) axis_weights(a, p[static_cast<std::size_t>(a)], ax[static_cast<std::size_t>(a)]);
    const auto& g = grid();
    for (std::size_t k = 0; k < ax[2].index.size(); ++k)
        for (std::size_t j = 0; j < ax[1].index.size(); ++j)
            for (std::size_t i = 0; i < ax[0].index.size(); ++i) {
                const std::array<std::size_t, 3> tap{i, j, k};
                const auto voxel = g.index(ax[0].index[i], ax[1].index[j], ax[2].index[k]);
                visit(voxel, [&](std::size_t axis, int order) { return ax[axis].w[static_cast<std::size_t>(order)][tap[axis]]; });
            }
}

double SmoothedField::value_at(const Vec3& p) const {
    double s = 0.0;
    for_each_tap(p, [&](std::size_t voxel, auto w) { s += base_[voxel] * w(0, 0) * w(1, 0) * w(2, 0); });
    return s;
}

Vec3 SmoothedField::gradient_at(const Vec3& p) const {
    Vec3 out;
    for_each_tap(p, [&](std::size_t voxel, auto w) {
        const double y = base_[voxel];
        out[0] += y * w(0, 1) * w(1, 0) * w(2, 0);
        out[1] += y * w(0, 0) * w(1, 1) * w(2, 0);
        out[2] += y * w(0, 0) * w(1, 0) * w(2, 1);
    });
    return out;
}

Mat3 SmoothedField::hessian_at(const Vec3& p) const {
    Mat3 h{};
    for_each_tap(p, [&](std::size_t voxel, auto w) {
        const double y = base_[voxel];
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a; b < 3; ++b) {
                double prod = 1.0;
                for (std::size_t c = 0; c < 3; ++c) {
                    int order = 0;
                    if (c == a) ++order;
                    if (c == b) ++order;
                    prod *= w(c, order);
                }
                h[a][b] += y * prod;
            }
    });
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < a; ++b) h[a][b] = h[b][a];
    return h;
}

void SmoothedField::accumulate_gradient_adjoint(const Vec3& p, const Vec3& w_in, std::span<double> out) const {
    if (out.size() != base_.size()) throw DomainError("accumulate_gradient_adjoint: output size differs from grid");
    for_each_tap(p, [&](std::size_t voxel, auto w) {
        out[voxel] += w_in[0] * w(0, 1) * w(1, 0) * w(2, 0) + w_in[1] * w(0, 0) * w(1, 1) * w(2, 0) +
                      w_in[2] * w(0, 0) * w(1, 0) * w(2, 1);
    });
}

namespace {

/// out[q] = sum_s in[clamp(q - s)] * kernel[s] along one axis (replicate padding).
std::vector<double> convolve_axis(const GridSpec& g, const std::vector<double>& in, int axis,
                                  const std::vector<double>& kernel) {
    const int r = static_cast<int>(kernel.size() / 2);
    const int n = g.extent(axis);
    std::vector<double> out(in.size(), 0.0);
    for (int z = 0; z < g.extent(2); ++z)
        for (int y = 0; y < g.extent(1); ++y)
            for (int x = 0; x < g.extent(0); ++x) {
                std::array<int, 3> q{x, y, z};
                const int c = q[static_cast<std::size_t>(axis)];
                double s = 0.0;
                for (int o = -r; o <= r; ++o) {
                    q[static_cast<std::size_t>(axis)] = std::clamp(c - o, 0, n - 1);
                    s += in[g.index(q[0], q[1], q[2])] * kernel[static_cast<std::size_t>(o + r)];
                }
                out[g.index(x, y, z)] = s;
            }
    return out;
}

} // namespace

void SmoothedField::fill_cache() const {
    std::call_once(cache_->once, [this] {
        const auto& g = grid();
        if (sigma_ == 0.0) {
            cache_->smoothed = base_;
            for (int a = 0; a < g.dim(); ++a) {
                std::vector<double> d(g.voxel_count());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = gradient_at(g.center(i))[static_cast<std::size_t>(a)];
                cache_->derivative[static_cast<std::size_t>(a)] = ScalarVolume(g, std::move(d));
            }
            return;
        }
        const int r = static_cast<int>(std::floor(radius_));
        const auto k0 = gaussian_kernel(sigma_, 0, r);
        const auto k1 = gaussian_kernel(sigma_, 1, r);
        const std::vector<double> base(base_.values().begin(), base_.values().end());
        auto run = [&](int derivative_axis) {
            auto v = base;
            for (int a = 0; a < g.dim(); ++a) v = convolve_axis(g, v, a, a == derivative_axis ? k1 : k0);
            return ScalarVolume(g, std::move(v));
        };
        cache_->smoothed = run(-1);
        for (int a = 0; a < g.dim(); ++a) cache_->derivative[static_cast<std::size_t>(a)] = run(a);
    });
}

const ScalarVolume& SmoothedField::smoothed_volume() const {
    fill_cache();
    return *cache_->smoothed;
}

const ScalarVolume& SmoothedField::derivative_volume(int axis) const {
    if (axis < 0 || axis >= grid().dim()) throw DomainError("derivative_volume: axis out of range");
    fill_cache();
    return *cache_->derivative[static_cast<std::size_t>(axis)];
}

} // namespace netsnake
