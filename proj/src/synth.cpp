#include "netsnake/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"
#include "netsnake/random.hpp"

namespace netsnake {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Points at uniform arc length along a dense polyline, endpoints included.
std::vector<Vec3> uniform_arc(const std::vector<Vec3>& dense, double spacing) {
    std::vector<double> s(dense.size(), 0.0);
    for (std::size_t i = 1; i < dense.size(); ++i) s[i] = s[i - 1] + distance(dense[i], dense[i - 1]);
    const int segments = std::max(1, static_cast<int>(std::lround(s.back() / spacing)));
    std::vector<Vec3> out;
    std::size_t j = 0;
    for (int k = 0; k <= segments; ++k) {
        const double target = s.back() * k / segments;
        while (j + 2 < dense.size() && s[j + 1] < target) ++j;
        const double len = s[j + 1] - s[j];
        const double f = len > 0.0 ? std::clamp((target - s[j]) / len, 0.0, 1.0) : 0.0;
        out.push_back(dense[j] * (1.0 - f) + dense[j + 1] * f);
    }
    return out;
}

std::vector<Edge> path_edges(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return e;
}

} // namespace

Fixture make_fig4_fixture(const Fig4Params& p) {
    if (p.size < 16) throw DomainError("make_fig4_fixture: grid must be at least 16 voxels wide");
    if (!(p.offset >= 0.0) || !(p.gap_length >= 0.0) || !(p.gap_width >= 0.0) || !(p.truncation > 0.0) ||
        !(p.spacing > 0.0))
        throw DomainError("make_fig4_fixture: invalid parameters");
    const double n = p.size;
    // The curve runs from the top border to the bottom border and is vertical where it
    // meets them, so its lateral offset keeps the end vertices on the grid.
    const double y0 = 0.0, y1 = n - 1.0, xc = std::floor(0.5 * n);
    std::vector<Vec3> dense;
    for (int i = 0; i <= 4000; ++i) {
        const double y = y0 + (y1 - y0) * i / 4000.0;
        dense.emplace_back(xc - p.amplitude * std::cos(3.0 * std::numbers::pi * (y - y0) / (y1 - y0)), y);
    }
    const auto pts = uniform_arc(dense, p.spacing);
    const auto truth = build_graph(2, pts, path_edges(pts.size()));

    std::vector<Vec3> shifted(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double k = 3.0 * std::numbers::pi / (y1 - y0);
        const Vec3 normal(1.0, -p.amplitude * k * std::sin(k * (pts[i][1] - y0)));
        shifted[i] = pts[i] + normal * (p.offset / norm(normal));
    }

    const GridSpec grid(p.size, p.size);
    const auto map = distance_transform(truth, grid, p.truncation);
    auto values = std::vector<double>(map.values().values().begin(), map.values().values().end());

    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + distance(pts[i], pts[i - 1]);
    const double mid = 0.5 * arc.back();
    std::vector<std::size_t> gap;
    if (p.gap_length > 0.0)
        for (const auto& a : map.active()) {
            if (!(map.values()[a.voxel] < p.gap_width)) continue;
            const auto& e = truth.edges()[a.edge];
            const double s = a.phi * arc[e.u] + (1.0 - a.phi) * arc[e.v];
            if (std::abs(s - mid) <= 0.5 * p.gap_length) {
                gap.push_back(a.voxel);
                values[a.voxel] = p.truncation;
            }
        }
    std::sort(gap.begin(), gap.end());

    Fixture f;
    f.name = "fig4";
    f.grid = grid;
    f.annotation = truth.with_vertices(std::move(shifted));
    f.truth = truth;
    f.field = ScalarVolume(grid, std::move(values));
    f.gap = std::move(gap);
    f.parameters = {{"fixture", "fig4"},
                    {"size", std::to_string(p.size)},
                    {"offset", fmt(p.offset)},
                    {"gap_length", fmt(p.gap_length)},
                    {"gap_width", fmt(p.gap_width)},
                    {"truncation", fmt(p.truncation)},
                    {"amplitude", fmt(p.amplitude)},
                    {"spacing", fmt(p.spacing)},
                    {"gap_voxels", std::to_string(f.gap.size())}};
    return f;
}

namespace {

struct TreeBuilder {
    const GridSpec& grid;
    const TreeParams& params;
    Rng rng;
    std::vector<Vec3> vertices;
    std::vector<Edge> edges;

    double margin() const { return params.amplitude + 2.0; }

    bool inside(const Vec3& p) const {
        for (int a = 0; a < grid.dim(); ++a) {
            const auto i = static_cast<std::size_t>(a);
            if (p[i] < margin() || p[i] > grid.extent(a) - 1.0 - margin()) return false;
        }
        return true;
    }

    /// Unit vectors orthogonal to d (one in 2D, two in 3D).
    std::vector<Vec3> normals(const Vec3& d) const {
        if (grid.dim() == 2) return {Vec3(-d[1], d[0])};
        Vec3 helper = std::abs(d[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        Vec3 n1 = helper - d * dot(helper, d);
        n1 *= 1.0 / norm(n1);
        const Vec3 n2(d[1] * n1[2] - d[2] * n1[1], d[2] * n1[0] - d[0] * n1[2], d[0] * n1[1] - d[1] * n1[0]);
        return {n1, n2};
    }

    /// Smooth random curve from `start` along `dir`; empty when it leaves the grid or
    /// runs into existing branches.
    std::vector<Vec3> draw(const Vec3& start, const Vec3& dir) {
        const double length = rng.uniform(params.min_branch_length, params.max_branch_length);
        const double wavelength = rng.uniform(10.0, 30.0);
        const double turn = rng.uniform(0.0, 0.08);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double step = 0.25;
        std::vector<Vec3> pts{start};
        Vec3 d = dir;
        for (double s = step; s <= length + 1e-9; s += step) {
            const auto ns = normals(d);
            const double w = turn * std::sin(2.0 * std::numbers::pi * s / wavelength + phase);
            d += ns[0] * (w * step);
            if (ns.size() > 1) d += ns[1] * (0.5 * w * step * std::cos(phase));
            d *= 1.0 / norm(d);
            const Vec3 next = pts.back() + d * step;
            if (!inside(next)) return {};
            pts.push_back(next);
        }
        // Keep a clearance from earlier branches, except near the junction.
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (distance(pts[i], start) < 6.0) continue;
            for (const auto& e : edges)
                if (point_segment_distance(pts[i], vertices[e.u], vertices[e.v]).distance < 4.0) return {};
        }
        return uniform_arc(pts, params.spacing);
    }

    std::size_t attach(std::size_t from, const std::vector<Vec3>& pts) {
        std::size_t prev = from;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            vertices.push_back(pts[i]);
            edges.push_back({prev, vertices.size() - 1});
            prev = vertices.size() - 1;
        }
        return prev;
    }
};

} // namespace

Fixture make_tree_fixture(const GridSpec& grid, int n_branches, std::uint64_t seed, const TreeParams& params) {
    if (n_branches < 1) throw DomainError("make_tree_fixture: n_branches must be >= 1");
    if (!(params.truncation > 0.0) || !(params.spacing > 0.0) || !(params.amplitude >= 0.0) ||
        !(params.correlation_length > 0.0) || !(params.min_branch_length > 0.0) ||
        params.max_branch_length < params.min_branch_length)
        throw DomainError("make_tree_fixture: invalid parameters");
    TreeBuilder b{grid, params, Rng(seed), {}, {}};
    const int dim = grid.dim();

    Vec3 root;
    for (int a = 0; a < dim; ++a) root[static_cast<std::size_t>(a)] = 0.5 * (grid.extent(a) - 1);
    root[1] = b.margin() + 1.0;
    Vec3 up(0.0, 1.0, 0.0);
    b.vertices.push_back(root);

    struct Tip {
        std::size_t vertex;
        Vec3 dir;
    };
    std::vector<Tip> tips{{0, up}};
    std::vector<Tip> open;
    int placed = 0;
    while (placed < n_branches) {
        if (tips.empty()) throw DomainError("make_tree_fixture: ran out of branch tips");
        const Tip tip = tips.front();
        std::vector<Vec3> pts;
        Vec3 dir = tip.dir;
        int tries = 0;
        for (; tries < params.max_retries && pts.empty(); ++tries) {
            dir = tip.dir;
            if (placed > 0) {
                const auto ns = b.normals(tip.dir);
                const double sign = (open.size() % 2 == 0) ? 1.0 : -1.0;
                const double angle = sign * b.rng.uniform(0.35, 0.8);
                dir = tip.dir * std::cos(angle) + ns[0] * std::sin(angle);
                if (ns.size() > 1) dir += ns[1] * b.rng.uniform(-0.3, 0.3);
                dir *= 1.0 / norm(dir);
            }
            pts = b.draw(b.vertices[tip.vertex], dir);
        }
        if (pts.empty()) {
            // This tip cannot take more children; move to the next one.
            tips.erase(tips.begin());
            for (const auto& t : open) tips.push_back(t);
            open.clear();
            continue;
        }
        const std::size_t end = b.attach(tip.vertex, pts);
        const Vec3 end_dir = [&] {
            Vec3 d = pts.back() - pts[pts.size() - 2];
            return d * (1.0 / norm(d));
        }();
        ++placed;
        open.push_back({end, end_dir});
        // Each tip takes two children (the root takes one) before the next tip is used.
        if (placed == 1) {
            tips.erase(tips.begin());
            tips.push_back(open.back());
            open.clear();
        } else if (open.size() == 2) {
            tips.erase(tips.begin());
            for (const auto& t : open) tips.push_back(t);
            open.clear();
        }
    }
    for (const auto& t : open) tips.push_back(t);

    const auto truth = build_graph(dim, b.vertices, b.edges);
    Fixture f;
    f.name = "tree";
    f.grid = grid;
    f.truth = truth;
    f.annotation = perturb_smooth(truth, params.amplitude, params.correlation_length, seed ^ 0x9e3779b97f4a7c15ULL);
    f.field = distance_transform(truth, grid, params.truncation).values();
    f.parameters = {{"fixture", "tree"},
                    {"dims", std::to_string(grid.extent(0)) + "x" + std::to_string(grid.extent(1)) +
                                 (dim == 3 ? "x" + std::to_string(grid.extent(2)) : std::string())},
                    {"n_branches", std::to_string(n_branches)},
                    {"seed", std::to_string(seed)},
                    {"truncation", fmt(params.truncation)},
                    {"amplitude", fmt(params.amplitude)},
                    {"correlation_length", fmt(params.correlation_length)},
                    {"spacing", fmt(params.spacing)}};
    return f;
}

Fixture steepen(const Fixture& fixture, double factor) {
    if (!(factor > 0.0)) throw DomainError("steepen: factor must be > 0");
    Fixture f = fixture;
    std::vector<double> v(fixture.field.values().begin(), fixture.field.values().end());
    for (auto& x : v) x *= factor;
    f.field = ScalarVolume(fixture.grid, std::move(v));
    f.name = fixture.name + "-steep";
    for (auto& [k, v] : f.parameters)
        if (k == "fixture") v = f.name;
    f.parameters.emplace_back("field_scale", fmt(factor));
    return f;
}

void write_fixture(const std::filesystem::path& dir, const Fixture& fixture) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    write_volume(dir / "field.raw", fixture.field);
    write_graph(dir / "truth.graph", fixture.truth);
    write_graph(dir / "annotation.graph", fixture.annotation);
    if (!fixture.gap.empty()) {
        std::vector<double> m(fixture.grid.voxel_count(), 0.0);
        for (auto q : fixture.gap) m[q] = 1.0;
        write_volume(dir / "gap.raw", ScalarVolume(fixture.grid, std::move(m)));
    }
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
    out << "# netsnake fixture manifest\n";
    for (const auto& [k, v] : fixture.parameters) out << k << " = " << v << '\n';
    out << "files = field.raw field.raw.hdr truth.graph annotation.graph" << (fixture.gap.empty() ? "" : " gap.raw gap.raw.hdr")
        << '\n';
    if (!out) throw IoError("write failed for " + (dir / "manifest.txt").string());
}

} // namespace netsnake
