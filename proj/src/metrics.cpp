#include "netsnake/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>

#include "netsnake/error.hpp"
#include "netsnake/random.hpp"

namespace netsnake {

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(on.begin(), on.end(), std::uint8_t{1}));
}

Mask threshold_below(const ScalarVolume& y, double threshold) {
    Mask m(y.grid());
    for (std::size_t q = 0; q < y.size(); ++q) m.on[q] = y[q] < threshold ? 1 : 0;
    return m;
}

namespace {

using Offset = std::array<int, 3>;

bool in_grid(const GridSpec& g, const std::array<int, 3>& v) { return g.contains(v[0], v[1], v[2]); }

void mark(Mask& m, const Vec3& p) {
    const std::array<int, 3> v{static_cast<int>(std::lround(p[0])), static_cast<int>(std::lround(p[1])),
                               static_cast<int>(std::lround(p[2]))};
    if (in_grid(m.grid, v)) m.on[m.grid.index(v[0], v[1], v[2])] = 1;
}

// Lattice offsets within `radius`, center included.
std::vector<Offset> ball(int dim, double radius) {
    const int r = static_cast<int>(std::floor(radius));
    const int rz = dim == 3 ? r : 0;
    std::vector<Offset> out;
    for (int z = -rz; z <= rz; ++z)
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x)
                if (x * x + y * y + z * z <= radius * radius) out.push_back({x, y, z});
    return out;
}

// Voxels of `a` with a voxel of `b` within the ball.
std::size_t matched(const Mask& a, const Mask& b, const std::vector<Offset>& offsets) {
    std::size_t n = 0;
    for (std::size_t q = 0; q < a.on.size(); ++q) {
        if (!a.on[q]) continue;
        const auto v = a.grid.voxel(q);
        for (const auto& o : offsets) {
            const std::array<int, 3> w{v[0] + o[0], v[1] + o[1], v[2] + o[2]};
            if (in_grid(b.grid, w) && b.on[b.grid.index(w[0], w[1], w[2])]) {
                ++n;
                break;
            }
        }
    }
    return n;
}

} // namespace

Mask rasterize(const AnnotationGraph& graph, const GridSpec& grid) {
    if (graph.vertex_count() > 0 && graph.dim() != grid.dim())
        throw GraphError(GraphError::Kind::DimensionMismatch, "graph and grid dimensionality differ");
    Mask m(grid);
    for (const auto& p : graph.vertices()) mark(m, p);
    for (const auto& e : graph.edges()) {
        const Vec3 a = graph.vertex(e.u), b = graph.vertex(e.v);
        const int n = std::max(1, static_cast<int>(std::ceil(4.0 * distance(a, b))));
        for (int i = 1; i < n; ++i) mark(m, a + (b - a) * (double(i) / n));
    }
    return m;
}

Ccq ccq(const Mask& pred, const Mask& gt, double match_distance) {
    if (!(pred.grid == gt.grid)) throw DomainError("ccq: masks are on different grids");
    if (!(match_distance >= 0.0)) throw DomainError("ccq: match distance must be >= 0");
    const std::size_t n_gt = gt.count(), n_pred = pred.count();
    if (n_gt == 0) throw DomainError("ccq: ground-truth mask is empty, completeness undefined");
    if (n_pred == 0) return {};
    const auto offsets = ball(gt.grid.dim(), match_distance);
    const auto tp_pred = matched(pred, gt, offsets);
    const auto tp_gt = matched(gt, pred, offsets);
    const double fp = double(n_pred - tp_pred), fn = double(n_gt - tp_gt);
    Ccq r;
    r.correctness = double(tp_pred) / double(n_pred);
    r.completeness = double(tp_gt) / double(n_gt);
    r.quality = double(tp_pred) / (double(tp_pred) + fp + fn);
    return r;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct WeightedGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;
    std::vector<std::size_t> component;

    explicit WeightedGraph(const AnnotationGraph& g) : adj(g.vertex_count()), component(g.vertex_count(), 0) {
        for (const auto& e : g.edges()) {
            const double w = distance(g.vertex(e.u), g.vertex(e.v));
            adj[e.u].emplace_back(e.v, w);
            adj[e.v].emplace_back(e.u, w);
        }
        std::vector<bool> seen(adj.size(), false);
        std::size_t c = 0;
        for (std::size_t s = 0; s < adj.size(); ++s) {
            if (seen[s]) continue;
            std::vector<std::size_t> stack{s};
            seen[s] = true;
            while (!stack.empty()) {
                const auto v = stack.back();
                stack.pop_back();
                component[v] = c;
                for (const auto& [w, len] : adj[v])
                    if (!seen[w]) seen[w] = true, stack.push_back(w);
            }
            ++c;
        }
    }

    [[nodiscard]] std::vector<double> dijkstra(std::size_t src) const {
        std::vector<double> dist(adj.size(), kInf);
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist[src] = 0.0;
        pq.emplace(0.0, src);
        while (!pq.empty()) {
            const auto [d, v] = pq.top();
            pq.pop();
            if (d > dist[v]) continue;
            for (const auto& [w, len] : adj[v])
                if (d + len < dist[w]) {
                    dist[w] = d + len;
                    pq.emplace(dist[w], w);
                }
        }
        return dist;
    }
};

struct PairResult {
    double source_length = 0.0;
    double target_length = kInf; // infinite when unmatched or disconnected
};

std::vector<std::size_t> endpoints(const AnnotationGraph& g) {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
        if (g.degree(v) != 2) out.push_back(v);
    return out;
}

std::ptrdiff_t snap(const AnnotationGraph& target, const Vec3& p, double radius) {
    std::ptrdiff_t best = -1;
    double best_d = radius;
    for (std::size_t v = 0; v < target.vertex_count(); ++v) {
        const double d = distance(p, target.vertex(v));
        if (d <= best_d && (best < 0 || d < best_d)) {
            best = static_cast<std::ptrdiff_t>(v);
            best_d = d;
        }
    }
    return best;
}

// Path comparisons from endpoint pairs of `source` to `target`. Empty when the source
// has no connected endpoint pair.
std::vector<PairResult> compare_paths(const AnnotationGraph& source, const AnnotationGraph& target,
                                      const PathMetricParams& params) {
    const WeightedGraph sg(source), tg(target);
    const auto ends = endpoints(source);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::map<std::size_t, std::vector<double>> source_dist;
    for (std::size_t i = 0; i < ends.size(); ++i)
        for (std::size_t j = i + 1; j < ends.size(); ++j)
            if (sg.component[ends[i]] == sg.component[ends[j]]) pairs.emplace_back(ends[i], ends[j]);
    if (pairs.size() > static_cast<std::size_t>(params.n_pairs)) {
        Rng rng(params.seed);
        for (std::size_t k = 0; k < static_cast<std::size_t>(params.n_pairs); ++k)
            std::swap(pairs[k], pairs[k + rng.index(pairs.size() - k)]);
        pairs.resize(static_cast<std::size_t>(params.n_pairs));
    }

    std::map<std::size_t, std::vector<double>> target_dist;
    std::vector<PairResult> out;
    for (const auto& [a, b] : pairs) {
        auto it = source_dist.find(a);
        if (it == source_dist.end()) it = source_dist.emplace(a, sg.dijkstra(a)).first;
        PairResult r;
        r.source_length = it->second[b];
        if (!(r.source_length > 0.0)) continue;
        const auto ta = snap(target, source.vertex(a), params.snap_radius);
        const auto tb = snap(target, source.vertex(b), params.snap_radius);
        if (ta >= 0 && tb >= 0) {
            auto jt = target_dist.find(static_cast<std::size_t>(ta));
            if (jt == target_dist.end())
                jt = target_dist.emplace(static_cast<std::size_t>(ta), tg.dijkstra(static_cast<std::size_t>(ta))).first;
            r.target_length = jt->second[static_cast<std::size_t>(tb)];
        }
        out.push_back(r);
    }
    return out;
}

void check_path_inputs(const AnnotationGraph& pred, const AnnotationGraph& gt, const PathMetricParams& params) {
    if (params.n_pairs < 1) throw DomainError("n_pairs must be >= 1");
    if (!(params.snap_radius >= 0.0)) throw DomainError("snap radius must be >= 0");
    if (gt.vertex_count() == 0) throw DomainError("ground-truth graph has no vertices");
    if (endpoints(gt).empty()) throw DomainError("ground-truth graph has no endpoints");
    if (pred.vertex_count() > 0 && endpoints(pred).empty()) throw DomainError("predicted graph has no endpoints");
}

double one_way_apls(const std::vector<PairResult>& pairs) {
    if (pairs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : pairs)
        if (std::isfinite(p.target_length))
            s += 1.0 - std::min(1.0, std::abs(p.source_length - p.target_length) / p.source_length);
    return s / static_cast<double>(pairs.size());
}

} // namespace

double apls(const AnnotationGraph& pred, const AnnotationGraph& gt, const PathMetricParams& params) {
    check_path_inputs(pred, gt, params);
    const auto forward = compare_paths(gt, pred, params);
    if (forward.empty()) throw DomainError("ground-truth graph has no connected endpoint pair");
    const auto backward = compare_paths(pred, gt, params);
    return 0.5 * (one_way_apls(forward) + one_way_apls(backward));
}

double tlts(const AnnotationGraph& pred, const AnnotationGraph& gt, double tolerance, const PathMetricParams& params) {
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw DomainError("tlts: tolerance must lie in (0, 1)");
    check_path_inputs(pred, gt, params);
    const auto pairs = compare_paths(gt, pred, params);
    if (pairs.empty()) throw DomainError("ground-truth graph has no connected endpoint pair");
    std::size_t ok = 0;
    for (const auto& p : pairs)
        if (std::isfinite(p.target_length) && std::abs(p.target_length - p.source_length) / p.source_length < tolerance)
            ++ok;
    return double(ok) / double(pairs.size());
}

namespace {

// 3x3x3 neighbourhood; cell (x+1) + 3(y+1) + 9(z+1), center 13.
using Cube = std::array<bool, 27>;


Offset cube_offset(int i) { return {i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1}; }

int l1(const Offset& o) { return std::abs(o[0]) + std::abs(o[1]) + std::abs(o[2]); }
int linf(const Offset& o) { return std::max({std::abs(o[0]), std::abs(o[1]), std::abs(o[2])}); }

// Components of the cells selected by `in`, adjacent when their offsets differ by a
// step allowed by `adjacent`; counts those containing a cell accepted by `seed`.
template <class In, class Adj, class Seed>
int count_components(In in, Adj adjacent, Seed seed) {
    std::array<int, 27> label{};
    label.fill(-1);
    int n = 0;
    for (int s = 0; s < 27; ++s) {
        if (s == 13 || !in(s) || label[s] >= 0) continue;
        bool counted = false;
        std::vector<int> stack{s};
        label[s] = s;
        while (!stack.empty()) {
            const int a = stack.back();
            stack.pop_back();
            counted = counted || seed(a);
            const auto oa = cube_offset(a);
            for (int b = 0; b < 27; ++b) {
                if (b == 13 || label[b] >= 0 || !in(b)) continue;
                const auto ob = cube_offset(b);
                const Offset d{ob[0] - oa[0], ob[1] - oa[1], ob[2] - oa[2]};
                if (adjacent(d)) {
                    label[b] = s;
                    stack.push_back(b);
                }
            }
        }
        if (counted) ++n;
    }
    return n;
}

// Simple-point test: (8,4) connectivity in 2D, (26,6) in 3D.
bool is_simple(const Cube& c, int dim) {
    const auto in_plane = [&](int i) { return dim == 3 || cube_offset(i)[2] == 0; };
    const auto fg = [&](int i) { return in_plane(i) && c[static_cast<std::size_t>(i)]; };
    const auto any = [](int) { return true; };
    const auto full = [](const Offset& d) { return linf(d) == 1; };
    if (count_components(fg, full, any) != 1) return false;
    // background in N8 / N18 under face adjacency, counted when it touches a face neighbour
    const auto bg = [&](int i) { return in_plane(i) && !c[static_cast<std::size_t>(i)] && l1(cube_offset(i)) <= 2; };
    const auto face = [](const Offset& d) { return l1(d) == 1; };
    const auto touches = [](int i) { return l1(cube_offset(i)) == 1; };
    return count_components(bg, face, touches) == 1;
}

struct Lattice {
    const GridSpec& g;
    int dim;

    [[nodiscard]] std::vector<Offset> neighbours() const {
        std::vector<Offset> out;
        for (int i = 0; i < 27; ++i) {
            const auto o = cube_offset(i);
            if (i == 13 || (dim == 2 && o[2] != 0)) continue;
            out.push_back(o);
        }
        return out;
    }

    [[nodiscard]] bool on(const Mask& m, const std::array<int, 3>& v) const {
        return in_grid(g, v) && m.on[g.index(v[0], v[1], v[2])];
    }
};

std::array<int, 3> add(const std::array<int, 3>& v, const Offset& o) { return {v[0] + o[0], v[1] + o[1], v[2] + o[2]}; }

} // namespace

Mask thin(const Mask& mask) {
    Mask m = mask;
    const int dim = m.grid.dim();
    const Lattice lat{m.grid, dim};
    const auto nbs = lat.neighbours();
    std::vector<Offset> directions{{0, -1, 0}, {0, 1, 0}, {1, 0, 0}, {-1, 0, 0}};
    if (dim == 3) directions.insert(directions.end(), {{0, 0, 1}, {0, 0, -1}});

    const auto neighbour_count = [&](const std::array<int, 3>& v) {
        int n = 0;
        for (const auto& o : nbs) n += lat.on(m, add(v, o)) ? 1 : 0;
        return n;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& dir : directions) {
            std::vector<std::size_t> border;
            for (std::size_t q = 0; q < m.on.size(); ++q) {
                if (!m.on[q]) continue;
                const auto v = m.grid.voxel(q);
                if (!lat.on(m, add(v, dir))) border.push_back(q);
            }
            for (const auto q : border) {
                const auto v = m.grid.voxel(q);
                if (neighbour_count(v) <= 1) continue; // curve end or isolated voxel
                Cube c{};
                for (int i = 0; i < 27; ++i) c[static_cast<std::size_t>(i)] = i != 13 && lat.on(m, add(v, cube_offset(i)));
                if (is_simple(c, dim)) {
                    m.on[q] = 0;
                    changed = true;
                }
            }
        }
    }
    return m;
}

AnnotationGraph skeletonize_and_graph(const ScalarVolume& y, double threshold, double prune_length) {
    if (!(threshold > 0.0)) throw DomainError("skeletonize: threshold must be > 0");
    if (!(prune_length >= 0.0)) throw DomainError("skeletonize: prune length must be >= 0");
    const auto& grid = y.grid();
    const int dim = grid.dim();
    const Mask skel = thin(threshold_below(y, threshold));
    const Lattice lat{grid, dim};
    const auto nbs = lat.neighbours();

    std::vector<std::size_t> voxels;
    std::vector<std::ptrdiff_t> id(skel.on.size(), -1);
    for (std::size_t q = 0; q < skel.on.size(); ++q)
        if (skel.on[q]) {
            id[q] = static_cast<std::ptrdiff_t>(voxels.size());
            voxels.push_back(q);
        }
    const std::size_t n = voxels.size();

    // Lattice adjacency without shortcuts: a link is dropped when a skeleton voxel lies on a
    // shorter lattice path between its ends, which removes the triangles of 8/26-adjacency.
    std::vector<std::set<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = grid.voxel(voxels[i]);
        for (const auto& o : nbs) {
            const auto w = add(v, o);
            if (!lat.on(skel, w)) continue;
            const auto j = static_cast<std::size_t>(id[grid.index(w[0], w[1], w[2])]);
            if (j < i) continue;
            bool shortcut = false;
            for (const auto& p : nbs) {
                const Offset rest{o[0] - p[0], o[1] - p[1], o[2] - p[2]};
                if (linf(rest) > 1 || l1(rest) == 0 || l1(p) + l1(rest) != l1(o)) continue;
                if (lat.on(skel, add(v, p))) {
                    shortcut = true;
                    break;
                }
            }
            if (!shortcut) {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }

    // Merge connected junction voxels into one vertex at their centroid.
    std::vector<std::size_t> rep(n);
    std::iota(rep.begin(), rep.end(), 0);
    std::vector<Vec3> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = grid.center(voxels[i]);
    std::vector<bool> alive(n, true);
    for (std::size_t s = 0; s < n; ++s) {
        if (adj[s].size() < 3 || rep[s] != s) continue;
        std::vector<std::size_t> cluster{s}, stack{s};
        std::vector<bool> in_cluster(n, false);
        in_cluster[s] = true;
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            for (const auto w : adj[v])
                if (!in_cluster[w] && adj[w].size() >= 3) {
                    in_cluster[w] = true;
                    cluster.push_back(w);
                    stack.push_back(w);
                }
        }
        if (cluster.size() == 1) continue;
        Vec3 c;
        for (const auto v : cluster) c += pos[v];
        pos[s] = c * (1.0 / double(cluster.size()));
        std::set<std::size_t> merged;
        for (const auto v : cluster) {
            for (const auto w : adj[v])
                if (!in_cluster[w]) merged.insert(w);
            if (v != s) {
                alive[v] = false;
                rep[v] = s;
            }
        }
        for (const auto v : cluster)
            for (const auto w : adj[v])
                if (!in_cluster[w]) {
                    adj[w].erase(v);
                    adj[w].insert(s);
                }
        for (const auto v : cluster)
            if (v != s) adj[v].clear();
        adj[s] = std::move(merged);
    }

    // Cut spurs: endpoint-to-junction chains shorter than the prune length.
    bool pruned = true;
    while (pruned) {
        pruned = false;
        for (std::size_t e = 0; e < n; ++e) {
            if (!alive[e] || adj[e].size() != 1) continue;
            std::vector<std::size_t> chain{e};
            double length = 0.0;
            std::size_t prev = e, cur = *adj[e].begin();
            length += distance(pos[prev], pos[cur]);
            while (adj[cur].size() == 2) {
                const auto next = *adj[cur].begin() == prev ? *adj[cur].rbegin() : *adj[cur].begin();
                chain.push_back(cur);
                prev = cur;
                cur = next;
                length += distance(pos[prev], pos[cur]);
                if (length >= prune_length) break;
            }
            if (adj[cur].size() < 3 || length >= prune_length) continue;
            for (const auto v : chain) {
                for (const auto w : adj[v]) adj[w].erase(v);
                adj[v].clear();
                alive[v] = false;
            }
            pruned = true;
        }
    }

    std::vector<std::ptrdiff_t> out_id(n, -1);
    std::vector<Vec3> vertices;
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) {
            out_id[i] = static_cast<std::ptrdiff_t>(vertices.size());
            vertices.push_back(pos[i]);
        }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto j : adj[i])
            if (alive[i] && alive[j] && i < j)
                edges.push_back({static_cast<std::size_t>(out_id[i]), static_cast<std::size_t>(out_id[j])});
    return build_graph(dim, std::move(vertices), std::move(edges));
}

MetricsReport evaluate_graphs(const AnnotationGraph& pred, const AnnotationGraph& gt, const GridSpec& grid,
                              double match_distance, double tolerance, const PathMetricParams& params) {
    MetricsReport r;
    const auto c = ccq(rasterize(pred, grid), rasterize(gt, grid), match_distance);
    r.correctness = c.correctness;
    r.completeness = c.completeness;
    r.quality = c.quality;
    r.apls = apls(pred, gt, params);
    r.tlts = tlts(pred, gt, tolerance, params);
    r.match_distance = match_distance;
    r.tolerance = tolerance;
    r.path = params;
    return r;
}

std::string metrics_csv_row(const MetricsReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f", r.correctness, r.completeness, r.quality, r.apls, r.tlts);
    return buf;
}

} // namespace netsnake
