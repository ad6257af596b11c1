#include "netsnake/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "netsnake/error.hpp"
#include "netsnake/random.hpp"

namespace netsnake {

struct AnnotationGraph::Topology {
    std::vector<Edge> edges;
    std::vector<Triple> triples;
    std::vector<std::vector<std::size_t>> adjacency;
};

AnnotationGraph::AnnotationGraph() : topology_(std::make_shared<const Topology>()) {}

AnnotationGraph::AnnotationGraph(int dim, std::vector<Vec3> vertices, std::shared_ptr<const Topology> topology)
    : dim_(dim), vertices_(std::move(vertices)), topology_(std::move(topology)) {}

std::size_t AnnotationGraph::edge_count() const noexcept { return topology_->edges.size(); }

std::span<const Edge> AnnotationGraph::edges() const noexcept { return topology_->edges; }

std::span<const Triple> AnnotationGraph::triples() const noexcept { return topology_->triples; }

std::span<const std::size_t> AnnotationGraph::neighbors(std::size_t v) const noexcept {
    return topology_->adjacency[v];
}

AnnotationGraph AnnotationGraph::with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != vertices_.size())
        throw GraphError(GraphError::Kind::DimensionMismatch,
                         "with_vertices: expected " + std::to_string(vertices_.size()) + " vertices, got " +
                             std::to_string(vertices.size()));
    if (dim_ == 2)
        for (auto& p : vertices) p[2] = 0.0;
    return {dim_, std::move(vertices), topology_};
}

bool AnnotationGraph::shares_topology(const AnnotationGraph& other) const noexcept {
    return topology_ == other.topology_;
}

double AnnotationGraph::total_length() const {
    double total = 0.0;
    for (const auto& e : edges()) total += distance(vertices_[e.u], vertices_[e.v]);
    return total;
}

std::vector<Chain> AnnotationGraph::chains() const {
    const auto n = vertex_count();
    const auto& adj = topology_->adjacency;
    // Edge visitation keyed on (min, max) endpoint pair.
    std::set<std::pair<std::size_t, std::size_t>> visited;
    auto key = [](std::size_t a, std::size_t b) { return std::pair<std::size_t, std::size_t>(std::minmax(a, b)); };
    // Degree-2 walk step: the neighbor we did not come from.
    auto next_from = [&](std::size_t prev, std::size_t cur) { return adj[cur][0] == prev ? adj[cur][1] : adj[cur][0]; };

    std::vector<Chain> out;
    for (std::size_t a = 0; a < n; ++a) {
        if (adj[a].size() == 2) continue;
        for (auto first : adj[a]) {
            if (visited.contains(key(a, first))) continue;
            Chain chain;
            chain.vertices = {a, first};
            visited.insert(key(a, first));
            std::size_t prev = a, cur = first;
            while (adj[cur].size() == 2) {
                const auto nxt = next_from(prev, cur);
                visited.insert(key(cur, nxt));
                chain.vertices.push_back(nxt);
                prev = cur;
                cur = nxt;
            }
            out.push_back(std::move(chain));
        }
    }
    // Whatever is left are components where every vertex has degree 2.
    for (std::size_t s = 0; s < n; ++s) {
        if (adj[s].size() != 2 || visited.contains(key(s, adj[s][0]))) continue;
        Chain chain;
        chain.closed = true;
        chain.vertices = {s};
        std::size_t prev = s, cur = adj[s][0];
        visited.insert(key(s, cur));
        chain.vertices.push_back(cur);
        while (cur != s) {
            const auto nxt = next_from(prev, cur);
            visited.insert(key(cur, nxt));
            chain.vertices.push_back(nxt);
            prev = cur;
            cur = nxt;
        }
        out.push_back(std::move(chain));
    }
    return out;
}

AnnotationGraph build_graph(int dim, std::vector<Vec3> vertices, std::vector<Edge> edges) {
    if (dim != 2 && dim != 3)
        throw GraphError(GraphError::Kind::DimensionMismatch, "dimension must be 2 or 3");
    const auto n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (dim == 2 && vertices[i][2] != 0.0)
            throw GraphError(GraphError::Kind::DimensionMismatch,
                             "vertex " + std::to_string(i) + " has a z coordinate in a 2D graph");
    }
    auto topo = std::make_shared<AnnotationGraph::Topology>();
    topo->adjacency.resize(n);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : edges) {
        if (e.u >= n || e.v >= n)
            throw GraphError(GraphError::Kind::IndexOutOfRange, "edge (" + std::to_string(e.u) + ", " +
                                                                    std::to_string(e.v) + ") references a vertex >= " +
                                                                    std::to_string(n));
        if (e.u == e.v)
            throw GraphError(GraphError::Kind::SelfLoop, "self-loop at vertex " + std::to_string(e.u));
        if (!seen.insert(std::minmax(e.u, e.v)).second)
            throw GraphError(GraphError::Kind::DuplicateEdge,
                             "duplicate edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")");
        topo->adjacency[e.u].push_back(e.v);
        topo->adjacency[e.v].push_back(e.u);
    }
    for (auto& nb : topo->adjacency) std::sort(nb.begin(), nb.end());
    for (std::size_t v = 0; v < n; ++v) {
        const auto& nb = topo->adjacency[v];
        if (nb.size() == 2) topo->triples.push_back({nb[0], v, nb[1]});
    }
    topo->edges = std::move(edges);
    return {dim, std::move(vertices), std::move(topo)};
}

namespace {

/// Points at arc lengths k * L / segments (k = 1..segments-1) along the polyline.
std::vector<Vec3> interior_points(const std::vector<Vec3>& poly, std::size_t segments) {
    std::vector<double> cum(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) cum[i] = cum[i - 1] + distance(poly[i - 1], poly[i]);
    const double total = cum.back();
    std::vector<Vec3> out;
    std::size_t seg = 1;
    for (std::size_t k = 1; k < segments; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(segments);
        while (seg + 1 < poly.size() && cum[seg] < s) ++seg;
        const double len = cum[seg] - cum[seg - 1];
        const double t = len > 0.0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
        out.push_back(poly[seg - 1] + (poly[seg] - poly[seg - 1]) * t);
    }
    return out;
}

struct AnchorMap {
    std::vector<Vec3> vertices;
    std::vector<std::size_t> new_index; // SIZE_MAX when not an anchor
};

/// Anchors are vertices of degree != 2 plus the first vertex of every pure cycle.
AnchorMap collect_anchors(const AnnotationGraph& g, const std::vector<Chain>& chains) {
    const auto n = g.vertex_count();
    std::vector<bool> is_anchor(n, false);
    for (std::size_t v = 0; v < n; ++v) is_anchor[v] = g.degree(v) != 2;
    for (const auto& c : chains)
        if (c.closed) is_anchor[c.vertices.front()] = true;
    AnchorMap m;
    m.new_index.assign(n, SIZE_MAX);
    for (std::size_t v = 0; v < n; ++v) {
        if (!is_anchor[v]) continue;
        m.new_index[v] = m.vertices.size();
        m.vertices.push_back(g.vertex(v));
    }
    return m;
}

} // namespace

AnnotationGraph resample_polylines(const AnnotationGraph& graph, double target_spacing) {
    if (!(target_spacing > 0.0)) throw DomainError("resample_polylines: target_spacing must be > 0");
    const auto chains = graph.chains();
    auto anchors = collect_anchors(graph, chains);
    auto vertices = std::move(anchors.vertices);
    std::vector<Edge> edges;
    std::set<std::pair<std::size_t, std::size_t>> direct;

    for (const auto& chain : chains) {
        std::vector<Vec3> poly;
        for (auto v : chain.vertices) poly.push_back(graph.vertex(v));
        double length = 0.0;
        for (std::size_t i = 1; i < poly.size(); ++i) length += distance(poly[i - 1], poly[i]);

        const auto a = anchors.new_index[chain.vertices.front()];
        const auto b = anchors.new_index[chain.vertices.back()];
        auto segments = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length / target_spacing)));
        if (a == b) segments = std::max<std::size_t>(segments, 3);
        else if (segments == 1 && direct.contains(std::minmax(a, b))) segments = 2;
        if (segments == 1) direct.insert(std::minmax(a, b));

        std::size_t prev = a;
        for (const auto& p : interior_points(poly, segments)) {
            vertices.push_back(p);
            edges.push_back({prev, vertices.size() - 1});
            prev = vertices.size() - 1;
        }
        edges.push_back({prev, b});
    }
    return build_graph(graph.dim(), std::move(vertices), std::move(edges));
}

AnnotationGraph coarsen(const AnnotationGraph& graph) {
    if (graph.vertex_count() == 0) throw GraphError(GraphError::Kind::Empty, "coarsen: graph has no vertices");
    const auto chains = graph.chains();
    auto anchors = collect_anchors(graph, chains);
    auto vertices = std::move(anchors.vertices);
    std::vector<Edge> edges;
    std::set<std::pair<std::size_t, std::size_t>> present;

    auto keep = [&](std::size_t original) {
        vertices.push_back(graph.vertex(original));
        return vertices.size() - 1;
    };
    for (const auto& chain : chains) {
        const auto& seq = chain.vertices;
        const auto a = anchors.new_index[seq.front()];
        const auto b = anchors.new_index[seq.back()];
        if (a == b) {
            // Loop back to its own anchor: keep a triangle.
            const auto m = seq.size() - 1;
            const auto p = keep(seq[m / 3]);
            const auto q = keep(seq[std::max<std::size_t>(2 * m / 3, m / 3 + 1)]);
            edges.push_back({a, p});
            edges.push_back({p, q});
            edges.push_back({q, a});
        } else if (present.contains(std::minmax(a, b))) {
            // Parallel chain between the same anchors keeps its middle vertex.
            const auto mid = keep(seq[seq.size() / 2]);
            edges.push_back({a, mid});
            edges.push_back({mid, b});
        } else {
            present.insert(std::minmax(a, b));
            edges.push_back({a, b});
        }
    }
    return build_graph(graph.dim(), std::move(vertices), std::move(edges));
}

SmoothDisplacementField::SmoothDisplacementField(int dim, double correlation_length, std::uint64_t seed) : dim_(dim) {
    if (!(correlation_length > 0.0)) throw DomainError("correlation_length must be > 0");
    if (dim != 2 && dim != 3) throw DomainError("dimension must be 2 or 3");
    Rng rng(seed);
    for (int axis = 0; axis < dim; ++axis) {
        for (int k = 0; k < kWaves; ++k) {
            Wave w;
            if (dim == 2) {
                const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
                w.direction = {std::cos(t), std::sin(t), 0.0};
            } else {
                const double z = rng.uniform(-1.0, 1.0);
                const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                w.direction = {r * std::cos(t), r * std::sin(t), z};
            }
            const double wavelength = correlation_length * rng.uniform(1.0, 4.0);
            w.wavenumber = 2.0 * std::numbers::pi / wavelength;
            w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            waves_.push_back(w);
        }
    }
}

Vec3 SmoothDisplacementField::operator()(const Vec3& p) const noexcept {
    Vec3 out;
    for (int axis = 0; axis < dim_; ++axis) {
        double s = 0.0;
        for (int k = 0; k < kWaves; ++k) {
            const auto& w = waves_[static_cast<std::size_t>(axis * kWaves + k)];
            s += std::sin(w.wavenumber * dot(w.direction, p) + w.phase);
        }
        out[static_cast<std::size_t>(axis)] = s / kWaves;
    }
    return out;
}

AnnotationGraph perturb_smooth(const AnnotationGraph& graph, double amplitude, double correlation_length,
                               std::uint64_t seed) {
    if (!(amplitude >= 0.0)) throw DomainError("perturb_smooth: amplitude must be >= 0");
    const SmoothDisplacementField field(graph.dim(), correlation_length, seed);
    std::vector<Vec3> unit;
    double max_norm = 0.0;
    for (const auto& p : graph.vertices()) {
        unit.push_back(field(p));
        max_norm = std::max(max_norm, norm(unit.back()));
    }
    std::vector<Vec3> moved(graph.vertices().begin(), graph.vertices().end());
    if (amplitude > 0.0 && max_norm > 0.0) {
        const double scale = amplitude / max_norm;
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += unit[i] * scale;
    }
    return graph.with_vertices(std::move(moved));
}

void write_graph(std::ostream& out, const AnnotationGraph& graph) {
    char buf[128];
    out << "# netsnake graph, dim " << graph.dim() << '\n';
    for (std::size_t i = 0; i < graph.vertex_count(); ++i) {
        const auto& p = graph.vertex(i);
        if (graph.dim() == 2)
            std::snprintf(buf, sizeof buf, "v %zu %.9g %.9g\n", i, p[0], p[1]);
        else
            std::snprintf(buf, sizeof buf, "v %zu %.9g %.9g %.9g\n", i, p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& e : graph.edges()) out << "e " << e.u << ' ' << e.v << '\n';
}

void write_graph(const std::filesystem::path& path, const AnnotationGraph& graph) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_graph(out, graph);
    if (!out) throw IoError("short write to " + path.string());
}

AnnotationGraph read_graph(std::istream& in) {
    std::vector<std::pair<std::size_t, Vec3>> records;
    std::vector<Edge> edges;
    int dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        auto fail = [&](const std::string& why) {
            throw IoError("graph line " + std::to_string(lineno) + ": " + why);
        };
        if (tag == "v") {
            std::size_t id;
            if (!(ss >> id)) fail("missing vertex id");
            std::vector<double> coords;
            std::string tok;
            while (ss >> tok) {
                std::size_t used = 0;
                double value = 0.0;
                try {
                    value = std::stod(tok, &used);
                } catch (const std::exception&) {
                    fail("bad coordinate '" + tok + "'");
                }
                if (used != tok.size()) fail("bad coordinate '" + tok + "'");
                coords.push_back(value);
            }
            if (coords.size() != 2 && coords.size() != 3) fail("vertex needs 2 or 3 coordinates");
            const int d = static_cast<int>(coords.size());
            if (dim != 0 && d != dim) fail("mixed 2D and 3D vertices");
            dim = d;
            records.push_back({id, {coords[0], coords[1], d == 3 ? coords[2] : 0.0}});
        } else if (tag == "e") {
            std::size_t a, b;
            if (!(ss >> a >> b)) fail("edge needs two ids");
            std::string extra;
            if (ss >> extra) fail("trailing tokens after edge");
            edges.push_back({a, b});
        } else {
            fail("unknown record '" + tag + "'");
        }
    }
    std::vector<Vec3> vertices(records.size());
    std::vector<bool> filled(records.size(), false);
    for (const auto& [id, p] : records) {
        if (id >= records.size() || filled[id])
            throw IoError("vertex ids must be exactly 0.." + std::to_string(records.size() - 1));
        filled[id] = true;
        vertices[id] = p;
    }
    return build_graph(dim == 0 ? 2 : dim, std::move(vertices), std::move(edges));
}

AnnotationGraph read_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_graph(in);
}

} // namespace netsnake
