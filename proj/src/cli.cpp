#include "netsnake/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <new>
#include <ostream>
#include <sstream>

#include "netsnake/distance_field.hpp"
#include "netsnake/error.hpp"
#include "netsnake/graph.hpp"
#include "netsnake/smoothing.hpp"
#include "netsnake/volume.hpp"

namespace netsnake {

std::string_view command_name(Command c) noexcept {
    switch (c) {
    case Command::SynthGen: return "synth-gen";
    case Command::Adjust: return "adjust";
    case Command::TrainToy: return "train-toy";
    case Command::Metrics: return "metrics";
    case Command::ReproduceFig4: return "reproduce-fig4";
    }
    return "?";
}

const std::vector<RunConfig::Key>& RunConfig::keys() {
    using C = Command;
    const std::vector<C> snake{C::Adjust, C::TrainToy, C::ReproduceFig4};
    const std::vector<C> training{C::TrainToy, C::ReproduceFig4};
    const std::vector<C> fixture{C::SynthGen, C::ReproduceFig4};
    static const std::vector<Key> k{
        {"seed", "0", "random seed", {C::SynthGen, C::TrainToy, C::Metrics, C::ReproduceFig4}},
        {"out", "out", "output directory", {C::SynthGen, C::Adjust, C::TrainToy, C::ReproduceFig4}},
        {"fixture", "fig4", "fixture to generate: fig4, fig4-steep or tree", {C::SynthGen}},
        {"size", "96", "grid edge length in voxels", fixture},
        {"dim", "2", "grid dimensionality of the tree fixture (2 or 3)", {C::SynthGen}},
        {"offset", "4", "lateral annotation offset of the fig4 fixture, voxels", fixture},
        {"gap_length", "16", "arc length of the fig4 break, voxels", fixture},
        {"gap_width", "0.5", "voxels closer than this to the centerline form the break", fixture},
        {"curve_amplitude", "6", "lateral swing of the fig4 centerline, voxels", fixture},
        {"spacing", "1", "vertex spacing of generated graphs, voxels", {C::SynthGen, C::ReproduceFig4}},
        {"steepness", "25", "field scale of the fig4-steep fixture", {C::SynthGen}},
        {"branches", "7", "branch count of the tree fixture", {C::SynthGen}},
        {"perturbation", "2", "annotation perturbation amplitude of the tree fixture, voxels", {C::SynthGen}},
        {"correlation_length", "24", "correlation length of the perturbation, voxels", {C::SynthGen}},
        {"volume", "", "input field volume (.raw with .hdr)", {C::Adjust, C::TrainToy}},
        {"graph", "", "input annotation graph", {C::Adjust, C::TrainToy}},
        {"truth", "", "optional ground-truth graph for error reporting", {C::TrainToy}},
        {"driver", "fast", "snake driver: full or fast", {C::Adjust}},
        {"mode", "fast", "training mode: baseline, simple, full or fast", {C::TrainToy}},
        {"alpha", "0.01", "spring weight", snake},
        {"beta", "0.001", "elasticity weight", snake},
        {"gamma", "10", "viscosity", snake},
        {"T", "10", "snake updates per adjustment", snake},
        {"sigma", "1", "Gaussian width of the fast driver, voxels", snake},
        {"d", "20", "distance-map truncation, voxels", {C::SynthGen, C::Adjust, C::TrainToy, C::ReproduceFig4}},
        {"data_weight", "0.07", "scale of the full driver's data energy", snake},
        {"divergence_radius", "20", "largest vertex movement allowed within one snake run", snake},
        {"warm_start", "true", "start each adjustment where the previous one ended (false: at the input annotation)", training},
        {"lr", "400", "gradient-descent learning rate", training},
        {"steps", "100", "gradient-descent steps", training},
        {"dump_every", "0", "dump field and graph every k steps (0: never)", {C::TrainToy}},
        {"pred", "", "predicted graph (.graph) or distance volume (.raw)", {C::Metrics}},
        {"gt", "", "ground-truth graph (.graph) or distance volume (.raw)", {C::Metrics}},
        {"grid", "", "grid for rasterizing graphs, e.g. 96x96 (default: bounding box)", {C::Metrics}},
        {"threshold", "2", "skeletonization threshold for volume inputs", {C::Metrics}},
        {"prune_length", "3", "spur prune length for volume inputs, voxels", {C::Metrics}},
        {"match_distance", "3", "CCQ match distance, voxels", {C::Metrics}},
        {"tolerance", "0.15", "TLTS relative length tolerance", {C::Metrics}},
        {"n_pairs", "200", "endpoint pairs sampled by APLS and TLTS", {C::Metrics}},
        {"snap_radius", "4", "APLS endpoint snapping radius, voxels", {C::Metrics}},
    };
    return k;
}

RunConfig::RunConfig() {
    for (const auto& k : keys()) values_.emplace(k.name, k.default_value);
}

void RunConfig::set(std::string_view key, std::string value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    it->second = std::move(value);
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
    std::map<std::string, int, std::less<>> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const auto key = trim(std::string_view(content).substr(0, eq));
        auto value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!seen.emplace(key, lineno).second) throw ConfigError(where + ": duplicate key '" + key + "'");
        try {
            set(key, std::move(value));
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

const std::string& RunConfig::get(std::string_view key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    return it->second;
}

double RunConfig::number(std::string_view key) const {
    const auto& s = get(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError("key '" + std::string(key) + "': '" + s + "' is not a finite number");
    return v;
}

int RunConfig::integer(std::string_view key) const {
    const auto& s = get(key);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("key '" + std::string(key) + "': '" + s + "' is not an integer");
    return v;
}

std::uint64_t RunConfig::unsigned_integer(std::string_view key) const {
    const auto& s = get(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("key '" + std::string(key) + "': '" + s + "' is not a non-negative integer");
    return v;
}

SnakeParams RunConfig::snake() const {
    SnakeParams p;
    p.alpha = number("alpha");
    p.beta = number("beta");
    p.gamma = number("gamma");
    p.steps = integer("T");
    p.sigma = number("sigma");
    p.truncation = number("d");
    p.data_weight = number("data_weight");
    return p;
}

TrainConfig RunConfig::train() const {
    TrainConfig c;
    c.snake = snake();
    c.learning_rate = number("lr");
    c.steps = integer("steps");
    c.divergence_radius = number("divergence_radius");
    c.seed = unsigned_integer("seed");
    c.mode = parse_training_mode(get("mode"));
    const auto& warm = get("warm_start");
    if (warm == "true" || warm == "1") c.warm_start = true;
    else if (warm == "false" || warm == "0") c.warm_start = false;
    else throw ConfigError("warm_start: expected true or false, got '" + warm + "'");
    c.validate();
    return c;
}

Fig4Params RunConfig::fig4() const {
    Fig4Params p;
    p.size = integer("size");
    p.offset = number("offset");
    p.gap_length = number("gap_length");
    p.gap_width = number("gap_width");
    p.truncation = number("d");
    p.amplitude = number("curve_amplitude");
    p.spacing = number("spacing");
    return p;
}

TreeParams RunConfig::tree() const {
    TreeParams p;
    p.truncation = number("d");
    p.amplitude = number("perturbation");
    p.correlation_length = number("correlation_length");
    p.spacing = number("spacing");
    return p;
}

PathMetricParams RunConfig::path_metrics() const {
    PathMetricParams p;
    p.n_pairs = integer("n_pairs");
    p.seed = unsigned_integer("seed");
    p.snap_radius = number("snap_radius");
    return p;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const GraphError*>(&e))
        return kExitConfig;
    return kExitOther;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

namespace {

namespace fs = std::filesystem;

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

const std::string& required(const RunConfig& c, std::string_view key) {
    const auto& v = c.get(key);
    if (v.empty()) throw ConfigError("missing required key '" + std::string(key) + "'");
    return v;
}

std::string fixed(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << std::fixed << v;
    return s.str();
}

// The field with the graph drawn in at `hi`, for the PGM panels.
ScalarVolume overlay(const ScalarVolume& y, const AnnotationGraph& g, double hi) {
    const auto m = rasterize(g, y.grid());
    std::vector<double> v(y.values().begin(), y.values().end());
    for (std::size_t q = 0; q < v.size(); ++q)
        if (m.on[q]) v[q] = hi;
    return ScalarVolume(y.grid(), std::move(v));
}

ScalarVolume difference(const ScalarVolume& a, const ScalarVolume& b) {
    std::vector<double> v(a.size());
    for (std::size_t q = 0; q < v.size(); ++q) v[q] = a[q] - b[q];
    return ScalarVolume(a.grid(), std::move(v));
}

GridSpec parse_grid(const std::string& s) {
    std::vector<int> dims;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto x = s.find('x', pos);
        const auto part = s.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
        int v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || ptr != part.data() + part.size() || v < 1)
            throw ConfigError("grid '" + s + "' is not of the form NXxNY or NXxNYxNZ");
        dims.push_back(v);
        if (x == std::string::npos) break;
        pos = x + 1;
    }
    if (dims.size() == 2) return GridSpec(dims[0], dims[1]);
    if (dims.size() == 3) return GridSpec(dims[0], dims[1], dims[2]);
    throw ConfigError("grid '" + s + "' is not of the form NXxNY or NXxNYxNZ");
}

GridSpec bounding_grid(const AnnotationGraph& a, const AnnotationGraph& b) {
    std::array<double, 3> hi{0.0, 0.0, 0.0};
    for (const auto* g : {&a, &b})
        for (const auto& p : g->vertices())
            for (std::size_t i = 0; i < 3; ++i) hi[i] = std::max(hi[i], p[i]);
    const auto ext = [&](std::size_t i) { return static_cast<int>(std::ceil(hi[i])) + 2; };
    return b.dim() == 3 ? GridSpec(ext(0), ext(1), ext(2)) : GridSpec(ext(0), ext(1));
}

bool is_graph_path(const std::string& p) { return fs::path(p).extension() == ".graph"; }

double gap_extreme(const ScalarVolume& y, const std::vector<std::size_t>& gap, bool max) {
    double v = max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (const auto q : gap) v = max ? std::max(v, y[q]) : std::min(v, y[q]);
    return v;
}

} // namespace

int cmd_synth_gen(const RunConfig& config, std::ostream& log) {
    const auto& name = config.get("fixture");
    Fixture f;
    if (name == "fig4") {
        f = make_fig4_fixture(config.fig4());
    } else if (name == "fig4-steep") {
        f = steepen(make_fig4_fixture(config.fig4()), config.number("steepness"));
    } else if (name == "tree") {
        const int n = config.integer("size"), dim = config.integer("dim");
        if (dim != 2 && dim != 3) throw ConfigError("dim must be 2 or 3");
        const GridSpec grid = dim == 2 ? GridSpec(n, n) : GridSpec(n, n, n);
        f = make_tree_fixture(grid, config.integer("branches"), config.unsigned_integer("seed"), config.tree());
    } else {
        throw ConfigError("unknown fixture '" + name + "' (expected fig4, fig4-steep or tree)");
    }
    const fs::path out = config.get("out");
    write_fixture(out, f);
    log << "wrote fixture " << f.name << " to " << out.string() << '\n';
    return kExitOk;
}

int cmd_adjust(const RunConfig& config, std::ostream& log) {
    const auto y = read_volume(required(config, "volume"));
    const auto graph = read_graph(fs::path(required(config, "graph")));
    const auto sp = config.snake();
    const auto& driver_name = config.get("driver");
    if (driver_name != "full" && driver_name != "fast")
        throw ConfigError("unknown driver '" + driver_name + "' (expected full or fast)");
    if (graph.dim() != y.grid().dim())
        throw GraphError(GraphError::Kind::DimensionMismatch, "graph and volume dimensionality differ");
    const SnakeSystem system(graph, sp);
    SnakeRun run;
    if (driver_name == "full")
        run = run_snake(system, graph, FullDriver(y, sp.truncation, sp.data_weight), sp.steps,
                        config.number("divergence_radius"));
    else
        run = run_snake(system, graph, FastDriver(std::make_shared<const SmoothedField>(y, sp.sigma)), sp.steps,
                        config.number("divergence_radius"));

    const fs::path out = config.get("out");
    make_dir(out);
    write_graph(out / "adjusted.graph", run.graph);
    auto csv = open_out(out / "steps.csv");
    write_step_reports(csv, run.reports);
    log << "adjusted " << graph.vertex_count() << " vertices in " << sp.steps << " steps; final residual "
        << (run.residuals.empty() ? 0.0 : run.residuals.back()) << '\n';
    return kExitOk;
}

int cmd_train_toy(const RunConfig& config, std::ostream& log) {
    const auto y = read_volume(required(config, "volume"));
    const auto graph = read_graph(fs::path(required(config, "graph")));
    const auto tc = config.train();
    const int dump_every = config.integer("dump_every");
    if (dump_every < 0) throw ConfigError("dump_every must be >= 0");
    const fs::path out = config.get("out");
    make_dir(out);
    const auto& sp = tc.snake;

    TrainObserver observer;
    if (dump_every > 0) {
        make_dir(out / "steps");
        observer = [&](const TrainRecord& rec, const Field& field, const AnnotationGraph& g) {
            if ((rec.step + 1) % dump_every != 0) return;
            char stem[32];
            std::snprintf(stem, sizeof stem, "%04d", rec.step + 1);
            write_volume(out / "steps" / (std::string(stem) + "_field.raw"), field.evaluate());
            write_graph(out / "steps" / (std::string(stem) + "_annotation.graph"), g);
        };
    }
    const auto result = train(PixelField(y), graph, tc, observer);
    const auto final_y = result.field->evaluate();
    write_volume(out / "field.raw", final_y);
    write_graph(out / "annotation.graph", result.graph);
    write_pgm(out / "field.pgm", overlay(final_y, result.graph, sp.truncation), 0.0, sp.truncation);
    auto csv = open_out(out / "history.csv");
    write_history(csv, result.history);
    log << "trained " << tc.steps << " steps in mode " << to_string(tc.mode) << "; final L "
        << result.history.back().loss << '\n';
    if (const auto& truth = config.get("truth"); !truth.empty()) {
        const auto t = read_graph(fs::path(truth));
        log << "annotation error " << adjusted_annotation_error(graph, t) << " -> "
            << adjusted_annotation_error(result.graph, t) << '\n';
    }
    return kExitOk;
}

int cmd_metrics(const RunConfig& config, std::ostream& out) {
    const auto& pred_path = required(config, "pred");
    const auto& gt_path = required(config, "gt");
    if (is_graph_path(pred_path) != is_graph_path(gt_path))
        throw ConfigError("pred and gt must both be graphs or both be volumes");
    const double threshold = config.number("threshold"), prune = config.number("prune_length");
    AnnotationGraph pred, gt;
    GridSpec grid;
    if (is_graph_path(pred_path)) {
        pred = read_graph(fs::path(pred_path));
        gt = read_graph(fs::path(gt_path));
        grid = config.get("grid").empty() ? bounding_grid(pred, gt) : parse_grid(config.get("grid"));
    } else {
        const auto py = read_volume(pred_path), gy = read_volume(gt_path);
        if (!(py.grid() == gy.grid())) throw DomainError("pred and gt volumes are on different grids");
        grid = py.grid();
        pred = skeletonize_and_graph(py, threshold, prune);
        gt = skeletonize_and_graph(gy, threshold, prune);
    }
    const auto report = evaluate_graphs(pred, gt, grid, config.number("match_distance"), config.number("tolerance"),
                                        config.path_metrics());
    out << metrics_csv_row(report) << '\n';
    return kExitOk;
}

int cmd_reproduce_fig4(const RunConfig& config, std::ostream& log) {
    const auto fixture = make_fig4_fixture(config.fig4());
    const fs::path out = config.get("out");
    make_dir(out);
    write_fixture(out / "fixture", fixture);
    TrainConfig base = config.train();
    const double d = base.snake.truncation;
    const auto truth_map = distance_transform(fixture.truth, fixture.grid, d).values();
    write_pgm(out / "truth.pgm", overlay(truth_map, fixture.truth, d), 0.0, d);
    write_pgm(out / "initial.pgm", overlay(fixture.field, fixture.annotation, d), 0.0, d);
    write_pgm(out / "initial_diff.pgm", difference(fixture.field, truth_map), -d / 4, d / 4);

    const double initial_error = adjusted_annotation_error(fixture.annotation, fixture.truth);
    const double initial_gap_min = gap_extreme(fixture.field, fixture.gap, false);
    auto csv = open_out(out / "fig4.csv");
    csv << kFig4CsvHeader << '\n';
    for (const auto mode : {TrainingMode::SnakeFull, TrainingMode::SnakeFast, TrainingMode::SnakeSimple}) {
        TrainConfig tc = base;
        tc.mode = mode;
        const std::string name(to_string(mode));
        const auto result = train(PixelField(fixture.field), fixture.annotation, tc);
        const auto y = result.field->evaluate();
        const auto dir = out / name;
        make_dir(dir);
        write_volume(dir / "field.raw", y);
        write_volume(dir / "diff.raw", difference(y, truth_map));
        write_graph(dir / "annotation.graph", result.graph);
        auto hist = open_out(dir / "history.csv");
        write_history(hist, result.history);
        write_pgm(out / (name + ".pgm"), overlay(y, result.graph, d), 0.0, d);
        write_pgm(out / (name + "_diff.pgm"), difference(y, truth_map), -d / 4, d / 4);

        double seconds = 0.0;
        for (const auto& r : result.history) seconds += r.seconds;
        Fig4Row row;
        row.mode = name;
        row.steps = tc.steps;
        row.seconds_per_step = seconds / tc.steps;
        row.initial_error = initial_error;
        row.final_error = adjusted_annotation_error(result.graph, fixture.truth);
        row.initial_gap_min = initial_gap_min;
        row.gap_max = gap_extreme(y, fixture.gap, true);
        row.arc_length = result.graph.total_length();
        row.truth_length = fixture.truth.total_length();
        row.final_loss = result.history.back().loss;
        csv << row.mode << ',' << row.steps << ',' << fixed(row.seconds_per_step, 9) << ',' << fixed(row.initial_error)
            << ',' << fixed(row.final_error) << ',' << fixed(row.initial_gap_min) << ',' << fixed(row.gap_max) << ','
            << fixed(row.arc_length) << ',' << fixed(row.truth_length) << ',' << fixed(row.final_loss, 9) << '\n';
        log << name << ": error " << row.initial_error << " -> " << row.final_error << ", gap max " << row.gap_max
            << ", arc length " << row.arc_length << ", " << row.seconds_per_step * 1e3 << " ms/step\n";
    }
    if (!csv) throw IoError("write failed for " + (out / "fig4.csv").string());
    return kExitOk;
}

std::vector<Fig4Row> read_fig4_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kFig4CsvHeader) throw IoError(path.string() + ": unexpected header");
    std::vector<Fig4Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 10) throw IoError(path.string() + ": malformed row '" + line + "'");
        Fig4Row r;
        try {
            r.mode = f[0];
            r.steps = std::stoi(f[1]);
            r.seconds_per_step = std::stod(f[2]);
            r.initial_error = std::stod(f[3]);
            r.final_error = std::stod(f[4]);
            r.initial_gap_min = std::stod(f[5]);
            r.gap_max = std::stod(f[6]);
            r.arc_length = std::stod(f[7]);
            r.truth_length = std::stod(f[8]);
            r.final_loss = std::stod(f[9]);
        } catch (const std::logic_error&) {
            throw IoError(path.string() + ": malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace netsnake
