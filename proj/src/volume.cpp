#include "netsnake/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "netsnake/error.hpp"

namespace netsnake {

namespace {

void check_extent(int n) {
    if (n < 1) throw DomainError("grid extent must be >= 1, got " + std::to_string(n));
}

std::filesystem::path header_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".hdr";
    return p;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

GridSpec::GridSpec(int nx, int ny) : dim_(2), extents_{nx, ny, 1} {
    check_extent(nx);
    check_extent(ny);
}

GridSpec::GridSpec(int nx, int ny, int nz) : dim_(3), extents_{nx, ny, nz} {
    check_extent(nx);
    check_extent(ny);
    check_extent(nz);
}

std::size_t GridSpec::voxel_count() const noexcept {
    return static_cast<std::size_t>(extents_[0]) * static_cast<std::size_t>(extents_[1]) *
           static_cast<std::size_t>(extents_[2]);
}

std::array<int, 3> GridSpec::voxel(std::size_t index) const noexcept {
    const auto nx = static_cast<std::size_t>(extents_[0]);
    const auto ny = static_cast<std::size_t>(extents_[1]);
    return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny), static_cast<int>(index / (nx * ny))};
}

Vec3 GridSpec::center(std::size_t index) const noexcept {
    const auto v = voxel(index);
    return {static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2])};
}

bool GridSpec::contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < extents_[0] && y < extents_[1] && z < extents_[2];
}

bool GridSpec::contains(const Vec3& p) const noexcept {
    for (int a = 0; a < dim_; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (!(p[i] >= 0.0 && p[i] <= extents_[i] - 1.0)) return false;
    }
    return true;
}

ScalarVolume::ScalarVolume(GridSpec grid, double fill) : grid_(grid), values_(grid.voxel_count(), fill) {}

ScalarVolume::ScalarVolume(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.voxel_count())
        throw DomainError("volume has " + std::to_string(values_.size()) + " values but the grid has " +
                          std::to_string(grid_.voxel_count()) + " voxels");
}

void write_volume(const std::filesystem::path& path, const ScalarVolume& volume) {
    static_assert(sizeof(float) == 4);
    std::ofstream raw(path, std::ios::binary);
    if (!raw) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<char> bytes(volume.size() * 4);
    for (std::size_t i = 0; i < volume.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(volume[i]));
        for (std::size_t b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    raw.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!raw) throw IoError("short write to " + path.string());

    std::ofstream hdr(header_path(path));
    if (!hdr) throw IoError("cannot open " + header_path(path).string() + " for writing");
    const auto& g = volume.grid();
    hdr << "dims =";
    for (int a = 0; a < g.dim(); ++a) hdr << ' ' << g.extent(a);
    hdr << "\ndtype = float32\norder = x-fastest\n";
    if (!hdr) throw IoError("short write to " + header_path(path).string());
}

ScalarVolume read_volume(const std::filesystem::path& path) {
    std::ifstream hdr(header_path(path));
    if (!hdr) throw IoError("cannot open volume header " + header_path(path).string());
    std::vector<int> dims;
    std::string dtype, order;
    std::string line;
    while (std::getline(hdr, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed header line: " + line);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "dims") {
            std::istringstream ss(value);
            int n;
            while (ss >> n) dims.push_back(n);
        } else if (key == "dtype") {
            dtype = value;
        } else if (key == "order") {
            order = value;
        } else {
            throw IoError("unknown header key: " + key);
        }
    }
    if (dtype != "float32") throw IoError("unsupported dtype '" + dtype + "'");
    if (order != "x-fastest") throw IoError("unsupported order '" + order + "'");
    if (dims.size() != 2 && dims.size() != 3) throw IoError("dims must list 2 or 3 extents");
    for (int n : dims)
        if (n < 1) throw IoError("dims must be positive");
    const GridSpec grid = dims.size() == 2 ? GridSpec(dims[0], dims[1]) : GridSpec(dims[0], dims[1], dims[2]);

    std::ifstream raw(path, std::ios::binary);
    if (!raw) throw IoError("cannot open " + path.string());
    std::vector<char> bytes(grid.voxel_count() * 4);
    raw.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (raw.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError(path.string() + " is shorter than its header declares");
    if (raw.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + " is longer than its header declares");

    std::vector<double> values(grid.voxel_count());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return {grid, std::move(values)};
}

void write_pgm(const std::filesystem::path& path, const ScalarVolume& volume, double lo, double hi) {
    const auto& g = volume.grid();
    const int nx = g.extent(0), ny = g.extent(1), nz = g.extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << nx << ' ' << ny << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<unsigned char> row(static_cast<std::size_t>(nx));
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double v = volume.at(x, y, 0);
            for (int z = 1; z < nz; ++z) v = std::max(v, volume.at(x, y, z));
            const double t = std::clamp((v - lo) / span, 0.0, 1.0);
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(255.0 * t));
        }
        out.write(reinterpret_cast<const char*>(row.data()), nx);
    }
    if (!out) throw IoError("short write to " + path.string());
}

} // namespace netsnake
