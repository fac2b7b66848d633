#include "neurorate/topomap.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "neurorate/detail/binary_io.hpp"
#include "neurorate/error.hpp"

namespace neurorate {

namespace {

constexpr char kTensorMagic[5] = "TOPO";
constexpr std::uint16_t kTensorVersion = 1;

// Electrodes closer than this to the antipode have no usable azimuth.
constexpr double kAntipodeTolerance = 1e-9;

} // namespace

double ProjectedLayout::max_radius() const noexcept {
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, std::hypot(p.x, p.y));
    return r;
}

Point2 project_point(const Vec3& unit) {
    const double rho = std::hypot(unit.x, unit.y);
    const double theta = std::atan2(rho, unit.z);
    if (theta > std::numbers::pi - kAntipodeTolerance) {
        throw InvalidArgument("projection: electrode at the antipode of the vertex is outside scalp coverage");
    }
    if (rho == 0.0) return {0.0, 0.0};
    return {theta * unit.x / rho, theta * unit.y / rho};
}

ProjectedLayout project(const Montage& montage) {
    ProjectedLayout layout;
    for (const auto& e : montage.electrodes()) {
        layout.labels.push_back(e.label);
        try {
            layout.points.push_back(project_point(e.position));
        } catch (const InvalidArgument& err) {
            throw InvalidArgument(std::string(err.what()) + " ('" + e.label + "')");
        }
    }
    return layout;
}

GridFrame GridFrame::around(const ProjectedLayout& layout, std::size_t size) {
    if (size == 0) throw InvalidArgument("grid size must be positive");
    const double r = layout.max_radius();
    if (!(r > 0.0)) throw InvalidArgument("grid frame: layout has zero extent");
    return {size, 1.05 * r};
}

Point2 GridFrame::pixel_center(std::size_t row, std::size_t col) const noexcept {
    const double h = 2.0 * half_extent / static_cast<double>(size);
    return {half_extent - (static_cast<double>(row) + 0.5) * h, half_extent - (static_cast<double>(col) + 0.5) * h};
}

GridMap interpolate(const ProjectedLayout& layout, std::span<const double> values, std::size_t grid_size) {
    if (layout.size() < 3) throw InvalidArgument("interpolate: need at least 3 electrodes");
    if (values.size() != layout.size()) throw InvalidArgument("interpolate: one value per electrode required");
    const CloughTocher ct(layout.points);
    const auto frame = GridFrame::around(layout, grid_size);
    const auto surface = ct.prepare(values);
    GridMap map = GridMap::Zero(static_cast<Eigen::Index>(grid_size), static_cast<Eigen::Index>(grid_size));
    for (std::size_t r = 0; r < grid_size; ++r) {
        for (std::size_t c = 0; c < grid_size; ++c) {
            if (const auto where = ct.locate(frame.pixel_center(r, c))) {
                map(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ct.evaluate(surface, *where);
            }
        }
    }
    return map;
}

TopoMap::TopoMap(std::size_t grid, std::size_t bands) : grid_(grid), bands_(bands), data_(grid * grid * bands, 0.0f) {}

TopoMapper::TopoMapper(const Montage& montage, std::vector<std::string> channels, std::size_t grid_size)
    : layout_(project(montage.subset(channels))),
      frame_(GridFrame::around(layout_, grid_size)),
      interpolator_(layout_.points) {
    pixels_.reserve(grid_size * grid_size);
    for (std::size_t r = 0; r < grid_size; ++r) {
        for (std::size_t c = 0; c < grid_size; ++c) pixels_.push_back(interpolator_.locate(frame_.pixel_center(r, c)));
    }
}

GridMap TopoMapper::interpolate(std::span<const double> values) const {
    const auto surface = interpolator_.prepare(values);
    const std::size_t g = frame_.size;
    GridMap map = GridMap::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    for (std::size_t p = 0; p < pixels_.size(); ++p) {
        if (pixels_[p]) map(static_cast<Eigen::Index>(p / g), static_cast<Eigen::Index>(p % g)) = interpolator_.evaluate(surface, *pixels_[p]);
    }
    return map;
}

TopoMap TopoMapper::build(const BandMatrix& centroids) const {
    if (centroids.cols() != static_cast<Eigen::Index>(layout_.size())) {
        throw InvalidArgument("topomap: centroid matrix has the wrong channel count");
    }
    const std::size_t g = frame_.size;
    const auto bands = static_cast<std::size_t>(centroids.rows());
    TopoMap map(g, bands);
    std::vector<double> values(layout_.size());
    for (std::size_t b = 0; b < bands; ++b) {
        for (std::size_t ch = 0; ch < values.size(); ++ch) values[ch] = centroids(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(ch));
        const auto surface = interpolator_.prepare(values);
        for (std::size_t p = 0; p < pixels_.size(); ++p) {
            if (pixels_[p]) map.at(p / g, p % g, b) = static_cast<float>(interpolator_.evaluate(surface, *pixels_[p]));
        }
    }
    return map;
}

void TopoMapper::check_channels(const Window& window) const {
    if (window.channel_names() != layout_.labels) {
        throw InvalidArgument("topomap: window channels do not match the mapper's channel set");
    }
}

TopoMap TopoMapper::build(const Window& window, const BandScheme& bands, Taper taper) const {
    check_channels(window);
    auto map = build(band_centroids(power_spectrum(window, taper), bands));
    map.participant_id = window.participant_id();
    map.trial_id = window.trial_id();
    map.window_start = window.start_index();
    return map;
}

WindowFeatures TopoMapper::process(const Window& window, const BandScheme& bands, Aggregation mode, Taper taper) const {
    check_channels(window);
    const auto spectrum = power_spectrum(window, taper);
    WindowFeatures out;
    out.profile.centroids = band_centroids(spectrum, bands);
    out.map = build(out.profile.centroids);
    out.map.participant_id = window.participant_id();
    out.map.trial_id = window.trial_id();
    out.map.window_start = window.start_index();
    try {
        out.profile.ratios = band_ratios(out.profile.centroids, spectrum, bands);
        out.brain_rate = brain_rate(out.profile.ratios, bands, mode);
    } catch (const DegenerateChannelError&) {
        out.brain_rate.reset();
    }
    return out;
}

TopoMap build_tensor(const Window& window, const BandScheme& bands, const Montage& montage, std::size_t grid_size) {
    const TopoMapper mapper(montage, window.channel_names(), grid_size);
    return mapper.build(window, bands);
}

void write_tensor_header(std::ostream& out, std::size_t grid, std::size_t bands, std::uint64_t count) {
    using namespace detail;
    write_magic(out, kTensorMagic);
    write_le<std::uint16_t>(out, kTensorVersion);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(grid));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bands));
    write_le<std::uint64_t>(out, count);
}

void write_tensor(std::ostream& out, const TopoMap& map) {
    const auto data = map.data();
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    } else {
        for (float v : data) detail::write_le<float>(out, v);
    }
}

TensorHeader read_tensor_header(std::istream& in) {
    using namespace detail;
    expect_magic(in, kTensorMagic, "tensor file");
    const auto version = read_le<std::uint16_t>(in, "tensor version");
    if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
    TensorHeader h;
    h.grid = read_le<std::uint16_t>(in, "grid");
    h.bands = read_le<std::uint16_t>(in, "bands");
    h.count = read_le<std::uint64_t>(in, "tensor count");
    if (h.grid == 0 || h.bands == 0) throw FormatError("tensor header declares an empty tensor");
    return h;
}

TopoMap read_tensor(std::istream& in, std::size_t grid, std::size_t bands) {
    TopoMap map(grid, bands);
    auto data = map.data();
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (in.gcount() != static_cast<std::streamsize>(data.size_bytes())) throw FormatError("truncated tensor data");
    for (auto& v : data) v = detail::byteswap_if_big(v);
    return map;
}

void save_tensors(const std::vector<TopoMap>& maps, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write tensor file " + path.string());
    const std::size_t grid = maps.empty() ? 32 : maps.front().grid();
    const std::size_t bands = maps.empty() ? 5 : maps.front().bands();
    write_tensor_header(out, grid, bands, maps.size());
    for (const auto& m : maps) {
        if (m.grid() != grid || m.bands() != bands) throw InvalidArgument("save_tensors: mixed tensor shapes");
        write_tensor(out, m);
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::vector<TopoMap> load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open tensor file " + path.string());
    const auto h = read_tensor_header(in);
    std::vector<TopoMap> maps;
    maps.reserve(h.count);
    for (std::uint64_t i = 0; i < h.count; ++i) maps.push_back(read_tensor(in, h.grid, h.bands));
    return maps;
}

} // namespace neurorate
