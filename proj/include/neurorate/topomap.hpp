#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neurorate/clough_tocher.hpp"
#include "neurorate/geometry.hpp"
#include "neurorate/signal_io.hpp"
#include "neurorate/spectral.hpp"
#include "neurorate/windowing.hpp"

namespace neurorate {

/// Electrode positions after azimuthal equidistant projection from the vertex.
struct ProjectedLayout {
    std::vector<std::string> labels;
    std::vector<Point2> points;  // (theta cos phi, theta sin phi), theta in radians

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
    [[nodiscard]] double max_radius() const noexcept;
};

/// Polar angle theta from +z becomes the map radius. Throws InvalidArgument
/// for an electrode at the antipode of the vertex.
[[nodiscard]] ProjectedLayout project(const Montage& montage);
[[nodiscard]] Point2 project_point(const Vec3& unit);

/// Row-major G x G raster.
using GridMap = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Square raster frame [-R-m, R+m]^2 around a layout, m = 0.05 R. Row 0 is
/// the front of the head (+x), column 0 the left side (+y).
struct GridFrame {
    std::size_t size = 32;
    double half_extent = 0.0;

    [[nodiscard]] static GridFrame around(const ProjectedLayout& layout, std::size_t size);
    [[nodiscard]] Point2 pixel_center(std::size_t row, std::size_t col) const noexcept;
};

/// Clough-Tocher interpolation of one scalar per electrode onto the grid;
/// pixels outside the convex hull are 0.
[[nodiscard]] GridMap interpolate(const ProjectedLayout& layout, std::span<const double> values,
                                  std::size_t grid_size = 32);

/// One window's stacked band maps, stored [row][col][band] as f32.
class TopoMap {
public:
    TopoMap() = default;
    TopoMap(std::size_t grid, std::size_t bands);

    [[nodiscard]] std::size_t grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t bands() const noexcept { return bands_; }
    [[nodiscard]] float& at(std::size_t row, std::size_t col, std::size_t band) {
        return data_[(row * grid_ + col) * bands_ + band];
    }
    [[nodiscard]] float at(std::size_t row, std::size_t col, std::size_t band) const {
        return data_[(row * grid_ + col) * bands_ + band];
    }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
    [[nodiscard]] std::span<float> data() noexcept { return data_; }

    std::string participant_id;
    std::string trial_id;
    std::size_t window_start = 0;

    friend bool operator==(const TopoMap& a, const TopoMap& b) {
        return a.grid_ == b.grid_ && a.bands_ == b.bands_ && a.data_ == b.data_;
    }

private:
    std::size_t grid_ = 0;
    std::size_t bands_ = 0;
    std::vector<float> data_;
};

/// Everything computed from one window in a single spectral pass.
struct WindowFeatures {
    TopoMap map;
    BandProfile profile;
    std::optional<BrainRate> brain_rate;  // empty when a channel is degenerate
};

/// Projection, triangulation and pixel lookup for a fixed channel set,
/// shared read-only across windows.
class TopoMapper {
public:
    TopoMapper(const Montage& montage, std::vector<std::string> channels, std::size_t grid_size = 32);

    [[nodiscard]] const ProjectedLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const GridFrame& frame() const noexcept { return frame_; }
    [[nodiscard]] const CloughTocher& interpolator() const noexcept { return interpolator_; }
    [[nodiscard]] const std::vector<std::string>& channels() const noexcept { return layout_.labels; }

    /// `values` in channel order; outside-hull pixels are 0.
    [[nodiscard]] GridMap interpolate(std::span<const double> values) const;

    /// Band maps of precomputed centroids C[b, ch].
    [[nodiscard]] TopoMap build(const BandMatrix& centroids) const;

    /// power_spectrum -> band_centroids -> interpolate per band.
    [[nodiscard]] TopoMap build(const Window& window, const BandScheme& bands, Taper taper = Taper::Rectangular) const;

    [[nodiscard]] WindowFeatures process(const Window& window, const BandScheme& bands, Aggregation mode,
                                         Taper taper = Taper::Rectangular) const;

private:
    void check_channels(const Window& window) const;

    ProjectedLayout layout_;
    GridFrame frame_;
    CloughTocher interpolator_;
    std::vector<std::optional<CloughTocher::Location>> pixels_;
};

/// One-shot tensor for a window whose channels all exist in `montage`.
[[nodiscard]] TopoMap build_tensor(const Window& window, const BandScheme& bands, const Montage& montage,
                                   std::size_t grid_size = 32);

/// "TOPO" tensor stream: header then `count` tensors of grid*grid*bands f32.
void write_tensor_header(std::ostream& out, std::size_t grid, std::size_t bands, std::uint64_t count);
void write_tensor(std::ostream& out, const TopoMap& map);
struct TensorHeader {
    std::size_t grid = 0;
    std::size_t bands = 0;
    std::uint64_t count = 0;
};
[[nodiscard]] TensorHeader read_tensor_header(std::istream& in);
[[nodiscard]] TopoMap read_tensor(std::istream& in, std::size_t grid, std::size_t bands);

void save_tensors(const std::vector<TopoMap>& maps, const std::filesystem::path& path);
[[nodiscard]] std::vector<TopoMap> load_tensors(const std::filesystem::path& path);

} // namespace neurorate
