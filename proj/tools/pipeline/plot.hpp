#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "neurorate/topomap.hpp"

namespace neurorate::cli {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    Image(std::size_t w, std::size_t h, Rgb fill = {255, 255, 255});
    void set(long x, long y, Rgb c);
    void line(long x0, long y0, long x1, long y1, Rgb c);
    void rect(long x0, long y0, long x1, long y1, Rgb c);
};

void write_png(const Image& image, const std::filesystem::path& path);
/// 8-bit grayscale, row-major.
void write_png_gray(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height,
                    const std::filesystem::path& path);

/// One band of a map, min-max stretched and enlarged by `scale`.
void write_band_png(const TopoMap& map, std::size_t band, const std::filesystem::path& path, std::size_t scale = 8);

/// Polylines over a shared index axis and a shared value range, inside a frame.
[[nodiscard]] Image line_plot(const std::vector<std::vector<double>>& series, const std::vector<Rgb>& colors,
                              std::size_t width = 640, std::size_t height = 320);

/// Bar histogram of `values` with `bins` equal-width bins.
[[nodiscard]] Image histogram(const std::vector<double>& values, std::size_t bins, Rgb color,
                              std::size_t width = 480, std::size_t height = 320);

} // namespace neurorate::cli
