#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "neurorate/error.hpp"

namespace neurorate::cli {

namespace {

constexpr long kMargin = 20;
constexpr Rgb kFrame{0, 0, 0};

void write_rows(const std::filesystem::path& path, std::size_t width, std::size_t height, int color_type,
                std::size_t bytes_per_pixel, const std::uint8_t* data) {
    std::unique_ptr<FILE, decltype(&std::fclose)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw Error("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(data + y * width * bytes_per_pixel));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

Image::Image(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), rgb(w * h * 3) {
    for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<long>(3 * i));
}

void Image::set(long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
    std::copy(c.begin(), c.end(), rgb.begin() + 3 * (y * static_cast<long>(width) + x));
}

void Image::line(long x0, long y0, long x1, long y1, Rgb c) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Image::rect(long x0, long y0, long x1, long y1, Rgb c) {
    for (long y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
        for (long x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
}

void write_png(const Image& image, const std::filesystem::path& path) {
    write_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.rgb.data());
}

void write_png_gray(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height,
                    const std::filesystem::path& path) {
    if (pixels.size() != width * height) throw InvalidArgument("grayscale image size does not match its pixels");
    write_rows(path, width, height, PNG_COLOR_TYPE_GRAY, 1, pixels.data());
}

void write_band_png(const TopoMap& map, std::size_t band, const std::filesystem::path& path, std::size_t scale) {
    if (band >= map.bands()) throw InvalidArgument("band index out of range");
    const std::size_t g = map.grid();
    float lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < g; ++r) {
        for (std::size_t c = 0; c < g; ++c) {
            lo = std::min(lo, map.at(r, c, band));
            hi = std::max(hi, map.at(r, c, band));
        }
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    const std::size_t side = g * scale;
    std::vector<std::uint8_t> px(side * side);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const float v = (map.at(y / scale, x / scale, band) - lo) / span;
            px[y * side + x] = static_cast<std::uint8_t>(std::lround(255.0f * v));
        }
    }
    write_png_gray(px, side, side, path);
}

Image line_plot(const std::vector<std::vector<double>>& series, const std::vector<Rgb>& colors, std::size_t width,
                std::size_t height) {
    Image img(width, height);
    const long w = static_cast<long>(width), h = static_cast<long>(height);
    double lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    for (const auto& s : series) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        n = std::max(n, s.size());
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const auto px = [&](std::size_t i) {
        return kMargin + static_cast<long>(std::lround(static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n - 1, 1)) *
                                                        static_cast<double>(w - 2 * kMargin)));
    };
    const auto py = [&](double v) {
        return h - kMargin - static_cast<long>(std::lround((v - lo) / (hi - lo) * static_cast<double>(h - 2 * kMargin)));
    };
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Rgb c = colors.at(k % colors.size());
        for (std::size_t i = 1; i < series[k].size(); ++i) {
            img.line(px(i - 1), py(series[k][i - 1]), px(i), py(series[k][i]), c);
        }
    }
    img.line(kMargin, kMargin, kMargin, h - kMargin, kFrame);
    img.line(kMargin, h - kMargin, w - kMargin, h - kMargin, kFrame);
    return img;
}

Image histogram(const std::vector<double>& values, std::size_t bins, Rgb color, std::size_t width, std::size_t height) {
    Image img(width, height);
    if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
    const long w = static_cast<long>(width), h = static_cast<long>(height);
    if (!values.empty()) {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        const double lo = *mn, span = *mx > *mn ? *mx - *mn : 1.0;
        std::vector<std::size_t> counts(bins, 0);
        for (double v : values) ++counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / span * static_cast<double>(bins)))];
        const double top = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
        const double bw = static_cast<double>(w - 2 * kMargin) / static_cast<double>(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const long x0 = kMargin + static_cast<long>(std::lround(static_cast<double>(b) * bw)) + 1;
            const long x1 = kMargin + static_cast<long>(std::lround(static_cast<double>(b + 1) * bw)) - 1;
            const long y1 = h - kMargin - static_cast<long>(std::lround(static_cast<double>(counts[b]) / top * static_cast<double>(h - 2 * kMargin)));
            if (counts[b] > 0) img.rect(x0, y1, x1, h - kMargin, color);
        }
    }
    img.line(kMargin, kMargin, kMargin, h - kMargin, kFrame);
    img.line(kMargin, h - kMargin, w - kMargin, h - kMargin, kFrame);
    return img;
}

} // namespace neurorate::cli
