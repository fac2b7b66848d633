#include "neurorate/windowing.hpp"

#include <cmath>

#include "neurorate/error.hpp"

namespace neurorate {

namespace {

std::size_t exact_samples(double value, const char* what) {
    const double r = std::round(value);
    if (!(r >= 1.0) || std::abs(value - r) > 1e-9 * std::max(1.0, std::abs(value))) {
        throw InvalidArgument(std::string("window ") + what + " is not a positive integer number of samples (" +
                              std::to_string(value) + ")");
    }
    return static_cast<std::size_t>(r);
}

} // namespace

std::size_t WindowConfig::length_samples(double sample_rate) const {
    return exact_samples(length_s * sample_rate, "length");
}

std::size_t WindowConfig::shift_samples(double sample_rate) const {
    return exact_samples(shift_ms * sample_rate / 1000.0, "shift");
}

Window::Window(const EegRecording& source, std::size_t start_index, std::size_t width)
    : source_(&source), start_(start_index), width_(width) {
    if (width == 0 || start_index + width > source.sample_count()) {
        throw InvalidArgument("window exceeds the recording bounds");
    }
}

std::span<const double> Window::channel(std::size_t c) const {
    const double* row = source_->samples.data() + c * source_->sample_count();
    return {row + start_, width_};
}

SampleMatrix Window::samples() const {
    return source_->samples.middleCols(static_cast<Eigen::Index>(start_), static_cast<Eigen::Index>(width_));
}

std::size_t window_count(std::size_t total_samples, std::size_t length, std::size_t shift) {
    if (length == 0 || shift == 0) throw InvalidArgument("window length and shift must be positive");
    if (total_samples < length) return 0;
    return (total_samples - length) / shift + 1;
}

std::vector<Window> segment(const EegRecording& recording, const WindowConfig& config) {
    const std::size_t length = config.length_samples(recording.sample_rate);
    const std::size_t shift = config.shift_samples(recording.sample_rate);
    const std::size_t count = window_count(recording.sample_count(), length, shift);
    if (count == 0) {
        throw InvalidArgument("recording of " + std::to_string(recording.sample_count()) +
                              " samples is shorter than one window (" + std::to_string(length) + ")");
    }
    std::vector<Window> windows;
    windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) windows.emplace_back(recording, i * shift, length);
    return windows;
}

} // namespace neurorate
