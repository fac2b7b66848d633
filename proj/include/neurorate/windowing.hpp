#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "neurorate/signal_io.hpp"

namespace neurorate {

struct WindowConfig {
    double length_s = 2.0;    // k
    double shift_ms = 125.0;  // w

    /// Throws InvalidArgument unless the length is a positive integer number of samples.
    [[nodiscard]] std::size_t length_samples(double sample_rate) const;
    /// Throws InvalidArgument unless the shift is a positive integer number of samples.
    [[nodiscard]] std::size_t shift_samples(double sample_rate) const;
};

/// A fixed-width view into a recording. The recording must outlive the window.
class Window {
public:
    Window(const EegRecording& source, std::size_t start_index, std::size_t width);

    [[nodiscard]] std::size_t start_index() const noexcept { return start_; }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t channel_count() const noexcept { return source_->channel_count(); }
    [[nodiscard]] double sample_rate() const noexcept { return source_->sample_rate; }
    [[nodiscard]] const std::vector<std::string>& channel_names() const noexcept { return source_->channel_names; }
    [[nodiscard]] const std::string& trial_id() const noexcept { return source_->trial_id; }
    [[nodiscard]] const std::string& participant_id() const noexcept { return source_->participant_id; }

    [[nodiscard]] std::span<const double> channel(std::size_t c) const;
    /// Deterministic copy of the viewed samples.
    [[nodiscard]] SampleMatrix samples() const;

private:
    const EegRecording* source_;
    std::size_t start_;
    std::size_t width_;
};

/// Number of full windows: floor((total - length) / shift) + 1, or 0 when total < length.
[[nodiscard]] std::size_t window_count(std::size_t total_samples, std::size_t length, std::size_t shift);

/// Windows start at 0 and advance by the shift; every window lies fully
/// inside the recording.
[[nodiscard]] std::vector<Window> segment(const EegRecording& recording, const WindowConfig& config);

} // namespace neurorate
