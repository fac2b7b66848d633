#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "neurorate/signal_io.hpp"
#include "neurorate/windowing.hpp"

namespace neurorate {

/// Row-major matrix indexed [band, channel].
using BandMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Half-open frequency interval [low, high) in Hz.
struct FrequencyBand {
    std::string name;
    double low = 0.0;
    double high = 0.0;

    [[nodiscard]] double mean_frequency() const noexcept { return 0.5 * (low + high); }
    [[nodiscard]] bool contains(double f) const noexcept { return low <= f && f < high; }
};

class BandScheme {
public:
    /// Throws InvalidArgument unless bands are non-empty, ascending and non-overlapping.
    explicit BandScheme(std::vector<FrequencyBand> bands);

    /// delta [0.5,4), theta [4,8), alpha [8,12), beta [12,30), gamma [30,45).
    [[nodiscard]] static const BandScheme& canonical();

    [[nodiscard]] std::size_t size() const noexcept { return bands_.size(); }
    [[nodiscard]] const FrequencyBand& operator[](std::size_t b) const { return bands_[b]; }
    [[nodiscard]] const std::vector<FrequencyBand>& bands() const noexcept { return bands_; }
    [[nodiscard]] std::vector<double> mean_frequencies() const;
    [[nodiscard]] bool in_any_band(double f) const noexcept;

    friend bool operator==(const BandScheme& a, const BandScheme& b);

private:
    std::vector<FrequencyBand> bands_;
};

enum class Taper { Rectangular, Hann };

/// One-sided amplitude spectrum per channel. A bin-aligned sinusoid of
/// amplitude A shows up as A in its bin.
struct PowerSpectrum {
    double sample_rate = 0.0;
    std::size_t window_length = 0;
    std::vector<double> frequencies;  // N/2 + 1 bins including DC
    BandMatrix amplitudes;            // [channel, bin]

    [[nodiscard]] double bin_spacing() const noexcept {
        return sample_rate / static_cast<double>(window_length);
    }
    [[nodiscard]] std::size_t channel_count() const noexcept { return static_cast<std::size_t>(amplitudes.rows()); }
    [[nodiscard]] std::size_t bin_count() const noexcept { return frequencies.size(); }
};

/// FFT of every channel of a [channel x time] block.
[[nodiscard]] PowerSpectrum power_spectrum(const SampleMatrix& samples, double sample_rate,
                                           Taper taper = Taper::Rectangular);
[[nodiscard]] PowerSpectrum power_spectrum(const Window& window, Taper taper = Taper::Rectangular);

/// Band centroid C[b, ch]: arithmetic mean of the amplitudes whose bin
/// frequency lies in band b (DC is never included).
[[nodiscard]] BandMatrix band_centroids(const PowerSpectrum& spectrum, const BandScheme& bands);

/// P[b, ch] = C[b, ch] / mean amplitude over all bins inside the union of
/// the bands. Throws DegenerateChannelError when that mean is zero.
[[nodiscard]] BandMatrix band_ratios(const BandMatrix& centroids, const PowerSpectrum& spectrum,
                                     const BandScheme& bands);

enum class Aggregation { Sum, Mean };

[[nodiscard]] std::string_view to_string(Aggregation mode) noexcept;
/// Accepts "sum" or "mean".
[[nodiscard]] Aggregation parse_aggregation(std::string_view text);

struct BrainRate {
    double value = 0.0;  // Hz
    Aggregation mode = Aggregation::Mean;
};

/// Sum over channels and bands of f_b * P[b, ch]; mean mode divides by the
/// channel count.
[[nodiscard]] BrainRate brain_rate(const BandMatrix& ratios, const BandScheme& bands, Aggregation mode);

struct BandProfile {
    BandMatrix centroids;
    BandMatrix ratios;
};

[[nodiscard]] BandProfile band_profile(const PowerSpectrum& spectrum, const BandScheme& bands);

/// power_spectrum -> band_centroids -> band_ratios -> brain_rate.
[[nodiscard]] BrainRate window_brain_rate(const Window& window, const BandScheme& bands, Aggregation mode,
                                          Taper taper = Taper::Rectangular);

} // namespace neurorate
