#include "neurorate/spectral.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "neurorate/error.hpp"

namespace neurorate {

namespace {

// FFTW planning is not thread-safe; execution with new-array interfaces is.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        std::vector<double> in(n);
        std::vector<fftw_complex> out(n / 2 + 1);
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                              FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr) throw Error("FFTW failed to create a plan for length " + std::to_string(n));
        plans_.emplace(n, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

std::vector<double> taper_weights(std::size_t n, Taper taper) {
    std::vector<double> w(n, 1.0);
    if (taper == Taper::Hann && n > 1) {
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
        }
    }
    return w;
}

} // namespace

BandScheme::BandScheme(std::vector<FrequencyBand> bands) : bands_(std::move(bands)) {
    if (bands_.empty()) throw InvalidArgument("band scheme: no bands");
    for (std::size_t b = 0; b < bands_.size(); ++b) {
        const auto& band = bands_[b];
        if (!(band.low >= 0.0) || !(band.high > band.low)) {
            throw InvalidArgument("band scheme: band '" + band.name + "' must satisfy 0 <= low < high");
        }
        if (b > 0 && band.low < bands_[b - 1].high) {
            throw InvalidArgument("band scheme: bands must be ascending and non-overlapping");
        }
    }
}

const BandScheme& BandScheme::canonical() {
    static const BandScheme scheme({{"delta", 0.5, 4.0},
                                    {"theta", 4.0, 8.0},
                                    {"alpha", 8.0, 12.0},
                                    {"beta", 12.0, 30.0},
                                    {"gamma", 30.0, 45.0}});
    return scheme;
}

std::vector<double> BandScheme::mean_frequencies() const {
    std::vector<double> f;
    f.reserve(bands_.size());
    for (const auto& b : bands_) f.push_back(b.mean_frequency());
    return f;
}

bool BandScheme::in_any_band(double f) const noexcept {
    for (const auto& b : bands_) {
        if (b.contains(f)) return true;
    }
    return false;
}

bool operator==(const BandScheme& a, const BandScheme& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].low != b[i].low || a[i].high != b[i].high) return false;
    }
    return true;
}

PowerSpectrum power_spectrum(const SampleMatrix& samples, double sample_rate, Taper taper) {
    const auto n = static_cast<std::size_t>(samples.cols());
    if (n < 2) throw InvalidArgument("power_spectrum: window width must be >= 2");
    if (!(sample_rate > 0.0)) throw InvalidArgument("power_spectrum: sample rate must be > 0");

    const std::size_t bins = n / 2 + 1;
    PowerSpectrum spec;
    spec.sample_rate = sample_rate;
    spec.window_length = n;
    spec.frequencies.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) spec.frequencies[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    spec.amplitudes.resize(samples.rows(), static_cast<Eigen::Index>(bins));

    const auto weights = taper_weights(n, taper);
    double gain = 0.0;
    for (double w : weights) gain += w;

    fftw_plan plan = plan_cache().get(n);
    std::vector<double> in(n);
    std::vector<fftw_complex> out(bins);
    for (Eigen::Index c = 0; c < samples.rows(); ++c) {
        for (std::size_t i = 0; i < n; ++i) in[i] = samples(c, static_cast<Eigen::Index>(i)) * weights[i];
        fftw_execute_dft_r2c(plan, in.data(), out.data());
        for (std::size_t k = 0; k < bins; ++k) {
            const double mag = std::hypot(out[k][0], out[k][1]);
            const bool paired = k != 0 && !(n % 2 == 0 && k == n / 2);
            spec.amplitudes(c, static_cast<Eigen::Index>(k)) = (paired ? 2.0 : 1.0) * mag / gain;
        }
    }
    return spec;
}

PowerSpectrum power_spectrum(const Window& window, Taper taper) {
    return power_spectrum(window.samples(), window.sample_rate(), taper);
}

BandMatrix band_centroids(const PowerSpectrum& spectrum, const BandScheme& bands) {
    const auto channels = static_cast<Eigen::Index>(spectrum.channel_count());
    BandMatrix c = BandMatrix::Zero(static_cast<Eigen::Index>(bands.size()), channels);
    for (std::size_t b = 0; b < bands.size(); ++b) {
        std::size_t count = 0;
        for (std::size_t k = 1; k < spectrum.bin_count(); ++k) {
            if (!bands[b].contains(spectrum.frequencies[k])) continue;
            ++count;
            for (Eigen::Index ch = 0; ch < channels; ++ch) {
                c(static_cast<Eigen::Index>(b), ch) += spectrum.amplitudes(ch, static_cast<Eigen::Index>(k));
            }
        }
        if (count == 0) {
            throw InvalidArgument("band '" + bands[b].name + "' contains no frequency bins at spacing " +
                                  std::to_string(spectrum.bin_spacing()) + " Hz");
        }
        c.row(static_cast<Eigen::Index>(b)) /= static_cast<double>(count);
    }
    return c;
}

BandMatrix band_ratios(const BandMatrix& centroids, const PowerSpectrum& spectrum, const BandScheme& bands) {
    const auto channels = static_cast<Eigen::Index>(spectrum.channel_count());
    if (centroids.rows() != static_cast<Eigen::Index>(bands.size()) || centroids.cols() != channels) {
        throw InvalidArgument("band_ratios: centroid matrix shape does not match spectrum and bands");
    }
    Eigen::VectorXd total = Eigen::VectorXd::Zero(channels);
    std::size_t count = 0;
    for (std::size_t k = 1; k < spectrum.bin_count(); ++k) {
        if (!bands.in_any_band(spectrum.frequencies[k])) continue;
        ++count;
        for (Eigen::Index ch = 0; ch < channels; ++ch) total(ch) += spectrum.amplitudes(ch, static_cast<Eigen::Index>(k));
    }
    if (count == 0) throw InvalidArgument("band_ratios: no in-band bins");

    BandMatrix p(centroids.rows(), channels);
    for (Eigen::Index ch = 0; ch < channels; ++ch) {
        const double avg = total(ch) / static_cast<double>(count);
        if (!(avg > 0.0)) {
            throw DegenerateChannelError("channel " + std::to_string(ch) +
                                         " has zero in-band mean amplitude; band ratios are undefined");
        }
        p.col(ch) = centroids.col(ch) / avg;
    }
    return p;
}

std::string_view to_string(Aggregation mode) noexcept { return mode == Aggregation::Sum ? "sum" : "mean"; }

Aggregation parse_aggregation(std::string_view text) {
    if (text == "sum") return Aggregation::Sum;
    if (text == "mean") return Aggregation::Mean;
    throw InvalidArgument("unknown aggregation mode '" + std::string(text) + "' (expected sum or mean)");
}

BrainRate brain_rate(const BandMatrix& ratios, const BandScheme& bands, Aggregation mode) {
    if (ratios.rows() != static_cast<Eigen::Index>(bands.size()) || ratios.cols() == 0) {
        throw InvalidArgument("brain_rate: ratio matrix shape does not match the band scheme");
    }
    if (!ratios.allFinite()) throw InvalidArgument("brain_rate: non-finite band ratio");
    const auto f = bands.mean_frequencies();
    double total = 0.0;
    for (Eigen::Index ch = 0; ch < ratios.cols(); ++ch) {
        for (Eigen::Index b = 0; b < ratios.rows(); ++b) total += f[static_cast<std::size_t>(b)] * ratios(b, ch);
    }
    if (mode == Aggregation::Mean) total /= static_cast<double>(ratios.cols());
    return {total, mode};
}

BandProfile band_profile(const PowerSpectrum& spectrum, const BandScheme& bands) {
    BandProfile profile;
    profile.centroids = band_centroids(spectrum, bands);
    profile.ratios = band_ratios(profile.centroids, spectrum, bands);
    return profile;
}

BrainRate window_brain_rate(const Window& window, const BandScheme& bands, Aggregation mode, Taper taper) {
    const auto spectrum = power_spectrum(window, taper);
    return brain_rate(band_profile(spectrum, bands).ratios, bands, mode);
}

} // namespace neurorate
