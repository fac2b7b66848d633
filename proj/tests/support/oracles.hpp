// Brute-force reference computations used only by the tests. Nothing here
// calls into the library's numerical code paths.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

/// Direct O(N^2) DFT, one-sided amplitudes scaled so a bin-aligned sinusoid
/// of amplitude A reads A.
inline std::vector<double> dft_amplitudes(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> out(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        long double re = 0.0L, im = 0.0L;
        for (std::size_t t = 0; t < n; ++t) {
            const long double angle = 2.0L * std::numbers::pi_v<long double> *
                                      static_cast<long double>((k * t) % n) / static_cast<long double>(n);
            re += static_cast<long double>(x[t]) * std::cos(angle);
            im -= static_cast<long double>(x[t]) * std::sin(angle);
        }
        const double mag = static_cast<double>(std::sqrt(re * re + im * im));
        const bool paired = k != 0 && !(n % 2 == 0 && k == n / 2);
        out[k] = (paired ? 2.0 : 1.0) * mag / static_cast<double>(n);
    }
    return out;
}

struct Band {
    double low;
    double high;
};

inline const std::vector<Band>& canonical_bands() {
    static const std::vector<Band> b = {{0.5, 4.0}, {4.0, 8.0}, {8.0, 12.0}, {12.0, 30.0}, {30.0, 45.0}};
    return b;
}

/// Brain rate by direct DFT, direct band averaging and the weighted sum,
/// for channels given as separate sample vectors.
inline double brain_rate(const std::vector<std::vector<double>>& channels, double rate, bool mean_mode) {
    const auto& bands = canonical_bands();
    double total = 0.0;
    for (const auto& x : channels) {
        const auto amp = dft_amplitudes(x);
        const double df = rate / static_cast<double>(x.size());
        double all_sum = 0.0;
        std::size_t all_n = 0;
        std::vector<double> band_sum(bands.size(), 0.0);
        std::vector<std::size_t> band_n(bands.size(), 0);
        for (std::size_t k = 1; k < amp.size(); ++k) {
            const double f = static_cast<double>(k) * df;
            for (std::size_t b = 0; b < bands.size(); ++b) {
                if (f >= bands[b].low && f < bands[b].high) {
                    band_sum[b] += amp[k];
                    ++band_n[b];
                    all_sum += amp[k];
                    ++all_n;
                }
            }
        }
        const double avg = all_sum / static_cast<double>(all_n);
        for (std::size_t b = 0; b < bands.size(); ++b) {
            const double fb = 0.5 * (bands[b].low + bands[b].high);
            total += fb * (band_sum[b] / static_cast<double>(band_n[b])) / avg;
        }
    }
    return mean_mode ? total / static_cast<double>(channels.size()) : total;
}

/// All window start offsets s with s + length <= total and s a multiple of shift.
inline std::size_t enumerate_windows(std::size_t total, std::size_t length, std::size_t shift) {
    std::size_t count = 0;
    for (std::size_t s = 0; s + length <= total; ++s) {
        if (s % shift == 0) ++count;
    }
    return count;
}

} // namespace oracle
