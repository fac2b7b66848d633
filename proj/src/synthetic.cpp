#include "neurorate/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "neurorate/error.hpp"
#include "neurorate/rng.hpp"

namespace neurorate {

namespace {

constexpr std::size_t kCarriersPerBand = 2;

// Roughly 1/f amplitudes, repeated for schemes with more than five bands.
double base_amplitude(std::size_t band) {
    static constexpr double amps[] = {8.0, 5.0, 6.0, 3.0, 1.5};
    return amps[band % 5];
}

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

} // namespace

std::string participant_label(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%02zu", index + 1);
    return buf;
}

std::string video_label(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "v%02zu", index + 1);
    return buf;
}

SynthSpec synthetic_trial_spec(const CorpusConfig& config, std::size_t participant, std::size_t video,
                               const Montage& montage) {
    if (config.participants == 0 || config.videos == 0) throw InvalidArgument("corpus needs at least one participant and video");
    if (participant >= config.participants || video >= config.videos) throw InvalidArgument("corpus index out of range");

    SynthSpec spec;
    spec.duration = config.duration_s;
    spec.sample_rate = config.sample_rate;
    spec.noise_std = config.noise_std;
    spec.seed = derive_seed(config.seed, {participant, video, 1});
    spec.participant_id = participant_label(participant);
    spec.trial_id = video_label(video);
    for (const auto& e : montage.electrodes()) spec.channel_names.push_back(e.label);
    spec.components.resize(spec.channel_names.size());

    // Scalp gradients are a trait of the participant; envelopes change per video.
    Rng person(derive_seed(config.seed, {participant, 0}));
    Rng trial(derive_seed(config.seed, {participant, video, 2}));
    const double nyquist = config.sample_rate / 2.0;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    for (std::size_t b = 0; b < config.bands.size(); ++b) {
        const auto& band = config.bands[b];
        const Vec3 dir{uniform(person, -1, 1), uniform(person, -1, 1), uniform(person, -1, 1)};
        const double tilt = uniform(person, 0.2, 0.6);
        const double level = base_amplitude(b) * uniform(person, 0.7, 1.3);

        const double mod_freq = uniform(trial, 0.03, 0.15);
        const double depth = uniform(trial, 0.4, 0.9);
        const double mod_phase = uniform(trial, 0.0, two_pi);

        for (std::size_t k = 0; k < kCarriersPerBand; ++k) {
            const double hi = std::min(band.high, nyquist);
            const double margin = std::min(0.5, 0.25 * (hi - band.low));
            const double carrier = uniform(trial, band.low + margin, hi - margin);
            const double phase = uniform(trial, 0.0, two_pi);
            const double share = 1.0 / static_cast<double>(kCarriersPerBand);
            for (std::size_t c = 0; c < spec.channel_names.size(); ++c) {
                const auto& p = montage.position(spec.channel_names[c]);
                const double gain = 1.0 + tilt * (dir.x * p.x + dir.y * p.y + dir.z * p.z) / std::sqrt(3.0);
                const double amp = level * share * gain;
                // amp (1 + depth cos(wm t + pm)) sin(wc t + pc) as three sinusoids.
                auto& list = spec.components[c];
                list.push_back({carrier, amp, phase});
                const double side = 0.5 * amp * depth;
                if (carrier + mod_freq < nyquist) list.push_back({carrier + mod_freq, side, phase + mod_phase});
                if (carrier - mod_freq > 0.0) list.push_back({carrier - mod_freq, side, phase - mod_phase});
            }
        }
    }
    return spec;
}

EegRecording synthetic_trial(const CorpusConfig& config, std::size_t participant, std::size_t video,
                             const Montage& montage) {
    return synthesize(synthetic_trial_spec(config, participant, video, montage));
}

std::vector<std::filesystem::path> write_corpus(const CorpusConfig& config, const std::filesystem::path& root,
                                                const Montage& montage) {
    std::vector<std::filesystem::path> paths;
    for (std::size_t p = 0; p < config.participants; ++p) {
        const auto dir = root / participant_label(p);
        std::filesystem::create_directories(dir);
        for (std::size_t v = 0; v < config.videos; ++v) {
            const auto path = dir / (video_label(v) + ".eegr");
            save_recording(synthetic_trial(config, p, v, montage), path);
            paths.push_back(path);
        }
    }
    return paths;
}

} // namespace neurorate
