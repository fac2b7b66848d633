#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurorate/signal_io.hpp"
#include "neurorate/spectral.hpp"

namespace neurorate {

/// Stand-in corpus: every channel carries carriers in each band whose
/// amplitudes follow slow shared envelopes and a smooth per-band scalp
/// gradient, so the brain rate drifts over seconds and is spatially structured.
struct CorpusConfig {
    std::size_t participants = 1;
    std::size_t videos = 40;
    double duration_s = 63.0;
    double sample_rate = 128.0;
    double noise_std = 0.5;  // µV
    std::uint64_t seed = 0;
    BandScheme bands = BandScheme::canonical();
};

[[nodiscard]] std::string participant_label(std::size_t index);  // "s01"
[[nodiscard]] std::string video_label(std::size_t index);        // "v01"

/// Deterministic in (config.seed, participant, video).
[[nodiscard]] SynthSpec synthetic_trial_spec(const CorpusConfig& config, std::size_t participant, std::size_t video,
                                             const Montage& montage = default_montage());

[[nodiscard]] EegRecording synthetic_trial(const CorpusConfig& config, std::size_t participant, std::size_t video,
                                           const Montage& montage = default_montage());

/// Writes <root>/<participant>/<video>.eegr for the whole corpus and returns
/// the written paths in participant-major order.
std::vector<std::filesystem::path> write_corpus(const CorpusConfig& config, const std::filesystem::path& root,
                                                const Montage& montage = default_montage());

} // namespace neurorate
