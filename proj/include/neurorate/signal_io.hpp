#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace neurorate {

/// Row-major [channel x time] sample matrix in microvolts.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] double norm() const noexcept;
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Electrode positions on the unit sphere. Head frame: +x through the
/// nasion, +y toward the left ear, +z through the vertex.
class Montage {
public:
    struct Electrode {
        std::string label;
        Vec3 position;
    };

    Montage() = default;

    /// Normalizes every coordinate; throws InvalidArgument on duplicate
    /// labels or zero-length coordinates.
    explicit Montage(std::vector<Electrode> electrodes);

    [[nodiscard]] std::size_t size() const noexcept { return electrodes_.size(); }
    [[nodiscard]] const std::vector<Electrode>& electrodes() const noexcept { return electrodes_; }
    [[nodiscard]] bool contains(std::string_view label) const;
    /// Throws InvalidArgument for unknown labels.
    [[nodiscard]] const Vec3& position(std::string_view label) const;

    /// Restriction to the given labels, in that order.
    [[nodiscard]] Montage subset(std::span<const std::string> labels) const;

private:
    std::vector<Electrode> electrodes_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// The 32 channels retained from the DEAP recordings, in recording order.
[[nodiscard]] const std::vector<std::string>& deap_channel_labels();

/// Built-in 32-electrode 10-20 montage (same content as data/montage_1020_32.txt).
[[nodiscard]] const Montage& default_montage();

[[nodiscard]] Montage parse_montage(std::string_view text);
[[nodiscard]] Montage load_montage(const std::filesystem::path& path);
void save_montage(const Montage& montage, const std::filesystem::path& path);

struct EegRecording {
    double sample_rate = 0.0;
    std::vector<std::string> channel_names;
    SampleMatrix samples;
    std::string participant_id;
    std::string trial_id;

    [[nodiscard]] std::size_t channel_count() const noexcept { return static_cast<std::size_t>(samples.rows()); }
    [[nodiscard]] std::size_t sample_count() const noexcept { return static_cast<std::size_t>(samples.cols()); }
    [[nodiscard]] double duration() const noexcept { return static_cast<double>(sample_count()) / sample_rate; }

    /// Checks every type invariant against `montage`; throws InvalidArgument.
    void validate(const Montage& montage) const;
};

/// Reads an "EEGR" recording. The trial id is taken from the file stem and
/// the participant id from the parent directory name.
[[nodiscard]] EegRecording load_recording(const std::filesystem::path& path, double expected_rate,
                                          const Montage& montage = default_montage());

/// Samples are written as f32; a recording read from a canonical file is
/// written back byte-identically.
void save_recording(const EegRecording& recording, const std::filesystem::path& path);

struct SineComponent {
    double frequency = 0.0;  // Hz
    double amplitude = 0.0;  // µV
    double phase = 0.0;      // rad
};

struct SynthSpec {
    double duration = 0.0;     // s
    double sample_rate = 0.0;  // Hz
    std::vector<std::string> channel_names;
    std::vector<std::vector<SineComponent>> components;  // one list per channel
    double noise_std = 0.0;    // µV
    std::uint64_t seed = 0;
    std::string participant_id = "synthetic";
    std::string trial_id = "trial";

    void validate() const;
};

/// Sum of sinusoids plus i.i.d. Gaussian noise, deterministic in `spec.seed`.
/// Sample n is taken at t = n / sample_rate.
[[nodiscard]] EegRecording synthesize(const SynthSpec& spec);

} // namespace neurorate
