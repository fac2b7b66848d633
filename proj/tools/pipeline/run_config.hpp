#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurorate/dataset.hpp"
#include "neurorate/neuralnet.hpp"
#include "neurorate/synthetic.hpp"
#include "neurorate/training.hpp"

namespace neurorate::cli {

/// Every setting of a pipeline run. Defaults reproduce the canonical
/// pipeline, so an empty file is a valid configuration.
struct RunConfig {
    std::filesystem::path recordings;  // empty: <out>/recordings
    std::filesystem::path montage;     // empty: built-in 10-20 layout
    std::filesystem::path out = "neurorate_out";

    CorpusConfig synth;
    double sample_rate = 128.0;  // expected rate of every recording
    BandScheme bands = BandScheme::canonical();
    WindowConfig window;
    Taper taper = Taper::Rectangular;
    std::size_t grid = 32;

    std::size_t z = kDefaultSequenceLength;
    Aggregation mode = Aggregation::Mean;
    ModelKind model = ModelKind::WithinSubject;
    std::size_t participants = 1;
    std::size_t repetition = 0;

    Architecture network;  // grid, bands and z are kept in sync with the fields above
    TrainConfig train;
    std::vector<std::size_t> batch_study_sizes{32, 100};

    std::uint64_t seed = 0;
    std::size_t threads = 1;

    [[nodiscard]] std::filesystem::path recordings_dir() const { return recordings.empty() ? out / "recordings" : recordings; }
    [[nodiscard]] Montage load_montage() const;
    [[nodiscard]] FeatureConfig features() const;
    [[nodiscard]] ExperimentPlan plan() const;

    /// Copies seed, threads and shapes into the nested configs.
    void sync();
    /// Throws InvalidArgument on inconsistent values or an unreadable montage.
    void validate() const;
};

/// Sectioned key-value text. Unknown sections or keys are errors.
[[nodiscard]] RunConfig parse_run_config(const std::string& text);
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its effective value in a fixed order; the manifest hashes it.
[[nodiscard]] std::string canonical_text(const RunConfig& config);

} // namespace neurorate::cli
