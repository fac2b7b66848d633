#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurorate/spectral.hpp"
#include "neurorate/topomap.hpp"
#include "neurorate/windowing.hpp"

namespace neurorate {

inline constexpr std::size_t kDefaultSequenceLength = 7;  // z

/// z consecutive maps of one trial and the brain rate of the window after them.
struct SequenceSample {
    std::vector<TopoMap> inputs;
    BrainRate target;
    std::string participant_id;
    std::string trial_id;
    std::size_t start_window = 0;

    [[nodiscard]] std::size_t target_window() const noexcept { return start_window + inputs.size(); }
};

/// Sequences per trial: windows - z. Throws InvalidArgument for z < 1 or
/// windows <= z.
[[nodiscard]] std::size_t sequence_count(std::size_t windows, std::size_t z);

[[nodiscard]] std::vector<SequenceSample> build_sequences(std::span<const TopoMap> maps,
                                                          std::span<const BrainRate> rates,
                                                          std::size_t z = kDefaultSequenceLength);

/// Whole-video split of one participant.
struct SplitPlan {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

/// Validation and test each get round(15%) of the videos (at least one),
/// training the rest: 40 videos -> 28/6/6. Needs at least 3 videos.
[[nodiscard]] SplitPlan split_videos(std::vector<std::string> video_ids, std::uint64_t seed);

enum class ModelKind { WithinSubject, AcrossSubject };

[[nodiscard]] std::string_view to_string(ModelKind kind) noexcept;
[[nodiscard]] ModelKind parse_model_kind(std::string_view text);

struct ExperimentPlan {
    ModelKind kind = ModelKind::WithinSubject;
    std::size_t participants = 1;
    std::size_t repetitions = 2;
    std::uint64_t seed = 0;

    /// Default repetitions: 2 within-subject, 10 across-subject.
    [[nodiscard]] static ExperimentPlan make(ModelKind kind, std::size_t participants, std::uint64_t seed);
    void validate() const;
};

/// Window counts of one participant's trials, enough to plan splits without
/// computing any maps.
struct ParticipantIndex {
    std::string participant_id;
    std::vector<std::string> videos;
    std::vector<std::size_t> windows;  // per video
};

struct SequenceKey {
    std::string participant_id;
    std::string trial_id;
    std::size_t start_window = 0;

    friend bool operator==(const SequenceKey&, const SequenceKey&) = default;
};

struct AssembledSplit {
    std::vector<std::string> participants;  // chosen for this repetition
    std::vector<SplitPlan> plans;           // one per chosen participant
    std::vector<SequenceKey> train;
    std::vector<SequenceKey> validation;
    std::vector<SequenceKey> test;

    [[nodiscard]] std::size_t total() const noexcept { return train.size() + validation.size() + test.size(); }
};

/// Draws plan.participants participants for the given repetition and
/// concatenates their per-participant video splits, in temporal order within
/// each trial. Throws InvalidArgument when too few participants are available.
[[nodiscard]] AssembledSplit assemble(const ExperimentPlan& plan, std::span<const ParticipantIndex> available,
                                      std::size_t repetition, std::size_t z = kDefaultSequenceLength);

/// Throws InvalidArgument when any test or validation sequence shares a
/// (participant, video) pair with a training sequence, or validation with test.
void check_no_leakage(const AssembledSplit& split);

/// Closed-form sizes for `participants` people with identical trials.
struct SplitCounts {
    std::size_t total = 0;
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;

    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};
[[nodiscard]] SplitCounts expected_counts(std::size_t participants, std::size_t videos, std::size_t windows_per_video,
                                          std::size_t z = kDefaultSequenceLength);

/// Maps and brain rates of every window of one trial.
struct TrialFeatures {
    std::string participant_id;
    std::string trial_id;
    std::vector<TopoMap> maps;
    std::vector<BrainRate> rates;
};

struct FeatureConfig {
    WindowConfig window;
    BandScheme bands = BandScheme::canonical();
    Aggregation mode = Aggregation::Mean;
    Taper taper = Taper::Rectangular;
    std::size_t grid = 32;
    std::size_t threads = 1;
};

/// Throws DegenerateChannelError (naming the trial and window) when a window's
/// brain rate is undefined.
[[nodiscard]] TrialFeatures compute_features(const EegRecording& recording, const TopoMapper& mapper,
                                             const FeatureConfig& config);

struct SequenceRecord {
    std::string participant_id;
    std::string trial_id;
    std::uint32_t start_window = 0;
    std::uint64_t first_map = 0;  // index into the map pool
    float target = 0.0f;          // Hz
};

struct DatasetHeader {
    std::uint32_t z = kDefaultSequenceLength;
    std::uint16_t grid = 32;
    std::uint16_t bands = 5;
    Aggregation mode = Aggregation::Mean;
    std::uint64_t map_count = 0;
    std::uint64_t record_count = 0;
};

/// Sequences over a pool of maps: record i reads maps
/// [first_map, first_map + z) and targets the brain rate after them. Sequences
/// of one trial share the trial's maps.
class SequenceDataset {
public:
    SequenceDataset() = default;
    SequenceDataset(std::size_t z, std::size_t grid, std::size_t bands, Aggregation mode);

    [[nodiscard]] std::size_t z() const noexcept { return z_; }
    [[nodiscard]] std::size_t grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t bands() const noexcept { return bands_; }
    [[nodiscard]] Aggregation mode() const noexcept { return mode_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }

    [[nodiscard]] const std::vector<SequenceRecord>& records() const noexcept { return records_; }
    [[nodiscard]] const std::vector<TopoMap>& pool() const noexcept { return pool_; }
    [[nodiscard]] std::span<const TopoMap> inputs(std::size_t i) const;
    [[nodiscard]] double target(std::size_t i) const { return records_.at(i).target; }
    [[nodiscard]] std::vector<double> targets() const;
    [[nodiscard]] SequenceSample sample(std::size_t i) const;

    /// Appends the sequences starting at `starts` (all if empty). Throws
    /// InvalidArgument on a shape or aggregation-mode mismatch.
    void add_trial(const TrialFeatures& features, std::span<const std::size_t> starts = {});

    /// Appends one record with its own copy of the inputs.
    void add(const SequenceSample& sample);

    [[nodiscard]] DatasetHeader header() const;

    void save(const std::filesystem::path& path) const;
    [[nodiscard]] static SequenceDataset load(const std::filesystem::path& path);

private:
    void check(const TopoMap& map) const;

    std::size_t z_ = kDefaultSequenceLength;
    std::size_t grid_ = 32;
    std::size_t bands_ = 5;
    Aggregation mode_ = Aggregation::Mean;
    std::vector<TopoMap> pool_;
    std::vector<SequenceRecord> records_;
};

/// Streams a dataset file trial by trial without holding the map pool in
/// memory; counts are patched into the header on finish().
class DatasetWriter {
public:
    DatasetWriter(const std::filesystem::path& path, std::size_t z, std::size_t grid, std::size_t bands,
                  Aggregation mode);
    ~DatasetWriter();
    DatasetWriter(const DatasetWriter&) = delete;
    DatasetWriter& operator=(const DatasetWriter&) = delete;

    void add_trial(const TrialFeatures& features, std::span<const std::size_t> starts = {});
    [[nodiscard]] std::size_t record_count() const noexcept { return records_.size(); }
    void finish();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    DatasetHeader header_;
    std::vector<SequenceRecord> records_;
    std::streampos counts_at_{};
    bool finished_ = false;
};

[[nodiscard]] DatasetHeader read_dataset_header(const std::filesystem::path& path);

} // namespace neurorate
