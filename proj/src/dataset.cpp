#include "neurorate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "neurorate/detail/binary_io.hpp"
#include "neurorate/detail/parallel.hpp"
#include "neurorate/error.hpp"
#include "neurorate/rng.hpp"

namespace neurorate {

namespace {

constexpr char kDatasetMagic[5] = "NRDS";
constexpr std::uint16_t kDatasetVersion = 1;

struct SplitSizes {
    std::size_t train, validation, test;
};

SplitSizes split_sizes(std::size_t videos) {
    if (videos < 3) throw InvalidArgument("a video-level split needs at least 3 videos, got " + std::to_string(videos));
    const auto held_out = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(videos))));
    const std::size_t train = videos - 2 * held_out;
    if (train == 0) return {1, 1, videos - 2};
    return {train, held_out, held_out};
}

std::vector<std::size_t> all_starts(std::size_t windows, std::size_t z) {
    std::vector<std::size_t> starts(sequence_count(windows, z));
    std::iota(starts.begin(), starts.end(), std::size_t{0});
    return starts;
}

// Map range [lo, hi) a trial contributes, and its records relative to lo.
struct TrialSlice {
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::vector<SequenceRecord> records;
};

TrialSlice slice_trial(const TrialFeatures& f, std::span<const std::size_t> starts, std::size_t z,
                       std::size_t grid, std::size_t bands, Aggregation mode) {
    if (f.maps.size() != f.rates.size()) throw InvalidArgument("trial " + f.trial_id + ": maps and rates are not aligned");
    const std::size_t n = sequence_count(f.maps.size(), z);
    for (const auto& m : f.maps) {
        if (m.grid() != grid || m.bands() != bands) throw InvalidArgument("trial " + f.trial_id + ": map shape does not match the dataset");
    }
    for (const auto& r : f.rates) {
        if (r.mode != mode) {
            throw InvalidArgument("trial " + f.trial_id + ": brain rate aggregated with '" + std::string(to_string(r.mode)) +
                                  "' in a '" + std::string(to_string(mode)) + "' dataset");
        }
    }
    std::vector<std::size_t> owned;
    if (starts.empty()) {
        owned = all_starts(f.maps.size(), z);
        starts = owned;
    }
    TrialSlice slice;
    slice.lo = *std::min_element(starts.begin(), starts.end());
    slice.hi = *std::max_element(starts.begin(), starts.end()) + z;
    for (auto s : starts) {
        if (s >= n) throw InvalidArgument("trial " + f.trial_id + ": sequence start " + std::to_string(s) + " has no target window");
        slice.records.push_back({f.participant_id, f.trial_id, static_cast<std::uint32_t>(s), s - slice.lo,
                                 static_cast<float>(f.rates[s + z].value)});
    }
    return slice;
}

void write_header(std::ostream& out, const DatasetHeader& h) {
    using namespace detail;
    write_magic(out, kDatasetMagic);
    write_le<std::uint16_t>(out, kDatasetVersion);
    write_le<std::uint32_t>(out, h.z);
    write_le<std::uint16_t>(out, h.grid);
    write_le<std::uint16_t>(out, h.bands);
    write_le<std::uint8_t>(out, h.mode == Aggregation::Sum ? 0 : 1);
}

void write_counts(std::ostream& out, const DatasetHeader& h) {
    detail::write_le<std::uint64_t>(out, h.map_count);
    detail::write_le<std::uint64_t>(out, h.record_count);
}

void write_record(std::ostream& out, const SequenceRecord& r) {
    using namespace detail;
    write_cstring(out, r.participant_id);
    write_cstring(out, r.trial_id);
    write_le<std::uint32_t>(out, r.start_window);
    write_le<std::uint64_t>(out, r.first_map);
    write_le<float>(out, r.target);
}

DatasetHeader read_header(std::istream& in) {
    using namespace detail;
    expect_magic(in, kDatasetMagic, "dataset file");
    const auto version = read_le<std::uint16_t>(in, "dataset version");
    if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
    DatasetHeader h;
    h.z = read_le<std::uint32_t>(in, "sequence length");
    h.grid = read_le<std::uint16_t>(in, "grid");
    h.bands = read_le<std::uint16_t>(in, "bands");
    const auto mode = read_le<std::uint8_t>(in, "aggregation mode");
    if (mode > 1) throw FormatError("unknown aggregation mode code " + std::to_string(mode));
    h.mode = mode == 0 ? Aggregation::Sum : Aggregation::Mean;
    h.map_count = read_le<std::uint64_t>(in, "map count");
    h.record_count = read_le<std::uint64_t>(in, "record count");
    if (h.z == 0 || h.grid == 0 || h.bands == 0) throw FormatError("dataset header declares an empty shape");
    return h;
}

} // namespace

std::size_t sequence_count(std::size_t windows, std::size_t z) {
    if (z < 1) throw InvalidArgument("sequence length must be at least 1");
    if (windows <= z) {
        throw InvalidArgument("too few windows for a sequence: " + std::to_string(windows) + " windows, length " +
                              std::to_string(z) + " needs at least " + std::to_string(z + 1));
    }
    return windows - z;
}

std::vector<SequenceSample> build_sequences(std::span<const TopoMap> maps, std::span<const BrainRate> rates,
                                            std::size_t z) {
    if (maps.size() != rates.size()) throw InvalidArgument("build_sequences: maps and rates are not aligned");
    const std::size_t n = sequence_count(maps.size(), z);
    std::vector<SequenceSample> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        SequenceSample sample;
        sample.inputs.assign(maps.begin() + static_cast<std::ptrdiff_t>(s), maps.begin() + static_cast<std::ptrdiff_t>(s + z));
        sample.target = rates[s + z];
        sample.participant_id = maps[s].participant_id;
        sample.trial_id = maps[s].trial_id;
        sample.start_window = s;
        out.push_back(std::move(sample));
    }
    return out;
}

SplitPlan split_videos(std::vector<std::string> video_ids, std::uint64_t seed) {
    const auto sizes = split_sizes(video_ids.size());
    std::sort(video_ids.begin(), video_ids.end());
    if (std::adjacent_find(video_ids.begin(), video_ids.end()) != video_ids.end()) {
        throw InvalidArgument("split_videos: duplicate video id");
    }
    Rng rng(seed);
    shuffle(video_ids, rng);
    SplitPlan plan;
    plan.seed = seed;
    auto it = video_ids.begin();
    plan.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
    it += static_cast<std::ptrdiff_t>(sizes.train);
    plan.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes.validation));
    it += static_cast<std::ptrdiff_t>(sizes.validation);
    plan.test.assign(it, video_ids.end());
    for (auto* set : {&plan.train, &plan.validation, &plan.test}) std::sort(set->begin(), set->end());
    return plan;
}

std::string_view to_string(ModelKind kind) noexcept {
    return kind == ModelKind::WithinSubject ? "within" : "across";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "within" || text == "within-subject") return ModelKind::WithinSubject;
    if (text == "across" || text == "across-subject") return ModelKind::AcrossSubject;
    throw InvalidArgument("unknown model kind '" + std::string(text) + "' (expected within or across)");
}

ExperimentPlan ExperimentPlan::make(ModelKind kind, std::size_t participants, std::uint64_t seed) {
    ExperimentPlan plan;
    plan.kind = kind;
    plan.participants = participants;
    plan.repetitions = kind == ModelKind::WithinSubject ? 2 : 10;
    plan.seed = seed;
    plan.validate();
    return plan;
}

void ExperimentPlan::validate() const {
    if (participants == 0) throw InvalidArgument("experiment plan needs at least one participant");
    if (repetitions == 0) throw InvalidArgument("experiment plan needs at least one repetition");
    if (kind == ModelKind::WithinSubject && participants != 1) {
        throw InvalidArgument("a within-subject plan uses exactly one participant");
    }
}

AssembledSplit assemble(const ExperimentPlan& plan, std::span<const ParticipantIndex> available,
                        std::size_t repetition, std::size_t z) {
    plan.validate();
    if (plan.participants > available.size()) {
        throw InvalidArgument("plan requests " + std::to_string(plan.participants) + " participants but only " +
                              std::to_string(available.size()) + " are available");
    }
    std::vector<const ParticipantIndex*> pool;
    for (const auto& p : available) pool.push_back(&p);
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->participant_id < b->participant_id; });
    for (std::size_t i = 1; i < pool.size(); ++i) {
        if (pool[i]->participant_id == pool[i - 1]->participant_id) throw InvalidArgument("duplicate participant " + pool[i]->participant_id);
    }
    Rng rng(derive_seed(plan.seed, {repetition, 0}));
    shuffle(pool, rng);
    pool.resize(plan.participants);
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->participant_id < b->participant_id; });

    AssembledSplit out;
    for (const auto* p : pool) {
        if (p->videos.size() != p->windows.size()) throw InvalidArgument("participant " + p->participant_id + ": index is not aligned");
        std::map<std::string, std::size_t> windows;
        for (std::size_t v = 0; v < p->videos.size(); ++v) windows[p->videos[v]] = p->windows[v];
        auto split = split_videos(p->videos, derive_seed(plan.seed, {repetition, 1, stable_hash(p->participant_id)}));
        auto emit = [&](const std::vector<std::string>& videos, std::vector<SequenceKey>& keys) {
            for (const auto& v : videos) {
                for (std::size_t s = 0, n = sequence_count(windows.at(v), z); s < n; ++s) keys.push_back({p->participant_id, v, s});
            }
        };
        emit(split.train, out.train);
        emit(split.validation, out.validation);
        emit(split.test, out.test);
        out.participants.push_back(p->participant_id);
        out.plans.push_back(std::move(split));
    }
    check_no_leakage(out);
    return out;
}

void check_no_leakage(const AssembledSplit& split) {
    using Pair = std::pair<std::string, std::string>;
    auto pairs = [](const std::vector<SequenceKey>& keys) {
        std::set<Pair> s;
        for (const auto& k : keys) s.emplace(k.participant_id, k.trial_id);
        return s;
    };
    const auto train = pairs(split.train), validation = pairs(split.validation), test = pairs(split.test);
    auto disjoint = [](const std::set<Pair>& a, const std::set<Pair>& b, const char* what) {
        for (const auto& p : a) {
            if (b.contains(p)) throw InvalidArgument(std::string(what) + " share participant " + p.first + " video " + p.second);
        }
    };
    disjoint(test, train, "test and training sets");
    disjoint(validation, train, "validation and training sets");
    disjoint(validation, test, "validation and test sets");
}

SplitCounts expected_counts(std::size_t participants, std::size_t videos, std::size_t windows_per_video,
                            std::size_t z) {
    const auto sizes = split_sizes(videos);
    const std::size_t per_video = sequence_count(windows_per_video, z);
    SplitCounts c;
    c.train = participants * sizes.train * per_video;
    c.validation = participants * sizes.validation * per_video;
    c.test = participants * sizes.test * per_video;
    c.total = c.train + c.validation + c.test;
    return c;
}

TrialFeatures compute_features(const EegRecording& recording, const TopoMapper& mapper, const FeatureConfig& config) {
    const auto windows = segment(recording, config.window);
    TrialFeatures out;
    out.participant_id = recording.participant_id;
    out.trial_id = recording.trial_id;
    out.maps.resize(windows.size());
    out.rates.resize(windows.size());
    detail::parallel_for(windows.size(), config.threads, [&](std::size_t i) {
        auto f = mapper.process(windows[i], config.bands, config.mode, config.taper);
        if (!f.brain_rate) {
            throw DegenerateChannelError("participant " + recording.participant_id + " trial " + recording.trial_id +
                                         " window " + std::to_string(i) + ": a channel has no in-band energy");
        }
        f.map.participant_id = recording.participant_id;
        f.map.trial_id = recording.trial_id;
        f.map.window_start = i;
        out.maps[i] = std::move(f.map);
        out.rates[i] = *f.brain_rate;
    });
    return out;
}

SequenceDataset::SequenceDataset(std::size_t z, std::size_t grid, std::size_t bands, Aggregation mode)
    : z_(z), grid_(grid), bands_(bands), mode_(mode) {
    if (z == 0 || grid == 0 || bands == 0) throw InvalidArgument("dataset shape must be non-empty");
}

std::span<const TopoMap> SequenceDataset::inputs(std::size_t i) const {
    const auto& r = records_.at(i);
    return std::span<const TopoMap>(pool_).subspan(r.first_map, z_);
}

std::vector<double> SequenceDataset::targets() const {
    std::vector<double> t;
    t.reserve(records_.size());
    for (const auto& r : records_) t.push_back(r.target);
    return t;
}

SequenceSample SequenceDataset::sample(std::size_t i) const {
    const auto& r = records_.at(i);
    const auto in = inputs(i);
    SequenceSample s;
    s.inputs.assign(in.begin(), in.end());
    s.target = {r.target, mode_};
    s.participant_id = r.participant_id;
    s.trial_id = r.trial_id;
    s.start_window = r.start_window;
    return s;
}

void SequenceDataset::check(const TopoMap& map) const {
    if (map.grid() != grid_ || map.bands() != bands_) throw InvalidArgument("map shape does not match the dataset");
}

void SequenceDataset::add_trial(const TrialFeatures& features, std::span<const std::size_t> starts) {
    auto slice = slice_trial(features, starts, z_, grid_, bands_, mode_);
    const std::size_t base = pool_.size();
    pool_.insert(pool_.end(), features.maps.begin() + static_cast<std::ptrdiff_t>(slice.lo),
                 features.maps.begin() + static_cast<std::ptrdiff_t>(slice.hi));
    for (auto& r : slice.records) {
        r.first_map += base;
        records_.push_back(std::move(r));
    }
}

void SequenceDataset::add(const SequenceSample& sample) {
    if (sample.inputs.size() != z_) throw InvalidArgument("sample length does not match the dataset");
    if (sample.target.mode != mode_) throw InvalidArgument("sample target aggregation mode does not match the dataset");
    for (const auto& m : sample.inputs) check(m);
    records_.push_back({sample.participant_id, sample.trial_id, static_cast<std::uint32_t>(sample.start_window),
                        pool_.size(), static_cast<float>(sample.target.value)});
    pool_.insert(pool_.end(), sample.inputs.begin(), sample.inputs.end());
}

DatasetHeader SequenceDataset::header() const {
    DatasetHeader h;
    h.z = static_cast<std::uint32_t>(z_);
    h.grid = static_cast<std::uint16_t>(grid_);
    h.bands = static_cast<std::uint16_t>(bands_);
    h.mode = mode_;
    h.map_count = pool_.size();
    h.record_count = records_.size();
    return h;
}

void SequenceDataset::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file " + path.string());
    const auto h = header();
    write_header(out, h);
    write_counts(out, h);
    write_tensor_header(out, grid_, bands_, pool_.size());
    for (const auto& m : pool_) write_tensor(out, m);
    for (const auto& r : records_) write_record(out, r);
    if (!out) throw Error("write failed for " + path.string());
}

SequenceDataset SequenceDataset::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset file " + path.string());
    const auto h = read_header(in);
    SequenceDataset ds(h.z, h.grid, h.bands, h.mode);
    const auto th = read_tensor_header(in);
    if (th.grid != h.grid || th.bands != h.bands || th.count != h.map_count) {
        throw FormatError("dataset map pool header disagrees with the dataset header");
    }
    ds.pool_.reserve(h.map_count);
    for (std::uint64_t i = 0; i < h.map_count; ++i) ds.pool_.push_back(read_tensor(in, h.grid, h.bands));
    ds.records_.reserve(h.record_count);
    for (std::uint64_t i = 0; i < h.record_count; ++i) {
        using namespace detail;
        SequenceRecord r;
        r.participant_id = read_cstring(in, "participant id");
        r.trial_id = read_cstring(in, "trial id");
        r.start_window = read_le<std::uint32_t>(in, "start window");
        r.first_map = read_le<std::uint64_t>(in, "first map");
        r.target = read_le<float>(in, "target");
        if (r.first_map + h.z > h.map_count) throw FormatError("dataset record points past the map pool");
        if (!std::isfinite(r.target)) throw FormatError("dataset record has a non-finite target");
        ds.records_.push_back(std::move(r));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after dataset records");
    return ds;
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, std::size_t z, std::size_t grid, std::size_t bands,
                             Aggregation mode)
    : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write dataset file " + path.string());
    if (z == 0 || grid == 0 || bands == 0) throw InvalidArgument("dataset shape must be non-empty");
    header_.z = static_cast<std::uint32_t>(z);
    header_.grid = static_cast<std::uint16_t>(grid);
    header_.bands = static_cast<std::uint16_t>(bands);
    header_.mode = mode;
    write_header(out_, header_);
    counts_at_ = out_.tellp();
    write_counts(out_, header_);
    write_tensor_header(out_, grid, bands, 0);
}

DatasetWriter::~DatasetWriter() {
    if (!finished_) {
        try {
            finish();
        } catch (...) {
        }
    }
}

void DatasetWriter::add_trial(const TrialFeatures& features, std::span<const std::size_t> starts) {
    if (finished_) throw InvalidArgument("dataset writer already finished");
    auto slice = slice_trial(features, starts, header_.z, header_.grid, header_.bands, header_.mode);
    for (std::size_t i = slice.lo; i < slice.hi; ++i) write_tensor(out_, features.maps[i]);
    for (auto& r : slice.records) {
        r.first_map += header_.map_count;
        records_.push_back(std::move(r));
    }
    header_.map_count += slice.hi - slice.lo;
}

void DatasetWriter::finish() {
    if (finished_) return;
    finished_ = true;
    for (const auto& r : records_) write_record(out_, r);
    header_.record_count = records_.size();
    out_.seekp(counts_at_);
    write_counts(out_, header_);
    write_tensor_header(out_, header_.grid, header_.bands, header_.map_count);
    out_.close();
    if (!out_) throw Error("write failed for " + path_.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset file " + path.string());
    return read_header(in);
}

} // namespace neurorate
