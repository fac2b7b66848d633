#include "neurorate/signal_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include "neurorate/detail/binary_io.hpp"
#include "neurorate/error.hpp"
#include "neurorate/rng.hpp"

namespace neurorate {

extern const char* const kDefaultMontageText;  // generated from data/montage_1020_32.txt

namespace {

constexpr char kRecordingMagic[5] = "EEGR";
constexpr std::uint16_t kRecordingVersion = 1;

} // namespace

double Vec3::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

Montage::Montage(std::vector<Electrode> electrodes) : electrodes_(std::move(electrodes)) {
    for (std::size_t i = 0; i < electrodes_.size(); ++i) {
        auto& e = electrodes_[i];
        if (e.label.empty()) throw InvalidArgument("montage: empty electrode label");
        if (!index_.emplace(e.label, i).second) {
            throw InvalidArgument("montage: duplicate label '" + e.label + "'");
        }
        const double n = e.position.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw InvalidArgument("montage: electrode '" + e.label + "' has a non-normalizable coordinate");
        }
        e.position = {e.position.x / n, e.position.y / n, e.position.z / n};
    }
}

bool Montage::contains(std::string_view label) const { return index_.contains(std::string(label)); }

const Vec3& Montage::position(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) throw InvalidArgument("montage: unknown electrode '" + std::string(label) + "'");
    return electrodes_[it->second].position;
}

Montage Montage::subset(std::span<const std::string> labels) const {
    std::vector<Electrode> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back({l, position(l)});
    return Montage(std::move(out));
}

const std::vector<std::string>& deap_channel_labels() {
    static const std::vector<std::string> labels = {
        "Fp1", "AF3", "F3", "F7",  "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3",
        "P7",  "PO3", "O1", "Oz",  "Pz",  "Fp2", "AF4", "Fz", "F4", "F8",  "FC6",
        "FC2", "Cz",  "C4", "T8",  "CP6", "CP2", "P4",  "P8", "PO4", "O2"};
    return labels;
}

const Montage& default_montage() {
    static const Montage montage = parse_montage(kDefaultMontageText);
    return montage;
}

Montage parse_montage(std::string_view text) {
    std::vector<Montage::Electrode> electrodes;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        Montage::Electrode e;
        std::string extra;
        if (!(fields >> e.label >> e.position.x >> e.position.y >> e.position.z) || (fields >> extra)) {
            throw FormatError("montage line " + std::to_string(line_no) + ": expected 'LABEL x y z'");
        }
        electrodes.push_back(std::move(e));
    }
    return Montage(std::move(electrodes));
}

Montage load_montage(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open montage file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_montage(ss.str());
}

void save_montage(const Montage& montage, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write montage file " + path.string());
    out.precision(17);
    for (const auto& e : montage.electrodes()) {
        out << e.label << ' ' << e.position.x << ' ' << e.position.y << ' ' << e.position.z << '\n';
    }
}

void EegRecording::validate(const Montage& montage) const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InvalidArgument("recording: sample_rate must be > 0");
    if (samples.rows() == 0 || samples.cols() == 0) throw InvalidArgument("recording: empty sample matrix");
    if (channel_names.size() != channel_count()) {
        throw InvalidArgument("recording: channel name count does not match sample rows");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : channel_names) {
        if (!seen.insert(name).second) throw InvalidArgument("recording: duplicate channel '" + name + "'");
        if (!montage.contains(name)) throw InvalidArgument("recording: channel '" + name + "' not in montage");
    }
}

EegRecording load_recording(const std::filesystem::path& path, double expected_rate, const Montage& montage) {
    using namespace detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open recording " + path.string());

    EegRecording rec;
    try {
        expect_magic(in, kRecordingMagic, "recording header");
        const auto version = read_le<std::uint16_t>(in, "version");
        if (version != kRecordingVersion) throw FormatError("unsupported recording version " + std::to_string(version));
        rec.sample_rate = read_le<double>(in, "sample_rate");
        const auto channels = read_le<std::uint32_t>(in, "channel_count");
        const auto count = read_le<std::uint64_t>(in, "sample_count");
        if (channels == 0 || count == 0) throw FormatError("recording header declares an empty matrix");
        if (!(rec.sample_rate > 0.0) || !std::isfinite(rec.sample_rate)) throw FormatError("recording header: bad sample rate");
        for (std::uint32_t c = 0; c < channels; ++c) rec.channel_names.push_back(read_cstring(in, "channel label"));
        rec.samples.resize(channels, static_cast<Eigen::Index>(count));
        std::vector<float> row(count);
        for (std::uint32_t c = 0; c < channels; ++c) {
            in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(count * sizeof(float)));
            if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
                throw FormatError("recording row " + std::to_string(c) + " ('" + rec.channel_names[c] +
                                  "') is shorter than the header sample count");
            }
            for (std::uint64_t t = 0; t < count; ++t) rec.samples(c, static_cast<Eigen::Index>(t)) = byteswap_if_big(row[t]);
        }
        if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after sample matrix");
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }

    if (std::abs(rec.sample_rate - expected_rate) > 1e-9 * expected_rate) {
        throw InvalidArgument(path.string() + ": sample rate " + std::to_string(rec.sample_rate) +
                              " Hz does not match expected " + std::to_string(expected_rate) + " Hz");
    }
    rec.trial_id = path.stem().string();
    rec.participant_id = path.parent_path().filename().string();
    rec.validate(montage);
    return rec;
}

void save_recording(const EegRecording& recording, const std::filesystem::path& path) {
    using namespace detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write recording " + path.string());
    write_magic(out, kRecordingMagic);
    write_le<std::uint16_t>(out, kRecordingVersion);
    write_le<double>(out, recording.sample_rate);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(recording.channel_count()));
    write_le<std::uint64_t>(out, recording.sample_count());
    for (const auto& name : recording.channel_names) write_cstring(out, name);
    for (Eigen::Index c = 0; c < recording.samples.rows(); ++c) {
        for (Eigen::Index t = 0; t < recording.samples.cols(); ++t) {
            write_le<float>(out, static_cast<float>(recording.samples(c, t)));
        }
    }
    if (!out) throw Error("write failed for " + path.string());
}

void SynthSpec::validate() const {
    if (!(sample_rate > 0.0)) throw InvalidArgument("synth: sample_rate must be > 0");
    if (!(duration > 0.0)) throw InvalidArgument("synth: duration must be > 0");
    const double n = duration * sample_rate;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
        throw InvalidArgument("synth: duration x sample_rate must be an integer");
    }
    if (channel_names.empty() || channel_names.size() != components.size()) {
        throw InvalidArgument("synth: need one component list per channel");
    }
    if (noise_std < 0.0) throw InvalidArgument("synth: noise_std must be >= 0");
    const double nyquist = sample_rate / 2.0;
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (const auto& comp : components[c]) {
            if (!(comp.frequency >= 0.0) || comp.frequency >= nyquist) {
                throw InvalidArgument("synth: component at " + std::to_string(comp.frequency) +
                                      " Hz on channel '" + channel_names[c] + "' is not below Nyquist (" +
                                      std::to_string(nyquist) + " Hz)");
            }
        }
    }
}

EegRecording synthesize(const SynthSpec& spec) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(std::llround(spec.duration * spec.sample_rate));
    EegRecording rec;
    rec.sample_rate = spec.sample_rate;
    rec.channel_names = spec.channel_names;
    rec.participant_id = spec.participant_id;
    rec.trial_id = spec.trial_id;
    rec.samples = SampleMatrix::Zero(static_cast<Eigen::Index>(spec.channel_names.size()), n);

    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t c = 0; c < spec.components.size(); ++c) {
        auto row = rec.samples.row(static_cast<Eigen::Index>(c));
        for (const auto& comp : spec.components[c]) {
            for (Eigen::Index t = 0; t < n; ++t) {
                const double time = static_cast<double>(t) / spec.sample_rate;
                row(t) += comp.amplitude * std::sin(two_pi * comp.frequency * time + comp.phase);
            }
        }
    }
    if (spec.noise_std > 0.0) {
        Rng rng(spec.seed);
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (Eigen::Index c = 0; c < rec.samples.rows(); ++c) {
            for (Eigen::Index t = 0; t < n; ++t) rec.samples(c, t) += noise(rng);
        }
    }
    return rec;
}

} // namespace neurorate
