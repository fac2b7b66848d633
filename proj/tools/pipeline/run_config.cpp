#include "run_config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "neurorate/error.hpp"

namespace neurorate::cli {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw InvalidArgument("config key " + key + ": expected a number, got '" + v + "'");
    return x;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v.front() != '-') x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) {
        throw InvalidArgument("config key " + key + ": expected a non-negative integer, got '" + v + "'");
    }
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidArgument("config key " + key + ": expected a boolean, got '" + v + "'");
}

Taper parse_taper(const std::string& v) {
    if (v == "rectangular") return Taper::Rectangular;
    if (v == "hann") return Taper::Hann;
    throw InvalidArgument("config key signal.taper: expected 'rectangular' or 'hann', got '" + v + "'");
}

std::string taper_name(Taper t) { return t == Taper::Hann ? "hann" : "rectangular"; }

// "delta:0.5-4,theta:4-8"
BandScheme parse_bands(const std::string& v) {
    std::vector<FrequencyBand> bands;
    for (const auto& item : split(v, ',')) {
        const auto colon = item.find(':'), dash = item.find('-', colon == std::string::npos ? 0 : colon);
        if (colon == std::string::npos || dash == std::string::npos) {
            throw InvalidArgument("config key signal.bands: expected name:low-high, got '" + item + "'");
        }
        bands.push_back({trim(item.substr(0, colon)), to_double("signal.bands", trim(item.substr(colon + 1, dash - colon - 1))),
                         to_double("signal.bands", trim(item.substr(dash + 1)))});
    }
    return BandScheme(std::move(bands));
}

// "4x32,2x64,1x128"
std::vector<ConvBlock> parse_blocks(const std::string& v) {
    std::vector<ConvBlock> blocks;
    for (const auto& item : split(v, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) throw InvalidArgument("config key network.blocks: expected CONVSxFILTERS, got '" + item + "'");
        blocks.push_back({to_unsigned("network.blocks", item.substr(0, x)), to_unsigned("network.blocks", item.substr(x + 1))});
    }
    return blocks;
}

// Shortest text that reads back to the same double.
std::string num(double v) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
    std::string name;  // section.key
    Setter set;
    Getter get;
};

#define NR_SIZE(path, field)                                                                          \
    Key {                                                                                             \
        path, [](RunConfig& c, const std::string& v) { c.field = to_unsigned(path, v); },              \
            [](const RunConfig& c) { return std::to_string(c.field); }                                \
    }
#define NR_REAL(path, field)                                                                          \
    Key {                                                                                             \
        path, [](RunConfig& c, const std::string& v) { c.field = to_double(path, v); },                \
            [](const RunConfig& c) { return num(c.field); }                                           \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        {"paths.recordings", [](RunConfig& c, const std::string& v) { c.recordings = v; },
         [](const RunConfig& c) { return c.recordings.string(); }},
        {"paths.montage", [](RunConfig& c, const std::string& v) { c.montage = v; },
         [](const RunConfig& c) { return c.montage.string(); }},
        {"paths.out", [](RunConfig& c, const std::string& v) { c.out = v; },
         [](const RunConfig& c) { return c.out.string(); }},
        NR_SIZE("synth.participants", synth.participants),
        NR_SIZE("synth.videos", synth.videos),
        NR_REAL("synth.duration_s", synth.duration_s),
        NR_REAL("synth.noise_std", synth.noise_std),
        NR_REAL("signal.sample_rate", sample_rate),
        {"signal.bands", [](RunConfig& c, const std::string& v) { c.bands = parse_bands(v); },
         [](const RunConfig& c) {
             std::string s;
             for (const auto& b : c.bands.bands()) s += (s.empty() ? "" : ",") + b.name + ":" + num(b.low) + "-" + num(b.high);
             return s;
         }},
        NR_REAL("signal.window_s", window.length_s),
        NR_REAL("signal.shift_ms", window.shift_ms),
        {"signal.taper", [](RunConfig& c, const std::string& v) { c.taper = parse_taper(v); },
         [](const RunConfig& c) { return taper_name(c.taper); }},
        NR_SIZE("topomap.grid", grid),
        NR_SIZE("dataset.z", z),
        {"dataset.aggregation", [](RunConfig& c, const std::string& v) { c.mode = parse_aggregation(v); },
         [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
        {"dataset.model", [](RunConfig& c, const std::string& v) { c.model = parse_model_kind(v); },
         [](const RunConfig& c) { return std::string(to_string(c.model)); }},
        NR_SIZE("dataset.participants", participants),
        NR_SIZE("dataset.repetition", repetition),
        {"network.blocks", [](RunConfig& c, const std::string& v) { c.network.blocks = parse_blocks(v); },
         [](const RunConfig& c) {
             std::string s;
             for (const auto& b : c.network.blocks) {
                 s += (s.empty() ? "" : ",") + std::to_string(b.convs) + "x" + std::to_string(b.filters);
             }
             return s;
         }},
        NR_SIZE("network.lstm_hidden", network.lstm_hidden),
        NR_SIZE("network.variation_filters", network.variation_filters),
        NR_SIZE("network.variation_kernel", network.variation_kernel),
        NR_SIZE("network.dense_units", network.dense_units),
        NR_REAL("network.dropout", network.dropout),
        NR_SIZE("train.batch_size", train.batch_size),
        NR_REAL("train.sgd_learning_rate", train.sgd_learning_rate),
        NR_REAL("train.adam_learning_rate", train.adam.learning_rate),
        NR_REAL("train.adam_beta1", train.adam.beta1),
        NR_REAL("train.adam_beta2", train.adam.beta2),
        NR_REAL("train.adam_epsilon", train.adam.epsilon),
        NR_SIZE("train.patience", train.patience),
        NR_SIZE("train.max_epochs", train.max_epochs),
        {"train.freeze_encoder",
         [](RunConfig& c, const std::string& v) { c.train.freeze_encoder = to_bool("train.freeze_encoder", v); },
         [](const RunConfig& c) { return std::string(c.train.freeze_encoder ? "true" : "false"); }},
        NR_REAL("train.target_train_mse", train.target_train_mse),
        {"train.batch_study_sizes",
         [](RunConfig& c, const std::string& v) {
             c.batch_study_sizes.clear();
             for (const auto& s : split(v, ',')) c.batch_study_sizes.push_back(to_unsigned("train.batch_study_sizes", s));
         },
         [](const RunConfig& c) {
             std::string s;
             for (auto b : c.batch_study_sizes) s += (s.empty() ? "" : ",") + std::to_string(b);
             return s;
         }},
        NR_SIZE("run.seed", seed),
        NR_SIZE("run.threads", threads),
    };
    return k;
}

#undef NR_SIZE
#undef NR_REAL

} // namespace

Montage RunConfig::load_montage() const {
    return montage.empty() ? default_montage() : neurorate::load_montage(montage);
}

FeatureConfig RunConfig::features() const {
    FeatureConfig f;
    f.window = window;
    f.bands = bands;
    f.mode = mode;
    f.taper = taper;
    f.grid = grid;
    f.threads = threads;
    return f;
}

ExperimentPlan RunConfig::plan() const { return ExperimentPlan::make(model, participants, seed); }

void RunConfig::sync() {
    synth.seed = seed;
    synth.sample_rate = sample_rate;
    synth.bands = bands;
    network.grid = grid;
    network.bands = bands.size();
    network.z = z;
    train.seed = seed;
    train.threads = threads;
}

void RunConfig::validate() const {
    if (threads < 1) throw InvalidArgument("run.threads must be at least 1");
    if (!(sample_rate > 0.0)) throw InvalidArgument("signal.sample_rate must be positive");
    (void)window.length_samples(sample_rate);
    (void)window.shift_samples(sample_rate);
    if (grid < 2) throw InvalidArgument("topomap.grid must be at least 2");
    if (z < 1) throw InvalidArgument("dataset.z must be at least 1");
    if (!montage.empty() && !std::filesystem::is_regular_file(montage)) {
        throw InvalidArgument("paths.montage does not name a readable file: " + montage.string());
    }
    if (!recordings.empty() && std::filesystem::exists(recordings) && !std::filesystem::is_directory(recordings)) {
        throw InvalidArgument("paths.recordings is not a directory: " + recordings.string());
    }
    (void)plan();
    network.validate();
    train.validate();
    for (auto b : batch_study_sizes) {
        if (b < 1) throw InvalidArgument("train.batch_study_sizes entries must be at least 1");
    }
}

RunConfig parse_run_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    std::map<std::string, const Key*> index;
    for (const auto& k : keys()) index[k.name] = &k;
    RunConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw InvalidArgument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const auto it = index.find(section + "." + key);
            if (it == index.end()) throw InvalidArgument("config: unknown key " + section + "." + key);
            it->second->set(c, trim(value.data()));
        }
    }
    c.sync();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config file " + path.string());
    std::stringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

std::string canonical_text(const RunConfig& config) {
    std::string out, section;
    for (const auto& k : keys()) {
        const auto dot = k.name.find('.');
        const auto s = k.name.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(config) + "\n";
    }
    return out;
}

} // namespace neurorate::cli
