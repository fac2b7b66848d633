#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <spdlog/spdlog.h>

#include "manifest.hpp"
#include "neurorate/detail/parallel.hpp"
#include "neurorate/synthetic.hpp"
#include "neurorate/training.hpp"
#include "plot.hpp"

namespace neurorate::cli {

namespace fs = std::filesystem;

namespace {

using Artifacts = std::vector<fs::path>;

struct RecordingRef {
    std::string trial;
    fs::path path;
};

// participant -> recordings sorted by trial id
using Corpus = std::map<std::string, std::vector<RecordingRef>>;

Corpus discover(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw InvalidArgument("no recordings directory at " + root.string() + " (run 'synth' or set paths.recordings)");
    }
    Corpus corpus;
    for (const auto& dir : fs::directory_iterator(root)) {
        if (!dir.is_directory()) continue;
        auto& list = corpus[dir.path().filename().string()];
        for (const auto& f : fs::directory_iterator(dir.path())) {
            if (f.is_regular_file() && f.path().extension() == ".eegr") list.push_back({f.path().stem().string(), f.path()});
        }
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.trial < b.trial; });
        if (list.empty()) corpus.erase(dir.path().filename().string());
    }
    if (corpus.empty()) throw InvalidArgument("no .eegr recordings under " + root.string());
    return corpus;
}

fs::path ensure_dir(const fs::path& p) {
    fs::create_directories(p);
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

/// Loads recordings and builds TopoMappers shared across equal channel lists.
class FeatureSource {
public:
    explicit FeatureSource(const RunConfig& c) : config_(c), montage_(c.load_montage()), features_(c.features()) {}

    EegRecording load(const fs::path& path) const { return load_recording(path, config_.sample_rate, montage_); }

    TrialFeatures compute(const EegRecording& rec) {
        auto it = mappers_.find(rec.channel_names);
        if (it == mappers_.end()) {
            it = mappers_.emplace(rec.channel_names, std::make_unique<TopoMapper>(montage_, rec.channel_names, config_.grid)).first;
        }
        return compute_features(rec, *it->second, features_);
    }

    std::size_t windows(const EegRecording& rec) const {
        return window_count(rec.sample_count(), config_.window.length_samples(rec.sample_rate),
                            config_.window.shift_samples(rec.sample_rate));
    }

private:
    const RunConfig& config_;
    Montage montage_;
    FeatureConfig features_;
    std::map<std::vector<std::string>, std::unique_ptr<TopoMapper>> mappers_;
};

enum class Subset { Train, Validation, Test };

std::vector<ParticipantIndex> index_corpus(const Corpus& corpus, const FeatureSource& source) {
    std::vector<ParticipantIndex> out;
    for (const auto& [pid, recs] : corpus) {
        ParticipantIndex p;
        p.participant_id = pid;
        for (const auto& r : recs) {
            p.videos.push_back(r.trial);
            p.windows.push_back(source.windows(source.load(r.path)));
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Computes features for every video of the split's participants and hands
/// each trial to `sink` with the subset its video belongs to.
void for_each_trial(const AssembledSplit& split, const Corpus& corpus, FeatureSource& source,
                    const std::function<void(const TrialFeatures&, Subset)>& sink) {
    for (std::size_t i = 0; i < split.participants.size(); ++i) {
        const auto& pid = split.participants[i];
        const auto& plan = split.plans[i];
        for (const auto& rec : corpus.at(pid)) {
            auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), rec.trial) != v.end(); };
            const Subset s = in(plan.train) ? Subset::Train : in(plan.validation) ? Subset::Validation : Subset::Test;
            if (!in(plan.train) && !in(plan.validation) && !in(plan.test)) continue;
            spdlog::debug("features {}/{}", pid, rec.trial);
            sink(source.compute(source.load(rec.path)), s);
        }
    }
}

Artifacts cmd_synth(const RunConfig& c, const CommandOptions&) {
    const auto root = ensure_dir(c.recordings_dir());
    spdlog::info("synth: {} participants x {} videos into {}", c.synth.participants, c.synth.videos, root.string());
    return write_corpus(c.synth, root, c.load_montage());
}

Artifacts cmd_brainrate(const RunConfig& c, const CommandOptions&) {
    const auto corpus = discover(c.recordings_dir());
    FeatureSource source(c);
    const auto dir = ensure_dir(c.out / "brainrate");
    Artifacts out;
    for (const auto& [pid, recs] : corpus) {
        const auto path = dir / (pid + ".csv");
        auto file = open_out(path);
        file.precision(12);
        for (const auto& r : recs) {
            const auto rec = source.load(r.path);
            const auto windows = segment(rec, c.window);
            std::vector<double> rates(windows.size());
            detail::parallel_for(windows.size(), c.threads, [&](std::size_t w) {
                rates[w] = window_brain_rate(windows[w], c.bands, c.mode, c.taper).value;
            });
            for (std::size_t w = 0; w < windows.size(); ++w) {
                file << r.trial << ',' << windows[w].start_index() << ',' << rates[w] << '\n';
            }
        }
        out.push_back(path);
    }
    return out;
}

Artifacts cmd_topomap(const RunConfig& c, const CommandOptions& opt) {
    const auto corpus = discover(c.recordings_dir());
    FeatureSource source(c);
    Artifacts out;
    for (const auto& [pid, recs] : corpus) {
        const auto dir = ensure_dir(c.out / "topomaps" / pid);
        for (const auto& r : recs) {
            const auto f = source.compute(source.load(r.path));
            const auto path = dir / (r.trial + ".topo");
            save_tensors(f.maps, path);
            out.push_back(path);
            if (opt.emit_png) {
                if (opt.png_window >= f.maps.size()) throw InvalidArgument("png window index beyond the trial's windows");
                const auto png_dir = ensure_dir(dir / "png");
                for (std::size_t b = 0; b < c.bands.size(); ++b) {
                    const auto png = png_dir / (r.trial + "_w" + std::to_string(opt.png_window) + "_" + c.bands[b].name + ".png");
                    write_band_png(f.maps[opt.png_window], b, png);
                    out.push_back(png);
                }
            }
        }
    }
    return out;
}

Artifacts cmd_dataset(const RunConfig& c, const CommandOptions&) {
    const auto corpus = discover(c.recordings_dir());
    FeatureSource source(c);
    const auto index = index_corpus(corpus, source);
    const auto split = assemble(c.plan(), index, c.repetition, c.z);
    const auto dir = ensure_dir(c.out / layout::kDatasetDir);
    const std::array<fs::path, 3> paths{dir / "train.nrds", dir / "validation.nrds", dir / "test.nrds"};
    {
        std::array<std::unique_ptr<DatasetWriter>, 3> writers;
        for (std::size_t i = 0; i < 3; ++i) {
            writers[i] = std::make_unique<DatasetWriter>(paths[i], c.z, c.grid, c.bands.size(), c.mode);
        }
        for_each_trial(split, corpus, source, [&](const TrialFeatures& f, Subset s) {
            writers[static_cast<std::size_t>(s)]->add_trial(f);
        });
        const std::array<std::size_t, 3> expected{split.train.size(), split.validation.size(), split.test.size()};
        for (std::size_t i = 0; i < 3; ++i) {
            if (writers[i]->record_count() != expected[i]) {
                throw Error("dataset writer produced " + std::to_string(writers[i]->record_count()) +
                            " sequences where the split planned " + std::to_string(expected[i]));
            }
            writers[i]->finish();
        }
    }
    const auto split_path = dir / "split.txt";
    auto file = open_out(split_path);
    file << "model = " << to_string(c.model) << "\nrepetition = " << c.repetition << "\nparticipants = " << split.participants.size()
         << "\ntotal = " << split.total() << "\ntrain = " << split.train.size() << "\nvalidation = " << split.validation.size()
         << "\ntest = " << split.test.size() << '\n';
    for (std::size_t i = 0; i < split.participants.size(); ++i) {
        const auto& p = split.plans[i];
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
            return s;
        };
        file << split.participants[i] << ".train = " << join(p.train) << '\n'
             << split.participants[i] << ".validation = " << join(p.validation) << '\n'
             << split.participants[i] << ".test = " << join(p.test) << '\n';
    }
    file.close();
    spdlog::info("dataset: {} train / {} validation / {} test sequences", split.train.size(), split.validation.size(),
                 split.test.size());
    return {paths[0], paths[1], paths[2], split_path};
}

struct Splits {
    SequenceDataset train, validation, test;
};

Splits load_splits(const RunConfig& c) {
    const auto dir = c.out / layout::kDatasetDir;
    return {SequenceDataset::load(dir / "train.nrds"), SequenceDataset::load(dir / "validation.nrds"),
            SequenceDataset::load(dir / "test.nrds")};
}

void write_predictions(const fs::path& path, const SequenceDataset& test, const Network& cnn, const Network& full,
                       std::size_t threads, std::vector<double>* cnn_out = nullptr, std::vector<double>* full_out = nullptr) {
    const auto a = predict_dataset(cnn, test, threads), b = predict_dataset(full, test, threads);
    auto file = open_out(path);
    write_prediction_trace(file, test, a, b);
    if (cnn_out) *cnn_out = a;
    if (full_out) *full_out = b;
}

Artifacts cmd_train(const RunConfig& c, const CommandOptions&) {
    const auto d = load_splits(c);
    auto trained = train_two_stage(c.network, d.train, d.validation, d.test, c.train);
    const auto model_dir = ensure_dir(c.out / layout::kModelDir), train_dir = ensure_dir(c.out / layout::kTrainDir);
    const auto cnn_path = model_dir / "cnn.nrmd", full_path = model_dir / "full.nrmd";
    save_network(*trained.cnn, cnn_path);
    save_network(*trained.full, full_path);
    const auto log = train_dir / "epochs.csv", summary = train_dir / "summary.txt", pred = train_dir / "predictions.csv";
    {
        auto f = open_out(log);
        write_epoch_log(f, trained.report);
    }
    {
        auto f = open_out(summary);
        write_summary(f, trained.report);
    }
    write_predictions(pred, d.test, *trained.cnn, *trained.full, c.threads);
    return {cnn_path, full_path, log, summary, pred};
}

void write_eval_block(std::ostream& out, const std::string& prefix, const EvalMetrics& m) {
    out << prefix << "_mse = " << m.mse << '\n' << prefix << "_mape_percent = " << m.mape << '\n';
    for (const auto& [video, r] : m.pearson) {
        out << prefix << "_pearson." << video << " = ";
        if (r) {
            out << *r;
        } else {
            out << "undefined";
        }
        out << '\n';
    }
}

Artifacts cmd_eval(const RunConfig& c, const CommandOptions&) {
    const auto test = SequenceDataset::load(c.out / layout::kDatasetDir / "test.nrds");
    const auto cnn = load_network(c.out / layout::kModelDir / "cnn.nrmd");
    const auto full = load_network(c.out / layout::kModelDir / "full.nrmd");
    const auto dir = ensure_dir(c.out / layout::kEvalDir);
    std::vector<double> a, b;
    const auto pred = dir / "predictions.csv";
    write_predictions(pred, test, *cnn, *full, c.threads, &a, &b);
    const auto metrics = dir / "metrics.txt";
    auto f = open_out(metrics);
    f.precision(17);
    f << "test_sequences = " << test.size() << '\n';
    write_eval_block(f, "cnn", evaluate(test, a));
    write_eval_block(f, "cnnlstm", evaluate(test, b));
    f << "mape_units = percent\n";
    return {pred, metrics};
}

struct TraceRow {
    std::size_t window = 0;
    double y = 0, cnn = 0, full = 0;
};

std::map<std::string, std::vector<TraceRow>> read_trace(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("no prediction trace at " + path.string() + " (run 'eval' first)");
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::vector<TraceRow>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream s(line);
        std::string video, field;
        std::getline(s, video, ',');
        TraceRow r;
        std::getline(s, field, ',');
        r.window = std::stoull(field);
        std::getline(s, field, ',');
        r.y = std::stod(field);
        std::getline(s, field, ',');
        r.cnn = std::stod(field);
        std::getline(s, field, ',');
        r.full = std::stod(field);
        out[video].push_back(r);
    }
    return out;
}

std::string quantiles(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < v.size() ? v[lo] * (1 - frac) + v[lo + 1] * frac : v[lo];
    };
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    std::ostringstream o;
    o.precision(6);
    o << "min " << v.front() << ", q1 " << q(0.25) << ", median " << q(0.5) << ", q3 " << q(0.75) << ", max " << v.back()
      << ", mean " << mean;
    return o.str();
}

Artifacts cmd_report(const RunConfig& c, const CommandOptions&) {
    const auto trace = read_trace(c.out / layout::kEvalDir / "predictions.csv");
    const auto dir = ensure_dir(c.out / layout::kReportDir);
    Artifacts out;
    std::vector<double> cnn_mape, full_mape;
    const auto table = dir / "mape_by_video.csv";
    auto t = open_out(table);
    t.precision(10);
    t << "video_id,sequences,mape_cnn,mape_cnnlstm\n";
    const std::vector<Rgb> colors{{0, 0, 0}, {40, 90, 220}, {220, 50, 40}};
    for (const auto& [video, rows] : trace) {
        std::vector<double> y, a, b;
        for (const auto& r : rows) {
            y.push_back(r.y);
            a.push_back(r.cnn);
            b.push_back(r.full);
        }
        cnn_mape.push_back(mape(y, a));
        full_mape.push_back(mape(y, b));
        t << video << ',' << rows.size() << ',' << cnn_mape.back() << ',' << full_mape.back() << '\n';
        std::string stem = video;
        std::replace(stem.begin(), stem.end(), '/', '_');
        const auto png = dir / ("trace_" + stem + ".png");
        write_png(line_plot({y, a, b}, colors), png);
        out.push_back(png);
    }
    t.close();
    out.push_back(table);
    const auto summary = dir / "mape_summary.txt";
    auto s = open_out(summary);
    s << "videos = " << trace.size() << "\nunits = percent\n"
      << "cnn = " << quantiles(cnn_mape) << "\ncnnlstm = " << quantiles(full_mape) << '\n'
      << "legend = black observed, blue cnn, red cnn+lstm\n";
    s.close();
    out.push_back(summary);
    const auto h1 = dir / "mape_hist_cnn.png", h2 = dir / "mape_hist_cnnlstm.png";
    write_png(histogram(cnn_mape, 20, {40, 90, 220}), h1);
    write_png(histogram(full_mape, 20, {220, 50, 40}), h2);
    out.push_back(h1);
    out.push_back(h2);
    return out;
}

Artifacts cmd_batch_study(const RunConfig& c, const CommandOptions&) {
    const auto corpus = discover(c.recordings_dir());
    FeatureSource source(c);
    const auto index = index_corpus(corpus, source);
    const auto plan = ExperimentPlan::make(ModelKind::WithinSubject, 1, c.seed);
    std::vector<std::array<SequenceDataset, 3>> sets;
    std::vector<std::string> ids;
    for (const auto& p : index) {
        const std::vector<ParticipantIndex> one{p};
        const auto split = assemble(plan, one, c.repetition, c.z);
        std::array<SequenceDataset, 3> ds{SequenceDataset(c.z, c.grid, c.bands.size(), c.mode),
                                          SequenceDataset(c.z, c.grid, c.bands.size(), c.mode),
                                          SequenceDataset(c.z, c.grid, c.bands.size(), c.mode)};
        for_each_trial(split, corpus, source, [&](const TrialFeatures& f, Subset s) { ds[static_cast<std::size_t>(s)].add_trial(f); });
        sets.push_back(std::move(ds));
        ids.push_back(p.participant_id);
    }
    std::vector<SubjectSplit> subjects;
    for (std::size_t i = 0; i < sets.size(); ++i) subjects.push_back({ids[i], &sets[i][0], &sets[i][1], &sets[i][2]});
    const auto rows = batch_size_study(c.network, subjects, c.batch_study_sizes, c.train);
    const auto dir = ensure_dir(c.out / "batch_study");
    const auto csv = dir / "results.csv";
    {
        auto f = open_out(csv);
        write_batch_study(f, rows);
    }
    Artifacts out{csv};
    for (auto bs : c.batch_study_sizes) {
        std::vector<double> mse_values, epochs;
        for (const auto& r : rows) {
            if (r.batch_size != bs) continue;
            mse_values.push_back(r.test_mse);
            epochs.push_back(static_cast<double>(r.epochs));
        }
        const auto a = dir / ("mse_batch" + std::to_string(bs) + ".png"), b = dir / ("epochs_batch" + std::to_string(bs) + ".png");
        write_png(histogram(mse_values, 10, {40, 90, 220}), a);
        write_png(histogram(epochs, 10, {90, 160, 60}), b);
        out.push_back(a);
        out.push_back(b);
    }
    return out;
}

using Command = Artifacts (*)(const RunConfig&, const CommandOptions&);

const std::vector<std::pair<std::string, Command>>& commands() {
    static const std::vector<std::pair<std::string, Command>> c = {
        {"synth", cmd_synth},     {"brainrate", cmd_brainrate}, {"topomap", cmd_topomap}, {"dataset", cmd_dataset},
        {"train", cmd_train},     {"eval", cmd_eval},           {"report", cmd_report},   {"batch-study", cmd_batch_study},
    };
    return c;
}

} // namespace

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, fn] : commands()) n.push_back(name);
        return n;
    }();
    return names;
}

std::vector<fs::path> run_command(const std::string& name, const RunConfig& config, const CommandOptions& options) {
    const auto it = std::find_if(commands().begin(), commands().end(), [&](const auto& c) { return c.first == name; });
    if (it == commands().end()) throw InvalidArgument("unknown subcommand '" + name + "'");
    try {
        config.validate();
        ensure_dir(config.out);
        auto artifacts = it->second(config, options);
        artifacts.push_back(write_manifest(config, name, artifacts));
        return artifacts;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::string read_metric(const fs::path& file, const std::string& key) {
    std::ifstream in(file);
    if (!in) throw InvalidArgument("cannot read " + file.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos && line.substr(0, eq) == key) return line.substr(eq + 3);
    }
    throw InvalidArgument("no '" + key + "' in " + file.string());
}

} // namespace neurorate::cli
