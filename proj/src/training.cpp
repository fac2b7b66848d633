#include "neurorate/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "neurorate/detail/parallel.hpp"
#include "neurorate/error.hpp"

namespace neurorate {

namespace {

// Samples whose gradients are summed together before the per-batch reduction.
constexpr std::size_t kGradientGroup = 4;

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) throw InvalidArgument(std::string(what) + ": series lengths differ");
    if (a.empty()) throw InvalidArgument(std::string(what) + ": empty series");
}

std::string video_key(const SequenceRecord& r) { return r.participant_id + "/" + r.trial_id; }

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double mse(std::span<const double> observed, std::span<const double> predicted) {
    check_pair(observed, predicted, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - predicted[i];
        s += d * d;
    }
    return s / static_cast<double>(observed.size());
}

double mape(std::span<const double> observed, std::span<const double> predicted) {
    check_pair(observed, predicted, "mape");
    double s = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] == 0.0) {
            throw InvalidArgument("mape is undefined: observed value " + std::to_string(i) + " is zero");
        }
        s += std::abs(observed[i] - predicted[i]) / std::abs(observed[i]);
    }
    return 100.0 * s / static_cast<double>(observed.size());
}

double pearson(std::span<const double> observed, std::span<const double> predicted) {
    check_pair(observed, predicted, "pearson");
    if (observed.size() < 2) throw InvalidArgument("pearson needs at least two points");
    const auto n = static_cast<double>(observed.size());
    const double mx = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
    const double my = std::accumulate(predicted.begin(), predicted.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double dx = observed[i] - mx, dy = predicted[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("pearson is undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void sgd_step(ParameterSet& params, const ParameterSet& grads, double lr) {
    if (!params.same_layout(grads)) throw InvalidArgument("sgd_step: gradient layout does not match the parameters");
    params.add_scaled(grads, -lr);
}

AdamState AdamState::like(const ParameterSet& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, std::uint64_t t,
               const AdamSettings& s) {
    if (t < 1) throw InvalidArgument("adam_step: step index starts at 1");
    if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
        !params.same_layout(state.second_moment)) {
        throw InvalidArgument("adam_step: state or gradient layout does not match the parameters");
    }
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto m = state.first_moment[i].array();
        auto v = state.second_moment[i].array();
        const auto g = grads[i].array();
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g.square();
        params[i].array() -= s.learning_rate * (m / c1) / ((v / c2).sqrt() + s.epsilon);
    }
    state.step = t;
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience < 1) throw InvalidArgument("early-stopping patience must be at least 1");
}

bool EarlyStopping::update(double validation_mse) {
    ++epochs_;
    if (best_epoch_ == 0 || validation_mse < best_) {
        best_ = validation_mse;
        best_epoch_ = epochs_;
        epochs_since_best_ = 0;
        return true;
    }
    ++epochs_since_best_;
    return false;
}

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

std::string_view to_string(StopReason reason) noexcept {
    switch (reason) {
        case StopReason::Patience: return "patience";
        case StopReason::MaxEpochs: return "max_epochs";
        case StopReason::TargetReached: return "target_reached";
    }
    return "unknown";
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
    if (patience < 1) throw InvalidArgument("patience must be at least 1");
    if (max_epochs < 1) throw InvalidArgument("max_epochs must be at least 1");
    if (!(sgd_learning_rate > 0.0) || !(adam.learning_rate > 0.0)) {
        throw InvalidArgument("learning rates must be positive");
    }
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw InvalidArgument("Adam decay rates must be in [0, 1)");
    }
    if (!(adam.epsilon > 0.0)) throw InvalidArgument("Adam epsilon must be positive");
    if (threads < 1) throw InvalidArgument("threads must be at least 1");
    if (target_train_mse < 0.0) throw InvalidArgument("target_train_mse must be non-negative");
}

std::vector<double> predict_dataset(const Network& net, const SequenceDataset& data, std::size_t threads) {
    std::vector<double> out(data.size());
    detail::parallel_for(data.size(), threads, [&](std::size_t i) {
        const auto x = net.prepare(data.inputs(i));
        out[i] = net.normalization().to_hz(net.forward(x));
    });
    return out;
}

StageReport train_stage(Network& net, const SequenceDataset& train, const SequenceDataset& validation,
                        OptimizerKind optimizer, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw InvalidArgument("training set is empty");
    if (validation.empty()) throw InvalidArgument("validation set is empty");
    if (train.mode() != validation.mode() || train.z() != validation.z()) {
        throw InvalidArgument("training and validation sets were built with different settings");
    }
    const auto& arch = net.architecture();
    if (train.grid() != arch.grid || train.bands() != arch.bands || train.z() < net.input_count()) {
        throw InvalidArgument("dataset shape does not match the network architecture");
    }

    StageReport report;
    report.stage = std::string(to_string(net.kind()));
    report.optimizer = optimizer;
    report.learning_rate = optimizer == OptimizerKind::Sgd ? config.sgd_learning_rate : config.adam.learning_rate;
    report.adam_epsilon = config.adam.epsilon;
    report.batch_size = config.batch_size;
    report.parameters = count_parameters(net);

    auto& params = net.parameters();
    std::vector<bool> trainable(params.size(), true);
    if (config.freeze_encoder && net.kind() == NetKind::Full) {
        for (std::size_t i = 0; i < params.size(); ++i) trainable[i] = params.name(i).rfind("encoder.", 0) != 0;
    }

    const std::size_t max_groups = (config.batch_size + kGradientGroup - 1) / kGradientGroup;
    std::vector<ParameterSet> group_grads(max_groups, params.zeros_like());
    std::vector<double> group_loss(max_groups);
    ParameterSet grads = params.zeros_like();
    AdamState adam = AdamState::like(params);
    EarlyStopping stopper(config.patience);
    ParameterSet best = params;
    const double scale2 = net.normalization().target_std * net.normalization().target_std;
    const std::uint64_t stage_id = stable_hash(report.stage);
    const std::vector<double> train_targets = config.target_train_mse > 0.0 ? train.targets() : std::vector<double>{};
    const std::vector<double> val_targets = validation.targets();
    std::uint64_t step = 0;

    spdlog::info("stage {}: {} parameters, {} train / {} validation sequences, {} lr {}", report.stage,
                 report.parameters, train.size(), validation.size(), to_string(optimizer), report.learning_rate);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(config.seed, {stage_id, epoch}));
        shuffle(order, shuffle_rng);

        double epoch_loss = 0.0;
        const std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * config.batch_size, hi = std::min(order.size(), lo + config.batch_size);
            const std::size_t groups = (hi - lo + kGradientGroup - 1) / kGradientGroup;
            detail::parallel_for(groups, config.threads, [&](std::size_t g) {
                group_grads[g].set_zero();
                group_loss[g] = 0.0;
                for (std::size_t pos = lo + g * kGradientGroup; pos < std::min(hi, lo + (g + 1) * kGradientGroup); ++pos) {
                    const std::size_t idx = order[pos];
                    const auto x = net.prepare(train.inputs(idx));
                    Rng dropout(derive_seed(config.seed, {stage_id, epoch, b, pos - lo}));
                    group_loss[g] += net.backward(x, net.normalization().standardize(train.target(idx)),
                                                  group_grads[g], &dropout);
                }
            });
            grads.set_zero();
            double batch_loss = 0.0;
            for (std::size_t g = 0; g < groups; ++g) {
                grads.add_scaled(group_grads[g], 1.0);
                batch_loss += group_loss[g];
            }
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("stage " + report.stage + " diverged: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", batch " + std::to_string(b + 1));
            }
            epoch_loss += batch_loss;
            const double inv = 1.0 / static_cast<double>(hi - lo);
            for (std::size_t i = 0; i < grads.size(); ++i) {
                if (trainable[i]) {
                    grads[i] *= inv;
                } else {
                    grads[i].setZero();
                }
            }
            if (optimizer == OptimizerKind::Sgd) {
                sgd_step(params, grads, config.sgd_learning_rate);
            } else {
                adam_step(params, grads, adam, ++step, config.adam);
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = epoch_loss / static_cast<double>(order.size()) * scale2;
        const auto val_pred = predict_dataset(net, validation, config.threads);
        log.validation_mse = mse(val_targets, val_pred);
        if (!std::isfinite(log.validation_mse)) {
            throw DivergenceError("stage " + report.stage + " diverged: non-finite validation MSE at epoch " +
                                  std::to_string(epoch));
        }
        if (config.target_train_mse > 0.0) log.train_mse = mse(train_targets, predict_dataset(net, train, config.threads));
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(log);
        if (stopper.update(log.validation_mse)) best = params;

        spdlog::info("stage {} epoch {}: train loss {:.6g}, validation MSE {:.6g}{}, {:.2f} s", report.stage, epoch,
                     log.train_loss, log.validation_mse,
                     log.train_mse ? fmt::format(", train MSE {:.6g}", *log.train_mse) : std::string(), log.seconds);

        if (log.train_mse && *log.train_mse < config.target_train_mse) {
            report.stop = StopReason::TargetReached;
            break;
        }
        if (stopper.should_stop()) {
            report.stop = StopReason::Patience;
            break;
        }
    }

    params = best;
    report.best_epoch = stopper.best_epoch();
    report.best_validation_mse = stopper.best_value();
    spdlog::info("stage {}: stopped ({}) after {} epochs, keeping epoch {}", report.stage, to_string(report.stop),
                 report.epochs.size(), report.best_epoch);
    return report;
}

EvalMetrics evaluate(const SequenceDataset& data, std::span<const double> predictions) {
    if (predictions.size() != data.size()) throw InvalidArgument("prediction count does not match the dataset");
    const auto targets = data.targets();
    EvalMetrics m;
    m.mse = mse(targets, predictions);
    m.mape = mape(targets, predictions);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_video;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& [y, p] = per_video[video_key(data.records()[i])];
        y.push_back(targets[i]);
        p.push_back(predictions[i]);
    }
    for (const auto& [key, series] : per_video) {
        try {
            m.pearson[key] = pearson(series.first, series.second);
        } catch (const InvalidArgument&) {
            m.pearson[key] = std::nullopt;
        }
    }
    return m;
}

TrainedModels train_two_stage(const Architecture& arch, const SequenceDataset& train,
                              const SequenceDataset& validation, const SequenceDataset& test,
                              const TrainConfig& config) {
    config.validate();
    if (test.empty()) throw InvalidArgument("test set is empty");
    const auto norm = fit_normalization(train);

    TrainedModels out;
    out.cnn = std::make_unique<CnnModel>(arch);
    out.cnn->initialize(config.seed);
    out.cnn->normalization() = norm;
    out.report.cnn = train_stage(*out.cnn, train, validation, OptimizerKind::Sgd, config);

    out.full = std::make_unique<FullModel>(arch);
    out.full->initialize(config.seed);
    out.full->normalization() = norm;
    out.full->copy_encoder_from(*out.cnn);
    out.report.full = train_stage(*out.full, train, validation, OptimizerKind::Adam, config);

    out.report.cnn_test = evaluate(test, predict_dataset(*out.cnn, test, config.threads));
    out.report.full_test = evaluate(test, predict_dataset(*out.full, test, config.threads));
    return out;
}

void write_epoch_log(std::ostream& out, const TrainReport& report) {
    out << "stage,epoch,train_loss,train_mse,validation_mse,seconds\n";
    out.precision(17);
    for (const StageReport* s : {&report.cnn, &report.full}) {
        for (const auto& e : s->epochs) {
            out << s->stage << ',' << e.epoch << ',' << e.train_loss << ',';
            if (e.train_mse) out << *e.train_mse;
            out << ',' << e.validation_mse << ',' << e.seconds << '\n';
        }
    }
}

namespace {

void write_stage_summary(std::ostream& out, const StageReport& s, const EvalMetrics& test) {
    std::vector<double> r;
    std::size_t undefined = 0;
    for (const auto& [key, value] : test.pearson) {
        if (value) {
            r.push_back(*value);
        } else {
            ++undefined;
        }
    }
    const std::string p = "[" + s.stage + "] ";
    out << p << "optimizer = " << to_string(s.optimizer) << '\n'
        << p << "learning_rate = " << s.learning_rate << '\n';
    if (s.optimizer == OptimizerKind::Adam) out << p << "adam_epsilon = " << s.adam_epsilon << '\n';
    out << p << "batch_size = " << s.batch_size << '\n'
        << p << "parameters = " << s.parameters << '\n'
        << p << "epochs = " << s.epochs.size() << '\n'
        << p << "best_epoch = " << s.best_epoch << '\n'
        << p << "best_validation_mse = " << s.best_validation_mse << '\n'
        << p << "stop_reason = " << to_string(s.stop) << '\n'
        << p << "test_mse = " << test.mse << '\n'
        << p << "test_mape_percent = " << test.mape << '\n'
        << p << "videos = " << test.pearson.size() << '\n';
    if (!r.empty()) out << p << "pearson_mean = " << mean_of(r) << '\n';
    if (undefined > 0) out << p << "pearson_undefined = " << undefined << '\n';
}

} // namespace

void write_summary(std::ostream& out, const TrainReport& report) {
    out.precision(10);
    write_stage_summary(out, report.cnn, report.cnn_test);
    write_stage_summary(out, report.full, report.full_test);
}

void write_prediction_trace(std::ostream& out, const SequenceDataset& test, std::span<const double> cnn,
                            std::span<const double> full) {
    if (cnn.size() != test.size() || full.size() != test.size()) {
        throw InvalidArgument("prediction count does not match the test set");
    }
    out << "video_id,window_index,y,y_cnn,y_cnnlstm\n";
    out.precision(10);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& r = test.records()[i];
        out << video_key(r) << ',' << r.start_window + test.z() << ',' << static_cast<double>(r.target) << ','
            << cnn[i] << ',' << full[i] << '\n';
    }
}

std::vector<BatchStudyRow> batch_size_study(const Architecture& arch, std::span<const SubjectSplit> subjects,
                                            std::span<const std::size_t> batch_sizes, const TrainConfig& config) {
    std::vector<BatchStudyRow> rows;
    for (const auto& subject : subjects) {
        if (!subject.train || !subject.validation || !subject.test) {
            throw InvalidArgument("batch-size study: incomplete split for " + subject.participant_id);
        }
        const auto norm = fit_normalization(*subject.train);
        for (std::size_t bs : batch_sizes) {
            TrainConfig c = config;
            c.batch_size = bs;
            CnnModel net(arch);
            net.initialize(config.seed);
            net.normalization() = norm;
            const auto stage = train_stage(net, *subject.train, *subject.validation, OptimizerKind::Sgd, c);
            const auto pred = predict_dataset(net, *subject.test, config.threads);
            rows.push_back({subject.participant_id, bs, stage.epochs.size(), stage.best_epoch,
                            mse(subject.test->targets(), pred)});
        }
    }
    return rows;
}

void write_batch_study(std::ostream& out, std::span<const BatchStudyRow> rows) {
    out.precision(10);
    out << "participant,batch_size,epochs,best_epoch,test_mse\n";
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_size;
    for (const auto& r : rows) {
        out << r.participant_id << ',' << r.batch_size << ',' << r.epochs << ',' << r.best_epoch << ',' << r.test_mse
            << '\n';
        by_size[r.batch_size].first.push_back(r.test_mse);
        by_size[r.batch_size].second.push_back(static_cast<double>(r.epochs));
    }
    out << "\nbatch_size,runs,test_mse_mean,test_mse_min,test_mse_max,epochs_mean,epochs_min,epochs_max\n";
    for (const auto& [bs, v] : by_size) {
        const auto [mlo, mhi] = std::minmax_element(v.first.begin(), v.first.end());
        const auto [elo, ehi] = std::minmax_element(v.second.begin(), v.second.end());
        out << bs << ',' << v.first.size() << ',' << mean_of(v.first) << ',' << *mlo << ',' << *mhi << ','
            << mean_of(v.second) << ',' << *elo << ',' << *ehi << '\n';
    }
}

} // namespace neurorate
