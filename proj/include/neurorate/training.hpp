#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurorate/dataset.hpp"
#include "neurorate/neuralnet.hpp"

namespace neurorate {

/// Mean squared error. Throws InvalidArgument on a length mismatch or empty input.
[[nodiscard]] double mse(std::span<const double> observed, std::span<const double> predicted);

/// Mean absolute percentage error in percent. A zero observed value makes
/// it undefined and throws InvalidArgument.
[[nodiscard]] double mape(std::span<const double> observed, std::span<const double> predicted);

/// Sample Pearson correlation. Needs at least two points and nonzero
/// variance in both series.
[[nodiscard]] double pearson(std::span<const double> observed, std::span<const double> predicted);

/// params -= lr * grads.
void sgd_step(ParameterSet& params, const ParameterSet& grads, double lr);

struct AdamSettings {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    ParameterSet first_moment;
    ParameterSet second_moment;
    std::uint64_t step = 0;  // last completed step

    [[nodiscard]] static AdamState like(const ParameterSet& params);
};

/// Bias-corrected Adam update for step `t` (1-based):
/// p -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, std::uint64_t t,
               const AdamSettings& settings);

/// Tracks validation MSE per epoch; improvement means strictly lower.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    /// Records the next epoch's value; returns true when that epoch is the
    /// new best.
    bool update(double validation_mse);
    [[nodiscard]] bool should_stop() const noexcept { return epochs_since_best_ >= patience_; }

    [[nodiscard]] std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update
    [[nodiscard]] double best_value() const noexcept { return best_; }
    [[nodiscard]] std::size_t epochs() const noexcept { return epochs_; }
    [[nodiscard]] std::size_t patience() const noexcept { return patience_; }

private:
    std::size_t patience_;
    std::size_t epochs_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t epochs_since_best_ = 0;
    double best_ = 0.0;
};

enum class OptimizerKind { Sgd, Adam };

[[nodiscard]] std::string_view to_string(OptimizerKind kind) noexcept;

struct TrainConfig {
    std::size_t batch_size = 32;
    double sgd_learning_rate = 1e-3;
    AdamSettings adam;
    std::size_t patience = 6;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool freeze_encoder = false;  // stage 2 keeps the pretrained encoder fixed
    /// Stop once the inference-mode training MSE (Hz^2) falls below this;
    /// 0 disables the check and the extra pass it needs.
    double target_train_mse = 0.0;

    void validate() const;
};

enum class StopReason { Patience, MaxEpochs, TargetReached };

[[nodiscard]] std::string_view to_string(StopReason reason) noexcept;

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;      // mean dropout-mode loss over the epoch, Hz^2
    std::optional<double> train_mse;  // inference mode, only with a target
    double validation_mse = 0.0;  // Hz^2
    double seconds = 0.0;
};

struct StageReport {
    std::string stage;  // "cnn" or "cnn+lstm"
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double learning_rate = 0.0;
    double adam_epsilon = 0.0;
    std::size_t batch_size = 0;
    std::size_t parameters = 0;
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    double best_validation_mse = 0.0;
    StopReason stop = StopReason::MaxEpochs;
};

/// Trains one network in place and restores the parameters of the best
/// validation epoch. Samples are reordered each epoch from (seed, stage,
/// epoch). Within a batch, per-sample gradients are reduced in fixed
/// groups so the result does not depend on `threads`.
StageReport train_stage(Network& net, const SequenceDataset& train, const SequenceDataset& validation,
                        OptimizerKind optimizer, const TrainConfig& config);

/// Inference-mode predictions in Hz for every sequence.
[[nodiscard]] std::vector<double> predict_dataset(const Network& net, const SequenceDataset& data,
                                                  std::size_t threads = 1);

struct EvalMetrics {
    double mse = 0.0;   // Hz^2
    double mape = 0.0;  // percent
    /// Per video ("participant/trial"); absent when a series is constant.
    std::map<std::string, std::optional<double>> pearson;
};

[[nodiscard]] EvalMetrics evaluate(const SequenceDataset& data, std::span<const double> predictions);

struct TrainReport {
    StageReport cnn;
    StageReport full;
    EvalMetrics cnn_test;
    EvalMetrics full_test;
};

struct TrainedModels {
    std::unique_ptr<Network> cnn;
    std::unique_ptr<Network> full;
    TrainReport report;
};

/// Stage 1: CNN with SGD. Stage 2: the full model starts from the stage-1
/// encoder and trains with Adam. Normalization is fitted on `train`.
[[nodiscard]] TrainedModels train_two_stage(const Architecture& arch, const SequenceDataset& train,
                                            const SequenceDataset& validation, const SequenceDataset& test,
                                            const TrainConfig& config);

/// CSV rows: stage,epoch,train_loss,train_mse,validation_mse,seconds.
void write_epoch_log(std::ostream& out, const TrainReport& report);
void write_summary(std::ostream& out, const TrainReport& report);

/// CSV rows: video_id,window_index,y,y_cnn,y_cnnlstm, one per test sequence.
void write_prediction_trace(std::ostream& out, const SequenceDataset& test, std::span<const double> cnn,
                            std::span<const double> full);

/// One within-subject split of one participant.
struct SubjectSplit {
    std::string participant_id;
    const SequenceDataset* train = nullptr;
    const SequenceDataset* validation = nullptr;
    const SequenceDataset* test = nullptr;
};

struct BatchStudyRow {
    std::string participant_id;
    std::size_t batch_size = 0;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    double test_mse = 0.0;
};

/// Trains a fresh CNN per participant and batch size (stage 1 only).
[[nodiscard]] std::vector<BatchStudyRow> batch_size_study(const Architecture& arch,
                                                          std::span<const SubjectSplit> subjects,
                                                          std::span<const std::size_t> batch_sizes,
                                                          const TrainConfig& config);

/// CSV rows: participant,batch_size,epochs,best_epoch,test_mse, then a
/// per-batch-size summary block of mean and spread.
void write_batch_study(std::ostream& out, std::span<const BatchStudyRow> rows);

} // namespace neurorate
