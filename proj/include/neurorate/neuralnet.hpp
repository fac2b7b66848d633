#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "neurorate/dataset.hpp"
#include "neurorate/detail/layers.hpp"
#include "neurorate/rng.hpp"
#include "neurorate/topomap.hpp"

namespace neurorate {

using layers::Matrix;
using layers::Vector;

struct ConvBlock {
    std::size_t convs = 1;    // 3x3 pad-1 convolutions, each followed by ReLU
    std::size_t filters = 32;

    friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

/// Shapes of both networks. Every block ends in a 2x2 max pool.
struct Architecture {
    std::size_t grid = 32;
    std::size_t bands = 5;
    std::size_t z = kDefaultSequenceLength;
    std::vector<ConvBlock> blocks{{4, 32}, {2, 64}, {1, 128}};
    std::size_t lstm_hidden = 128;
    std::size_t variation_filters = 64;
    std::size_t variation_kernel = 3;  // valid padding
    std::size_t dense_units = 512;
    double dropout = 0.5;

    /// 8x8x2 maps, one block of two 3-filter convolutions, hidden 4.
    [[nodiscard]] static Architecture toy();

    [[nodiscard]] std::size_t feature_side() const noexcept { return grid >> blocks.size(); }
    [[nodiscard]] std::size_t feature_channels() const noexcept { return blocks.back().filters; }
    [[nodiscard]] std::size_t feature_size() const noexcept {
        return feature_side() * feature_side() * feature_channels();
    }
    [[nodiscard]] std::size_t variation_side() const noexcept { return feature_side() - variation_kernel + 1; }
    [[nodiscard]] std::size_t variation_size() const noexcept {
        return variation_side() * variation_side() * variation_filters;
    }
    /// Spatial side after each block: grid/2, grid/4, ...
    [[nodiscard]] std::vector<std::size_t> shape_chain() const;

    void validate() const;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Named parameter tensors in a fixed order. Gradients and optimizer state
/// use the same layout.
class ParameterSet {
public:
    std::size_t add(std::string name, std::size_t rows, std::size_t cols);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] Matrix& operator[](std::size_t i) { return values_[i]; }
    [[nodiscard]] const Matrix& operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] const std::string& name(std::size_t i) const { return names_[i]; }
    /// Throws InvalidArgument for an unknown name.
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
    [[nodiscard]] bool contains(std::string_view name) const;
    [[nodiscard]] Matrix& at(std::string_view name) { return values_[index_of(name)]; }
    [[nodiscard]] const Matrix& at(std::string_view name) const { return values_[index_of(name)]; }

    /// Total scalar count.
    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] ParameterSet zeros_like() const;
    void set_zero();
    /// this += scale * other; layouts must match.
    void add_scaled(const ParameterSet& other, double scale);
    [[nodiscard]] bool same_layout(const ParameterSet& other) const noexcept;
    /// Sum of squares over all tensors.
    [[nodiscard]] double squared_norm() const;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
};

/// Per-band input standardization and target scaling, fitted on training data.
struct Normalization {
    std::vector<double> input_mean;
    std::vector<double> input_std;
    double target_mean = 0.0;
    double target_std = 1.0;

    [[nodiscard]] static Normalization identity(std::size_t bands);
    /// Band-major C x (G*G) network input.
    [[nodiscard]] Matrix input(const TopoMap& map) const;
    [[nodiscard]] double standardize(double hz) const noexcept { return (hz - target_mean) / target_std; }
    [[nodiscard]] double to_hz(double standardized) const noexcept { return target_mean + target_std * standardized; }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Statistics over the dataset's unique maps and its targets; a zero spread
/// falls back to 1.
[[nodiscard]] Normalization fit_normalization(const SequenceDataset& train);

/// Shared VGG-style encoder; owns indices into a ParameterSet.
class CnnEncoder {
public:
    struct Trace {
        std::vector<Matrix> cols;     // per conv layer
        std::vector<Matrix> outputs;  // post-ReLU, per conv layer
        std::vector<std::vector<std::uint32_t>> argmax;  // per block
    };

    CnnEncoder() = default;
    CnnEncoder(const Architecture& arch, ParameterSet& params);

    /// bands x grid^2 -> channels x side^2. Records the spatial side at every
    /// block boundary in `sides` when given.
    [[nodiscard]] Matrix forward(const Matrix& input, const ParameterSet& params, Trace* trace,
                                 std::vector<std::size_t>* sides = nullptr) const;
    /// Accumulates parameter gradients; the input gradient is not formed.
    void backward(const Matrix& d_output, const ParameterSet& params, const Trace& trace, ParameterSet& grads) const;

    [[nodiscard]] std::size_t layer_count() const noexcept { return weights_.size(); }

private:
    Architecture arch_;
    std::vector<std::size_t> weights_, biases_;
    std::vector<std::size_t> block_of_;  // conv layer -> block
    std::vector<std::size_t> in_channels_;
};

enum class NetKind { Cnn, Full };

[[nodiscard]] std::string_view to_string(NetKind kind) noexcept;
[[nodiscard]] NetKind parse_net_kind(std::string_view text);

/// Common interface of the two regression networks. Outputs are in
/// standardized target units; predict() converts to Hz.
class Network {
public:
    virtual ~Network() = default;

    [[nodiscard]] virtual NetKind kind() const noexcept = 0;
    [[nodiscard]] const Architecture& architecture() const noexcept { return arch_; }
    [[nodiscard]] ParameterSet& parameters() noexcept { return params_; }
    [[nodiscard]] const ParameterSet& parameters() const noexcept { return params_; }
    [[nodiscard]] Normalization& normalization() noexcept { return norm_; }
    [[nodiscard]] const Normalization& normalization() const noexcept { return norm_; }
    [[nodiscard]] const CnnEncoder& encoder() const noexcept { return encoder_; }

    /// Number of input maps the network reads per sample.
    [[nodiscard]] virtual std::size_t input_count() const noexcept = 0;

    /// Normalized inputs for a sequence of z maps (the CNN keeps the last).
    [[nodiscard]] std::vector<Matrix> prepare(std::span<const TopoMap> maps) const;

    /// Null `dropout` means inference mode.
    [[nodiscard]] virtual double forward(std::span<const Matrix> inputs, Rng* dropout = nullptr) const = 0;

    /// Squared error (y_hat - target)^2 with target in standardized units;
    /// adds its parameter gradient into `grads`.
    virtual double backward(std::span<const Matrix> inputs, double target, ParameterSet& grads,
                            Rng* dropout = nullptr) const = 0;

    /// Inference-mode prediction in Hz.
    [[nodiscard]] double predict(std::span<const TopoMap> maps) const;

    /// Scaled-uniform fan-in init for conv/dense, orthogonal recurrent and
    /// small-uniform input/peephole LSTM matrices, forget bias 1. Each tensor
    /// draws from its own stream keyed by name, so the encoder of both
    /// networks initializes identically for a given seed.
    void initialize(std::uint64_t seed);

    /// Copies every "encoder." tensor from `other`.
    void copy_encoder_from(const Network& other);

    [[nodiscard]] virtual std::unique_ptr<Network> clone() const = 0;

protected:
    explicit Network(const Architecture& arch);
    void check_inputs(std::span<const Matrix> inputs) const;

    Architecture arch_;
    ParameterSet params_;
    Normalization norm_;
    CnnEncoder encoder_;
};

/// Encoder -> flatten -> dense(ReLU) -> dropout -> dense(1).
class CnnModel final : public Network {
public:
    explicit CnnModel(const Architecture& arch = {});

    [[nodiscard]] NetKind kind() const noexcept override { return NetKind::Cnn; }
    [[nodiscard]] std::size_t input_count() const noexcept override { return 1; }
    [[nodiscard]] double forward(std::span<const Matrix> inputs, Rng* dropout = nullptr) const override;
    double backward(std::span<const Matrix> inputs, double target, ParameterSet& grads,
                    Rng* dropout = nullptr) const override;
    [[nodiscard]] std::unique_ptr<Network> clone() const override { return std::make_unique<CnnModel>(*this); }

private:
    std::size_t hidden_w_, hidden_b_, out_w_, out_b_;
};

/// Shared encoder over z maps; an LSTM over the flattened features and a
/// valid convolution over the channel-stacked features are concatenated
/// into dropout -> dense(ReLU) -> dropout -> dense(1).
class FullModel final : public Network {
public:
    explicit FullModel(const Architecture& arch = {});

    [[nodiscard]] NetKind kind() const noexcept override { return NetKind::Full; }
    [[nodiscard]] std::size_t input_count() const noexcept override { return arch_.z; }
    [[nodiscard]] double forward(std::span<const Matrix> inputs, Rng* dropout = nullptr) const override;
    double backward(std::span<const Matrix> inputs, double target, ParameterSet& grads,
                    Rng* dropout = nullptr) const override;
    [[nodiscard]] std::unique_ptr<Network> clone() const override { return std::make_unique<FullModel>(*this); }

    [[nodiscard]] layers::LstmWeights lstm_weights() const;

private:
    struct Trace;
    double run(std::span<const Matrix> inputs, Rng* dropout, Trace* trace) const;

    std::size_t lstm_first_;  // 11 matrices then 4 biases
    std::size_t var_w_, var_b_, hidden_w_, hidden_b_, out_w_, out_b_;
};

[[nodiscard]] std::unique_ptr<Network> make_network(NetKind kind, const Architecture& arch);

[[nodiscard]] std::size_t count_parameters(const ParameterSet& params) noexcept;
[[nodiscard]] std::size_t count_parameters(const Network& net) noexcept;

/// "NRMD" file: architecture descriptor, tensor list with shapes,
/// normalization, then f32 parameters in descriptor order.
void save_network(const Network& net, const std::filesystem::path& path);
[[nodiscard]] std::unique_ptr<Network> load_network(const std::filesystem::path& path);

} // namespace neurorate
