#include "neurorate/neuralnet.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/QR>

#include "neurorate/detail/binary_io.hpp"
#include "neurorate/error.hpp"

namespace neurorate {

namespace {

constexpr char kModelMagic[5] = "NRMD";
constexpr std::uint16_t kModelVersion = 1;
constexpr std::size_t kKernel = 3;

constexpr const char* kLstmNames[] = {"lstm.W_xi", "lstm.W_hi", "lstm.W_ci", "lstm.W_xf", "lstm.W_hf",
                                      "lstm.W_cf", "lstm.W_xc", "lstm.W_hc", "lstm.W_xo", "lstm.W_ho",
                                      "lstm.W_co", "lstm.b_i",  "lstm.b_f",  "lstm.b_c",  "lstm.b_o"};

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unflatten(const Vector& v, std::size_t rows, std::size_t cols) {
    return Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void fill_uniform(Matrix& m, double limit, Rng& rng) {
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = limit * (2.0 * uniform01(rng) - 1.0);
}

void fill_orthogonal(Matrix& m, Rng& rng) {
    // Box-Muller Gaussian, then the Q factor with R's diagonal signs folded in.
    Eigen::MatrixXd a(m.rows(), m.cols());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
        a.data()[k] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
    }
    m = q;
}

layers::LstmWeights lstm_refs(const ParameterSet& p, std::size_t first) {
    auto w = [&](std::size_t k) -> const Matrix& { return p[first + k]; };
    return {w(0), w(1), w(2), w(3), w(4), w(5), w(6), w(7), w(8), w(9), w(10), w(11), w(12), w(13), w(14)};
}

layers::LstmGrads lstm_refs(ParameterSet& p, std::size_t first) {
    auto w = [&](std::size_t k) -> Matrix& { return p[first + k]; };
    return {w(0), w(1), w(2), w(3), w(4), w(5), w(6), w(7), w(8), w(9), w(10), w(11), w(12), w(13), w(14)};
}

} // namespace

Architecture Architecture::toy() {
    Architecture a;
    a.grid = 8;
    a.bands = 2;
    a.z = 7;
    a.blocks = {{2, 3}};
    a.lstm_hidden = 4;
    a.variation_filters = 2;
    a.variation_kernel = 3;
    a.dense_units = 6;
    return a;
}

std::vector<std::size_t> Architecture::shape_chain() const {
    std::vector<std::size_t> sides{grid};
    for (std::size_t b = 0; b < blocks.size(); ++b) sides.push_back(grid >> (b + 1));
    return sides;
}

void Architecture::validate() const {
    if (grid == 0 || bands == 0 || z == 0) throw InvalidArgument("architecture: grid, bands and z must be positive");
    if (blocks.empty()) throw InvalidArgument("architecture: the encoder needs at least one block");
    for (const auto& b : blocks) {
        if (b.convs == 0 || b.filters == 0) throw InvalidArgument("architecture: empty convolution block");
    }
    if (blocks.size() >= 32 || grid % (std::size_t{1} << blocks.size()) != 0) {
        throw InvalidArgument("architecture: grid " + std::to_string(grid) + " is not divisible by 2^" +
                              std::to_string(blocks.size()));
    }
    if (variation_kernel == 0 || variation_kernel > feature_side()) {
        throw InvalidArgument("architecture: variation kernel does not fit the encoder output");
    }
    if (lstm_hidden == 0 || variation_filters == 0 || dense_units == 0) {
        throw InvalidArgument("architecture: layer widths must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("architecture: dropout must be in [0, 1)");
}

std::size_t ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
    if (contains(name)) throw InvalidArgument("duplicate parameter " + name);
    names_.push_back(std::move(name));
    values_.push_back(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
    return values_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    throw InvalidArgument("unknown parameter " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterSet::count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet z = *this;
    z.set_zero();
    return z;
}

void ParameterSet::set_zero() {
    for (auto& v : values_) v.setZero();
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
    if (!same_layout(other)) throw InvalidArgument("parameter layouts differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

bool ParameterSet::same_layout(const ParameterSet& other) const noexcept {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i].rows() != other.values_[i].rows() || values_[i].cols() != other.values_[i].cols()) return false;
    }
    return true;
}

double ParameterSet::squared_norm() const {
    double s = 0.0;
    for (const auto& v : values_) s += v.squaredNorm();
    return s;
}

Normalization Normalization::identity(std::size_t bands) {
    Normalization n;
    n.input_mean.assign(bands, 0.0);
    n.input_std.assign(bands, 1.0);
    return n;
}

Matrix Normalization::input(const TopoMap& map) const {
    const std::size_t bands = map.bands(), area = map.grid() * map.grid();
    if (input_mean.size() != bands || input_std.size() != bands) {
        throw InvalidArgument("normalization has " + std::to_string(input_mean.size()) + " bands, map has " +
                              std::to_string(bands));
    }
    Matrix x(static_cast<Eigen::Index>(bands), static_cast<Eigen::Index>(area));
    const auto data = map.data();
    for (std::size_t p = 0; p < area; ++p) {
        for (std::size_t b = 0; b < bands; ++b) {
            x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(p)) =
                (static_cast<double>(data[p * bands + b]) - input_mean[b]) / input_std[b];
        }
    }
    return x;
}

Normalization fit_normalization(const SequenceDataset& train) {
    if (train.empty()) throw InvalidArgument("cannot fit normalization on an empty dataset");
    const std::size_t bands = train.bands();
    Normalization n = Normalization::identity(bands);
    std::vector<double> sum(bands, 0.0), sq(bands, 0.0);
    std::size_t per_band = 0;
    for (const auto& m : train.pool()) {
        const auto d = m.data();
        for (std::size_t k = 0; k < d.size(); ++k) sum[k % bands] += d[k];
        per_band += d.size() / bands;
    }
    for (std::size_t b = 0; b < bands; ++b) n.input_mean[b] = sum[b] / static_cast<double>(per_band);
    for (const auto& m : train.pool()) {
        const auto d = m.data();
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double e = d[k] - n.input_mean[k % bands];
            sq[k % bands] += e * e;
        }
    }
    for (std::size_t b = 0; b < bands; ++b) {
        const double s = std::sqrt(sq[b] / static_cast<double>(per_band));
        n.input_std[b] = s > 0.0 ? s : 1.0;
    }
    const auto t = train.targets();
    double mean = 0.0;
    for (double v : t) mean += v;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(t.size()));
    n.target_mean = mean;
    n.target_std = sd > 0.0 ? sd : 1.0;
    return n;
}

CnnEncoder::CnnEncoder(const Architecture& arch, ParameterSet& params) : arch_(arch) {
    std::size_t in = arch.bands;
    for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
        for (std::size_t k = 0; k < arch.blocks[b].convs; ++k) {
            const std::string base = "encoder.block" + std::to_string(b + 1) + ".conv" + std::to_string(k + 1);
            const std::size_t out = arch.blocks[b].filters;
            weights_.push_back(params.add(base + ".weight", out, in * kKernel * kKernel));
            biases_.push_back(params.add(base + ".bias", out, 1));
            block_of_.push_back(b);
            in_channels_.push_back(in);
            in = out;
        }
    }
}

Matrix CnnEncoder::forward(const Matrix& input, const ParameterSet& params, Trace* trace,
                           std::vector<std::size_t>* sides) const {
    if (static_cast<std::size_t>(input.rows()) != arch_.bands ||
        static_cast<std::size_t>(input.cols()) != arch_.grid * arch_.grid) {
        throw InvalidArgument("encoder input must be " + std::to_string(arch_.bands) + " x " +
                              std::to_string(arch_.grid) + "^2");
    }
    if (trace) *trace = {};
    if (sides) sides->assign(1, arch_.grid);
    Matrix x = input;
    std::size_t side = arch_.grid, layer = 0;
    for (std::size_t b = 0; b < arch_.blocks.size(); ++b) {
        for (std::size_t k = 0; k < arch_.blocks[b].convs; ++k, ++layer) {
            Matrix cols;
            Matrix y = layers::conv_forward(x, {side, side}, params[weights_[layer]], params[biases_[layer]], kKernel, 1,
                                            trace ? &cols : nullptr);
            layers::relu_inplace(y);
            if (trace) {
                trace->cols.push_back(std::move(cols));
                trace->outputs.push_back(y);
            }
            x = std::move(y);
        }
        std::vector<std::uint32_t> argmax;
        x = layers::maxpool2(x, {side, side}, trace ? &argmax : nullptr);
        if (trace) trace->argmax.push_back(std::move(argmax));
        side /= 2;
        if (sides) sides->push_back(side);
    }
    if (side != arch_.feature_side()) throw Error("encoder shape chain ended at " + std::to_string(side));
    return x;
}

void CnnEncoder::backward(const Matrix& d_output, const ParameterSet& params, const Trace& trace,
                          ParameterSet& grads) const {
    Matrix d = d_output;
    std::size_t layer = weights_.size();
    for (std::size_t b = arch_.blocks.size(); b-- > 0;) {
        const std::size_t side = arch_.grid >> b;
        d = layers::maxpool2_backward(d, arch_.blocks[b].filters, {side, side}, trace.argmax[b]);
        for (std::size_t k = 0; k < arch_.blocks[b].convs; ++k) {
            --layer;
            layers::relu_backward(d, trace.outputs[layer]);
            d = layers::conv_backward(d, trace.cols[layer], params[weights_[layer]], grads[weights_[layer]],
                                      grads[biases_[layer]], in_channels_[layer], {side, side}, kKernel, 1, layer > 0);
        }
    }
}

std::string_view to_string(NetKind kind) noexcept { return kind == NetKind::Cnn ? "cnn" : "cnn+lstm"; }

NetKind parse_net_kind(std::string_view text) {
    if (text == "cnn") return NetKind::Cnn;
    if (text == "cnn+lstm" || text == "full") return NetKind::Full;
    throw InvalidArgument("unknown network kind '" + std::string(text) + "' (expected cnn or cnn+lstm)");
}

Network::Network(const Architecture& arch) : arch_(arch), norm_(Normalization::identity(arch.bands)) {
    arch_.validate();
    encoder_ = CnnEncoder(arch_, params_);
}

void Network::check_inputs(std::span<const Matrix> inputs) const {
    if (inputs.size() != input_count()) {
        throw InvalidArgument(std::string(to_string(kind())) + " expects " + std::to_string(input_count()) +
                              " input maps, got " + std::to_string(inputs.size()));
    }
}

std::vector<Matrix> Network::prepare(std::span<const TopoMap> maps) const {
    if (maps.size() != arch_.z && maps.size() != input_count()) {
        throw InvalidArgument("expected a sequence of " + std::to_string(arch_.z) + " maps, got " + std::to_string(maps.size()));
    }
    for (const auto& m : maps) {
        if (m.grid() != arch_.grid || m.bands() != arch_.bands) throw InvalidArgument("map shape does not match the network");
    }
    std::vector<Matrix> x;
    for (std::size_t t = maps.size() - input_count(); t < maps.size(); ++t) x.push_back(norm_.input(maps[t]));
    return x;
}

double Network::predict(std::span<const TopoMap> maps) const {
    const auto x = prepare(maps);
    return norm_.to_hz(forward(x));
}

void Network::initialize(std::uint64_t seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const std::string& name = params_.name(i);
        Matrix& m = params_[i];
        Rng rng(derive_seed(seed, {stable_hash(name)}));
        const auto fan_in = static_cast<double>(m.cols());
        if (starts_with(name, "lstm.b_")) {
            m.setConstant(name == "lstm.b_f" ? 1.0 : 0.0);
        } else if (ends_with(name, ".bias")) {
            m.setZero();
        } else if (starts_with(name, "lstm.W_h")) {
            fill_orthogonal(m, rng);
        } else if (starts_with(name, "lstm.W_x")) {
            fill_uniform(m, 1.0 / std::sqrt(fan_in), rng);
        } else if (starts_with(name, "lstm.W_c")) {
            fill_uniform(m, 0.1 / std::sqrt(fan_in), rng);
        } else if (name == "head.output.weight") {
            fill_uniform(m, std::sqrt(3.0 / fan_in), rng);
        } else {
            fill_uniform(m, std::sqrt(6.0 / fan_in), rng);
        }
    }
}

void Network::copy_encoder_from(const Network& other) {
    if (!(other.arch_.grid == arch_.grid && other.arch_.bands == arch_.bands && other.arch_.blocks == arch_.blocks)) {
        throw InvalidArgument("encoder architectures differ");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (starts_with(params_.name(i), "encoder.")) params_[i] = other.params_.at(params_.name(i));
    }
}

CnnModel::CnnModel(const Architecture& arch) : Network(arch) {
    hidden_w_ = params_.add("head.hidden.weight", arch_.dense_units, arch_.feature_size());
    hidden_b_ = params_.add("head.hidden.bias", arch_.dense_units, 1);
    out_w_ = params_.add("head.output.weight", 1, arch_.dense_units);
    out_b_ = params_.add("head.output.bias", 1, 1);
}

double CnnModel::forward(std::span<const Matrix> inputs, Rng* dropout) const {
    check_inputs(inputs);
    const Vector v = flatten(encoder_.forward(inputs[0], params_, nullptr));
    Vector a = (params_[hidden_w_] * v + params_[hidden_b_].col(0)).cwiseMax(0.0);
    if (dropout) a = a.cwiseProduct(layers::dropout_mask(static_cast<std::size_t>(a.size()), arch_.dropout, *dropout));
    return (params_[out_w_] * a)(0) + params_[out_b_](0, 0);
}

double CnnModel::backward(std::span<const Matrix> inputs, double target, ParameterSet& grads, Rng* dropout) const {
    check_inputs(inputs);
    CnnEncoder::Trace trace;
    const Matrix feat = encoder_.forward(inputs[0], params_, &trace);
    const Vector v = flatten(feat);
    const Vector hidden = (params_[hidden_w_] * v + params_[hidden_b_].col(0)).cwiseMax(0.0);
    Vector mask = Vector::Ones(hidden.size());
    if (dropout) mask = layers::dropout_mask(static_cast<std::size_t>(hidden.size()), arch_.dropout, *dropout);
    const Vector a = hidden.cwiseProduct(mask);
    const double y = (params_[out_w_] * a)(0) + params_[out_b_](0, 0);

    const double dy = 2.0 * (y - target);
    grads[out_w_].row(0) += dy * a.transpose();
    grads[out_b_](0, 0) += dy;
    Vector da = dy * params_[out_w_].row(0).transpose();
    da = da.cwiseProduct(mask);
    da = (hidden.array() > 0.0).select(da, 0.0);
    grads[hidden_w_].noalias() += da * v.transpose();
    grads[hidden_b_].col(0) += da;
    const Vector dv = params_[hidden_w_].transpose() * da;
    encoder_.backward(unflatten(dv, static_cast<std::size_t>(feat.rows()), static_cast<std::size_t>(feat.cols())),
                      params_, trace, grads);
    return (y - target) * (y - target);
}

struct FullModel::Trace {
    std::vector<CnnEncoder::Trace> encoder;
    std::vector<layers::LstmStep> steps;
    Matrix var_cols;
    Matrix var_out;
    Vector mask1, mask2;
    Vector concat;  // after dropout
    Vector hidden;  // post-ReLU, before dropout
    Vector a;       // after dropout
};

FullModel::FullModel(const Architecture& arch) : Network(arch) {
    const std::size_t h = arch_.lstm_hidden, d = arch_.feature_size();
    lstm_first_ = params_.size();
    for (std::size_t k = 0; k < 11; ++k) {
        const std::string name = kLstmNames[k];
        params_.add(name, h, name[7] == 'x' ? d : h);
    }
    for (std::size_t k = 11; k < 15; ++k) params_.add(kLstmNames[k], h, 1);
    const std::size_t var_in = arch_.z * arch_.feature_channels() * arch_.variation_kernel * arch_.variation_kernel;
    var_w_ = params_.add("variation.weight", arch_.variation_filters, var_in);
    var_b_ = params_.add("variation.bias", arch_.variation_filters, 1);
    hidden_w_ = params_.add("head.hidden.weight", arch_.dense_units, h + arch_.variation_size());
    hidden_b_ = params_.add("head.hidden.bias", arch_.dense_units, 1);
    out_w_ = params_.add("head.output.weight", 1, arch_.dense_units);
    out_b_ = params_.add("head.output.bias", 1, 1);
}

layers::LstmWeights FullModel::lstm_weights() const { return lstm_refs(params_, lstm_first_); }

double FullModel::run(std::span<const Matrix> inputs, Rng* dropout, Trace* trace) const {
    check_inputs(inputs);
    const std::size_t z = arch_.z, cf = arch_.feature_channels(), side = arch_.feature_side();
    const auto w = lstm_weights();
    if (trace) trace->encoder.resize(z);

    Matrix stacked(static_cast<Eigen::Index>(z * cf), static_cast<Eigen::Index>(side * side));
    Vector h = Vector::Zero(static_cast<Eigen::Index>(arch_.lstm_hidden));
    Vector c = h;
    for (std::size_t t = 0; t < z; ++t) {
        const Matrix feat = encoder_.forward(inputs[t], params_, trace ? &trace->encoder[t] : nullptr);
        stacked.middleRows(static_cast<Eigen::Index>(t * cf), static_cast<Eigen::Index>(cf)) = feat;
        auto step = layers::lstm_forward(w, flatten(feat), h, c);
        h = step.h;
        c = step.c;
        if (trace) trace->steps.push_back(std::move(step));
    }

    Matrix var_cols;
    Matrix var_out = layers::conv_forward(stacked, {side, side}, params_[var_w_], params_[var_b_], arch_.variation_kernel,
                                          0, trace ? &var_cols : nullptr);
    layers::relu_inplace(var_out);

    Vector concat(h.size() + var_out.size());
    concat << h, flatten(var_out);
    Vector mask1 = Vector::Ones(concat.size());
    if (dropout) mask1 = layers::dropout_mask(static_cast<std::size_t>(concat.size()), arch_.dropout, *dropout);
    concat = concat.cwiseProduct(mask1);

    const Vector hidden = (params_[hidden_w_] * concat + params_[hidden_b_].col(0)).cwiseMax(0.0);
    Vector mask2 = Vector::Ones(hidden.size());
    if (dropout) mask2 = layers::dropout_mask(static_cast<std::size_t>(hidden.size()), arch_.dropout, *dropout);
    const Vector a = hidden.cwiseProduct(mask2);
    const double y = (params_[out_w_] * a)(0) + params_[out_b_](0, 0);

    if (trace) {
        trace->var_cols = std::move(var_cols);
        trace->var_out = std::move(var_out);
        trace->mask1 = std::move(mask1);
        trace->mask2 = std::move(mask2);
        trace->concat = std::move(concat);
        trace->hidden = hidden;
        trace->a = a;
    }
    return y;
}

double FullModel::forward(std::span<const Matrix> inputs, Rng* dropout) const { return run(inputs, dropout, nullptr); }

double FullModel::backward(std::span<const Matrix> inputs, double target, ParameterSet& grads, Rng* dropout) const {
    Trace tr;
    const double y = run(inputs, dropout, &tr);
    const std::size_t z = arch_.z, cf = arch_.feature_channels(), side = arch_.feature_side();
    const auto hsize = static_cast<Eigen::Index>(arch_.lstm_hidden);

    const double dy = 2.0 * (y - target);
    grads[out_w_].row(0) += dy * tr.a.transpose();
    grads[out_b_](0, 0) += dy;
    Vector da = (dy * params_[out_w_].row(0).transpose()).cwiseProduct(tr.mask2);
    da = (tr.hidden.array() > 0.0).select(da, 0.0);
    grads[hidden_w_].noalias() += da * tr.concat.transpose();
    grads[hidden_b_].col(0) += da;
    const Vector d_concat = (params_[hidden_w_].transpose() * da).cwiseProduct(tr.mask1);

    Matrix d_var = unflatten(d_concat.tail(d_concat.size() - hsize), arch_.variation_filters,
                             arch_.variation_side() * arch_.variation_side());
    layers::relu_backward(d_var, tr.var_out);
    const Matrix d_stacked = layers::conv_backward(d_var, tr.var_cols, params_[var_w_], grads[var_w_], grads[var_b_],
                                                   z * cf, {side, side}, arch_.variation_kernel, 0, true);

    std::vector<Matrix> d_feat(z);
    for (std::size_t t = 0; t < z; ++t) {
        d_feat[t] = d_stacked.middleRows(static_cast<Eigen::Index>(t * cf), static_cast<Eigen::Index>(cf));
    }

    const auto w = lstm_weights();
    auto g = lstm_refs(grads, lstm_first_);
    Vector dh = d_concat.head(hsize);
    Vector dc = Vector::Zero(hsize);
    for (std::size_t t = z; t-- > 0;) {
        Vector dx, dh_prev, dc_prev;
        layers::lstm_backward(w, tr.steps[t], dh, dc, g, &dx, dh_prev, dc_prev);
        d_feat[t] += unflatten(dx, cf, side * side);
        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
    }
    for (std::size_t t = 0; t < z; ++t) encoder_.backward(d_feat[t], params_, tr.encoder[t], grads);
    return (y - target) * (y - target);
}

std::unique_ptr<Network> make_network(NetKind kind, const Architecture& arch) {
    if (kind == NetKind::Cnn) return std::make_unique<CnnModel>(arch);
    return std::make_unique<FullModel>(arch);
}

std::size_t count_parameters(const ParameterSet& params) noexcept { return params.count(); }
std::size_t count_parameters(const Network& net) noexcept { return net.parameters().count(); }

void save_network(const Network& net, const std::filesystem::path& path) {
    using namespace detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file " + path.string());
    const auto& a = net.architecture();
    write_magic(out, kModelMagic);
    write_le<std::uint16_t>(out, kModelVersion);
    write_le<std::uint8_t>(out, net.kind() == NetKind::Cnn ? 0 : 1);
    for (auto v : {a.grid, a.bands, a.z, a.blocks.size()}) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    for (const auto& b : a.blocks) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.convs));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.filters));
    }
    for (auto v : {a.lstm_hidden, a.variation_filters, a.variation_kernel, a.dense_units}) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    write_le<double>(out, a.dropout);

    const auto& p = net.parameters();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
        write_cstring(out, p.name(i));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p[i].rows()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p[i].cols()));
    }

    const auto& n = net.normalization();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.input_mean.size()));
    for (double v : n.input_mean) write_le<double>(out, v);
    for (double v : n.input_std) write_le<double>(out, v);
    write_le<double>(out, n.target_mean);
    write_le<double>(out, n.target_std);

    for (std::size_t i = 0; i < p.size(); ++i) {
        for (Eigen::Index k = 0; k < p[i].size(); ++k) write_le<float>(out, static_cast<float>(p[i].data()[k]));
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::unique_ptr<Network> load_network(const std::filesystem::path& path) {
    using namespace detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file " + path.string());
    expect_magic(in, kModelMagic, "model file");
    const auto version = read_le<std::uint16_t>(in, "model version");
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
    const auto kind_code = read_le<std::uint8_t>(in, "network kind");
    if (kind_code > 1) throw FormatError("unknown network kind code " + std::to_string(kind_code));

    Architecture a;
    a.grid = read_le<std::uint32_t>(in, "grid");
    a.bands = read_le<std::uint32_t>(in, "bands");
    a.z = read_le<std::uint32_t>(in, "z");
    const auto nblocks = read_le<std::uint32_t>(in, "block count");
    if (nblocks == 0 || nblocks > 16) throw FormatError("implausible encoder block count");
    a.blocks.clear();
    for (std::uint32_t b = 0; b < nblocks; ++b) {
        ConvBlock blk;
        blk.convs = read_le<std::uint32_t>(in, "block convs");
        blk.filters = read_le<std::uint32_t>(in, "block filters");
        a.blocks.push_back(blk);
    }
    a.lstm_hidden = read_le<std::uint32_t>(in, "lstm hidden");
    a.variation_filters = read_le<std::uint32_t>(in, "variation filters");
    a.variation_kernel = read_le<std::uint32_t>(in, "variation kernel");
    a.dense_units = read_le<std::uint32_t>(in, "dense units");
    a.dropout = read_le<double>(in, "dropout");
    std::unique_ptr<Network> net;
    try {
        net = make_network(kind_code == 0 ? NetKind::Cnn : NetKind::Full, a);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("model architecture is invalid: ") + e.what());
    }

    auto& p = net->parameters();
    const auto count = read_le<std::uint32_t>(in, "tensor count");
    if (count != p.size()) throw FormatError("model tensor count does not match its architecture");
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto name = read_cstring(in, "tensor name");
        const auto rows = read_le<std::uint32_t>(in, "tensor rows");
        const auto cols = read_le<std::uint32_t>(in, "tensor cols");
        if (name != p.name(i) || rows != p[i].rows() || cols != p[i].cols()) {
            throw FormatError("model tensor " + std::to_string(i) + " (" + name + ") does not match its architecture");
        }
    }

    auto& n = net->normalization();
    const auto bands = read_le<std::uint32_t>(in, "normalization bands");
    if (bands != a.bands) throw FormatError("normalization band count does not match the architecture");
    for (auto& v : n.input_mean) v = read_le<double>(in, "input mean");
    for (auto& v : n.input_std) v = read_le<double>(in, "input std");
    n.target_mean = read_le<double>(in, "target mean");
    n.target_std = read_le<double>(in, "target std");

    for (std::size_t i = 0; i < p.size(); ++i) {
        for (Eigen::Index k = 0; k < p[i].size(); ++k) p[i].data()[k] = read_le<float>(in, "parameter");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model parameters");
    return net;
}

} // namespace neurorate
