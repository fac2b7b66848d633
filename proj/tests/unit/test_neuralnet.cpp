#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "net_oracle.hpp"
#include "neurorate/error.hpp"
#include "neurorate/neuralnet.hpp"
#include "test_paths.hpp"

using namespace neurorate;

namespace {

std::vector<Matrix> random_inputs(const Architecture& a, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Matrix> x;
    for (std::size_t t = 0; t < n; ++t) {
        Matrix m(static_cast<Eigen::Index>(a.bands), static_cast<Eigen::Index>(a.grid * a.grid));
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 2.0 * uniform01(rng) - 1.0;
        x.push_back(m);
    }
    return x;
}

// Initialized weights plus nonzero biases so no group is trivially zero.
void randomize(Network& net, std::uint64_t seed) {
    net.initialize(seed);
    Rng rng(seed + 1);
    auto& p = net.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i].cols() == 1) {
            for (Eigen::Index k = 0; k < p[i].size(); ++k) p[i].data()[k] += 0.4 * uniform01(rng) - 0.2;
        }
    }
}

double rel_error(const Matrix& a, const Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

using OracleLoss = std::function<double(const oracle::Weights&)>;

// Central differences of the oracle loss for every scalar of tensor `name`.
Matrix finite_difference(const oracle::Weights& w, const std::string& name, const OracleLoss& loss, double step = 1e-4) {
    const auto& t = w[name];
    Matrix g(static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
    oracle::Weights probe = w;
    auto& v = probe.t.at(name).v;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double orig = v[k];
        v[k] = orig + step;
        const double up = loss(probe);
        v[k] = orig - step;
        const double down = loss(probe);
        v[k] = orig;
        g.data()[k] = (up - down) / (2.0 * step);
    }
    return g;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(Layers, IdentityKernelPassesInputThrough) {
    Matrix x(1, 16);
    for (int k = 0; k < 16; ++k) x(0, k) = k - 7.5;
    Matrix w = Matrix::Zero(1, 9), b = Matrix::Zero(1, 1);
    w(0, 4) = 1.0;
    const Matrix y = layers::conv_forward(x, {4, 4}, w, b, 3, 1);
    EXPECT_EQ(y, x);
}

TEST(Layers, ConvolutionMatchesNestedLoops) {
    Rng rng(5);
    Matrix x(3, 8 * 8), w(4, 27), b(4, 1);
    for (auto* m : {&x, &w, &b}) {
        for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = 2.0 * uniform01(rng) - 1.0;
    }
    ParameterSet ps;
    ps.add("w", 4, 27) ;
    ps.add("b", 4, 1);
    ps[0] = w;
    ps[1] = b;
    const auto ow = oracle::Weights::from(ps);
    for (int pad : {0, 1}) {
        const Matrix y = layers::conv_forward(x, {8, 8}, w, b, 3, static_cast<std::size_t>(pad));
        const auto ref = oracle::conv(oracle::volume_from(x, 8), ow["w"], ow["b"], 3, pad);
        ASSERT_EQ(static_cast<std::size_t>(y.size()), ref.v.size());
        for (std::size_t k = 0; k < ref.v.size(); ++k) EXPECT_NEAR(y.data()[k], ref.v[k], 1e-12);
    }
}

TEST(Layers, Im2colAndCol2imAreAdjoint) {
    Rng rng(9);
    Matrix x(2, 25), c(18, 25);
    for (auto* m : {&x, &c}) {
        for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = uniform01(rng);
    }
    const double lhs = (layers::im2col(x, {5, 5}, 3, 1).array() * c.array()).sum();
    const double rhs = (x.array() * layers::col2im(c, 2, {5, 5}, 3, 1).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Layers, MaxPoolRoutesToTheWinner) {
    Matrix x(1, 16);
    x << 1, 2, 5, 0, 3, 4, 1, 1, 0, 0, 9, 8, 0, -1, 7, 6;
    std::vector<std::uint32_t> arg;
    const Matrix y = layers::maxpool2(x, {4, 4}, &arg);
    Matrix expected(1, 4);
    expected << 4, 5, 0, 9;
    EXPECT_EQ(y, expected);
    Matrix d(1, 4);
    d << 1, 2, 3, 4;
    const Matrix dx = layers::maxpool2_backward(d, 1, {4, 4}, arg);
    EXPECT_EQ(dx(0, 5), 1.0);
    EXPECT_EQ(dx(0, 2), 2.0);
    EXPECT_EQ(dx(0, 8), 3.0);  // tie: first in window order
    EXPECT_EQ(dx(0, 10), 4.0);
    EXPECT_EQ(dx.sum(), 10.0);
}

TEST(Lstm, ZeroWeightsGiveZeroState) {
    FullModel net(Architecture::toy());
    const auto w = net.lstm_weights();
    const Vector x = Vector::Random(48), zero = Vector::Zero(4);
    const auto s = layers::lstm_forward(w, x, zero, zero);
    EXPECT_EQ(s.h, zero);
    EXPECT_EQ(s.c, zero);
    EXPECT_EQ(s.i, Vector::Constant(4, 0.5));
}

TEST(Lstm, ScalarHandCase) {
    ParameterSet p;
    for (const char* n : {"W_xi", "W_hi", "W_ci", "W_xf", "W_hf", "W_cf", "W_xc", "W_hc", "W_xo", "W_ho", "W_co"}) {
        p.add(n, 1, 1);
        p.at(n).setConstant(1.0);
    }
    for (const char* n : {"b_i", "b_f", "b_c", "b_o"}) p.add(n, 1, 1);
    const layers::LstmWeights w{p.at("W_xi"), p.at("W_hi"), p.at("W_ci"), p.at("W_xf"), p.at("W_hf"),
                                p.at("W_cf"), p.at("W_xc"), p.at("W_hc"), p.at("W_xo"), p.at("W_ho"),
                                p.at("W_co"), p.at("b_i"),  p.at("b_f"),  p.at("b_c"),  p.at("b_o")};
    const auto s = layers::lstm_forward(w, Vector::Zero(1), Vector::Zero(1), Vector::Ones(1));
    const double gate = 1.0 / (1.0 + std::exp(-1.0));
    EXPECT_NEAR(s.i(0), 0.7310585786300049, 1e-15);
    EXPECT_NEAR(s.f(0), gate, 1e-15);
    EXPECT_NEAR(s.c(0), gate, 1e-15);  // f * 1 + i * tanh(0)
    EXPECT_NEAR(s.o(0), 0.6750375273768237, 1e-15);
    EXPECT_NEAR(s.h(0), 0.421029377428353, 1e-12);
}

TEST(Lstm, GatesStayInUnitInterval) {
    FullModel net(Architecture::toy());
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        randomize(net, static_cast<std::uint64_t>(trial));
        for (std::size_t i = 0; i < net.parameters().size(); ++i) net.parameters()[i] *= 5.0;
        const auto w = net.lstm_weights();
        Vector x = Vector::Random(48) * 10.0, h = Vector::Random(4), c = Vector::Random(4) * 3.0;
        const auto s = layers::lstm_forward(w, x, h, c);
        for (const Vector* g : {&s.i, &s.f, &s.o}) {
            EXPECT_TRUE(((g->array() >= 0.0) && (g->array() <= 1.0)).all());
        }
    }
}

TEST(Encoder, ShapeChainOfTheDefaultArchitecture) {
    CnnModel net;
    net.initialize(1);
    const auto x = random_inputs(net.architecture(), 1, 2);
    std::vector<std::size_t> sides;
    const Matrix feat = net.encoder().forward(x[0], net.parameters(), nullptr, &sides);
    EXPECT_EQ(sides, (std::vector<std::size_t>{32, 16, 8, 4}));
    EXPECT_EQ(feat.rows(), 128);
    EXPECT_EQ(feat.cols(), 16);
    EXPECT_EQ(net.encoder().layer_count(), 7u);
    EXPECT_THROW((void)net.encoder().forward(Matrix::Zero(5, 100), net.parameters(), nullptr), InvalidArgument);
}

TEST(Encoder, ZeroInputAndBiasesGiveZero) {
    CnnModel net;
    net.initialize(3);
    const Matrix feat = net.encoder().forward(Matrix::Zero(5, 1024), net.parameters(), nullptr);
    EXPECT_EQ(feat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Models, ZeroEverythingPredictsZero) {
    FullModel full;
    CnnModel cnn;
    std::vector<Matrix> x(7, Matrix::Zero(5, 1024));
    EXPECT_EQ(full.forward(x), 0.0);
    EXPECT_EQ(cnn.forward(std::span(x).last(1)), 0.0);
    std::vector<TopoMap> maps(7, TopoMap(32, 5));
    EXPECT_EQ(full.predict(maps), 0.0);
    EXPECT_EQ(cnn.predict(maps), 0.0);
}

TEST(Models, ToyForwardMatchesOracle) {
    const auto arch = Architecture::toy();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        FullModel full(arch);
        CnnModel cnn(arch);
        randomize(full, seed);
        randomize(cnn, seed);
        const auto x = random_inputs(arch, 7, seed + 10);
        const auto wf = oracle::Weights::from(full.parameters()), wc = oracle::Weights::from(cnn.parameters());
        EXPECT_NEAR(full.forward(x), oracle::full_forward(arch, wf, x), 1e-9);
        EXPECT_NEAR(cnn.forward(std::span(x).last(1)), oracle::cnn_forward(arch, wc, x.back()), 1e-9);
        Rng r1(seed);
        std::mt19937_64 r2(seed);
        EXPECT_NEAR(full.forward(x, &r1), oracle::full_forward(arch, wf, x, &r2), 1e-9);
    }
}

TEST(Models, InputOrderMatters) {
    const auto arch = Architecture::toy();
    FullModel net(arch);
    randomize(net, 8);
    auto x = random_inputs(arch, 7, 9);
    const double a = net.forward(x);
    std::reverse(x.begin(), x.end());
    EXPECT_NE(a, net.forward(x));
}

TEST(Models, InferenceIsBitReproducible) {
    FullModel net(Architecture::toy());
    randomize(net, 12);
    const auto x = random_inputs(net.architecture(), 7, 13);
    EXPECT_EQ(net.forward(x), net.forward(x));
    Rng a(1), b(1);
    EXPECT_EQ(net.forward(x, &a), net.forward(x, &b));
}

TEST(Gradients, ZeroAtTheTarget) {
    const auto arch = Architecture::toy();
    FullModel net(arch);
    randomize(net, 14);
    const auto x = random_inputs(arch, 7, 15);
    auto g = net.parameters().zeros_like();
    EXPECT_EQ(net.backward(x, net.forward(x), g), 0.0);
    EXPECT_EQ(g.squared_norm(), 0.0);
}

class ToyGradients : public ::testing::TestWithParam<bool> {};

TEST_P(ToyGradients, FullModelEveryGroupMatchesFiniteDifferences) {
    const bool with_dropout = GetParam();
    const auto arch = Architecture::toy();
    FullModel net(arch);
    randomize(net, 21);
    const auto x = random_inputs(arch, 7, 22);
    const double target = net.forward(x) + 0.7;
    const std::uint64_t mask_seed = 99;

    auto grads = net.parameters().zeros_like();
    Rng rng(mask_seed);
    (void)net.backward(x, target, grads, with_dropout ? &rng : nullptr);

    const OracleLoss loss = [&](const oracle::Weights& w) {
        std::mt19937_64 r(mask_seed);
        const double y = oracle::full_forward(arch, w, x, with_dropout ? &r : nullptr);
        return (y - target) * (y - target);
    };
    const auto w = oracle::Weights::from(net.parameters());
    std::size_t groups = 0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const Matrix fd = finite_difference(w, grads.name(i), loss);
        EXPECT_LT(rel_error(grads[i], fd), 1e-3) << grads.name(i);
        if (!with_dropout) EXPECT_GT(fd.norm(), 0.0) << grads.name(i);
        ++groups;
    }
    EXPECT_EQ(groups, 4u + 15u + 2u + 4u);  // encoder, LSTM, variation, head
}

INSTANTIATE_TEST_SUITE_P(Dropout, ToyGradients, ::testing::Values(false, true));

TEST(Gradients, CnnModelMatchesFiniteDifferences) {
    const auto arch = Architecture::toy();
    CnnModel net(arch);
    randomize(net, 31);
    const auto x = random_inputs(arch, 1, 32);
    const double target = net.forward(x) - 0.5;
    auto grads = net.parameters().zeros_like();
    Rng rng(5);
    (void)net.backward(x, target, grads, &rng);
    const OracleLoss loss = [&](const oracle::Weights& w) {
        std::mt19937_64 r(5);
        const double y = oracle::cnn_forward(arch, w, x[0], &r);
        return (y - target) * (y - target);
    };
    const auto w = oracle::Weights::from(net.parameters());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        EXPECT_LT(rel_error(grads[i], finite_difference(w, grads.name(i), loss)), 1e-3) << grads.name(i);
    }
}

TEST(Gradients, SharedEncoderSumsUntiedCopies) {
    const auto arch = Architecture::toy();
    FullModel net(arch);
    randomize(net, 41);
    const auto x = random_inputs(arch, 7, 42);
    const double target = net.forward(x) + 1.0;
    auto grads = net.parameters().zeros_like();
    (void)net.backward(x, target, grads);

    // One private copy of every encoder tensor per window.
    auto w = oracle::Weights::from(net.parameters());
    std::vector<std::string> encoder_names;
    for (const auto& [name, t] : w.t) {
        if (name.rfind("encoder.", 0) == 0) encoder_names.push_back(name);
    }
    for (std::size_t t = 0; t < 7; ++t) {
        for (const auto& n : encoder_names) w.t["encoder" + std::to_string(t) + n.substr(7)] = w.t[n];
    }
    const OracleLoss loss = [&](const oracle::Weights& ww) {
        const double y = oracle::full_forward(arch, ww, x, nullptr, true);
        return (y - target) * (y - target);
    };
    for (const auto& n : encoder_names) {
        Matrix sum = Matrix::Zero(grads.at(n).rows(), grads.at(n).cols());
        std::vector<double> per_window_norms;
        for (std::size_t t = 0; t < 7; ++t) {
            const Matrix gt = finite_difference(w, "encoder" + std::to_string(t) + n.substr(7), loss);
            per_window_norms.push_back(gt.norm());
            sum += gt;
        }
        EXPECT_LT(rel_error(grads.at(n), sum), 1e-3) << n;
        // Every window contributes.
        for (double v : per_window_norms) EXPECT_GT(v, 0.0) << n;
    }
}

TEST(Dropout, ExpectedActivationEqualsInference) {
    const std::size_t trials = 10000;
    const Vector a = Vector::LinSpaced(16, 0.5, 4.0);
    Rng rng(77);
    Vector sum = Vector::Zero(16);
    std::size_t zeros = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector m = layers::dropout_mask(16, 0.5, rng);
        zeros += static_cast<std::size_t>((m.array() == 0.0).count());
        for (Eigen::Index k = 0; k < 16; ++k) EXPECT_TRUE(m(k) == 0.0 || m(k) == 2.0);
        sum += a.cwiseProduct(m);
    }
    const Vector mean = sum / static_cast<double>(trials);
    for (Eigen::Index k = 0; k < 16; ++k) {
        // a*m has mean a and standard deviation a for p = 0.5.
        const double se = a(k) / std::sqrt(static_cast<double>(trials));
        EXPECT_LT(std::abs(mean(k) - a(k)), 3.0 * se) << k;
    }
    const double n = 16.0 * static_cast<double>(trials);
    EXPECT_LT(std::abs(static_cast<double>(zeros) / n - 0.5), 3.0 * 0.5 / std::sqrt(n));
}

TEST(Parameters, DenseLayerCount) {
    ParameterSet p;
    p.add("dense.weight", 3, 2);
    p.add("dense.bias", 3, 1);
    EXPECT_EQ(count_parameters(p), 9u);
}

TEST(Parameters, ClosedFormCounts) {
    const Architecture a;
    std::size_t encoder = 0, in = a.bands;
    for (const auto& b : a.blocks) {
        for (std::size_t k = 0; k < b.convs; ++k) {
            encoder += in * b.filters * 9 + b.filters;
            in = b.filters;
        }
    }
    EXPECT_EQ(encoder, 158496u);
    const std::size_t d = 4 * 4 * 128, h = 128;
    const std::size_t lstm = 4 * h * d + 4 * h * h + 3 * h * h + 4 * h;
    const std::size_t variation = 64 * (7 * 128 * 9) + 64;
    const std::size_t head = (h + 64 * 2 * 2) * 512 + 512 + 512 + 1;
    FullModel full(a);
    CnnModel cnn(a);
    EXPECT_EQ(count_parameters(full), encoder + lstm + variation + head);
    EXPECT_EQ(count_parameters(full), 2036065u);
    EXPECT_EQ(count_parameters(cnn), encoder + d * 512 + 512 + 512 + 1);
}

TEST(Initialization, DeterministicAndStructured) {
    FullModel a, b;
    CnnModel c;
    a.initialize(5);
    b.initialize(5);
    c.initialize(5);
    for (std::size_t i = 0; i < a.parameters().size(); ++i) EXPECT_EQ(a.parameters()[i], b.parameters()[i]);
    EXPECT_EQ(a.parameters().at("encoder.block2.conv1.weight"), c.parameters().at("encoder.block2.conv1.weight"));
    EXPECT_EQ(a.parameters().at("lstm.b_f"), Matrix::Ones(128, 1));
    EXPECT_EQ(a.parameters().at("lstm.b_i"), Matrix::Zero(128, 1));
    const Matrix& wh = a.parameters().at("lstm.W_hf");
    EXPECT_LT((wh.transpose() * wh - Matrix::Identity(128, 128)).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix& conv = a.parameters().at("encoder.block1.conv1.weight");
    EXPECT_LE(conv.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 45.0));
    FullModel other;
    other.initialize(6);
    EXPECT_NE(other.parameters()[0], a.parameters()[0]);
}

TEST(Initialization, EncoderTransfer) {
    CnnModel cnn(Architecture::toy());
    FullModel full(Architecture::toy());
    randomize(cnn, 1);
    full.initialize(2);
    full.copy_encoder_from(cnn);
    EXPECT_EQ(full.parameters().at("encoder.block1.conv2.weight"), cnn.parameters().at("encoder.block1.conv2.weight"));
    Architecture other = Architecture::toy();
    other.blocks = {{1, 3}};
    EXPECT_THROW(full.copy_encoder_from(CnnModel(other)), InvalidArgument);
}

TEST(ModelFile, RoundTrip) {
    const auto dir = test_paths::scratch_dir("model_file");
    FullModel net(Architecture::toy());
    randomize(net, 50);
    net.normalization() = {{0.5, 1.5}, {2.0, 3.0}, 60.0, 4.0};
    save_network(net, dir / "a.nrmd");
    const auto back = load_network(dir / "a.nrmd");
    ASSERT_EQ(back->kind(), NetKind::Full);
    EXPECT_EQ(back->architecture(), net.architecture());
    EXPECT_EQ(back->normalization(), net.normalization());
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
        const Matrix rounded = net.parameters()[i].cast<float>().cast<double>();
        EXPECT_EQ(back->parameters()[i], rounded) << net.parameters().name(i);
    }
    save_network(*back, dir / "b.nrmd");
    EXPECT_EQ(slurp(dir / "a.nrmd"), slurp(dir / "b.nrmd"));

    const auto bytes = slurp(dir / "a.nrmd");
    std::ofstream(dir / "cut.nrmd", std::ios::binary) << bytes.substr(0, bytes.size() - 1);
    EXPECT_THROW((void)load_network(dir / "cut.nrmd"), FormatError);
}

TEST(Normalization, FitMatchesDirectStatistics) {
    SequenceDataset ds(2, 2, 2, Aggregation::Mean);
    TrialFeatures f;
    f.trial_id = "v01";
    for (int k = 0; k < 4; ++k) {
        TopoMap m(2, 2);
        for (std::size_t p = 0; p < 4; ++p) {
            m.data()[p * 2] = static_cast<float>(k + static_cast<int>(p));
            m.data()[p * 2 + 1] = 10.0f;
        }
        f.maps.push_back(m);
        f.rates.push_back({60.0 + 2.0 * k, Aggregation::Mean});
    }
    ds.add_trial(f);
    const auto n = fit_normalization(ds);
    // Band 0 over maps 0..2 (the pool), values k + p.
    double s = 0, sq = 0;
    for (int k = 0; k < 3; ++k) {
        for (int p = 0; p < 4; ++p) s += k + p;
    }
    const double mean = s / 12.0;
    for (int k = 0; k < 3; ++k) {
        for (int p = 0; p < 4; ++p) sq += (k + p - mean) * (k + p - mean);
    }
    EXPECT_NEAR(n.input_mean[0], mean, 1e-12);
    EXPECT_NEAR(n.input_std[0], std::sqrt(sq / 12.0), 1e-12);
    EXPECT_EQ(n.input_mean[1], 10.0);
    EXPECT_EQ(n.input_std[1], 1.0);  // constant band
    EXPECT_NEAR(n.target_mean, 65.0, 1e-12);  // targets 64, 66
    EXPECT_NEAR(n.target_std, 1.0, 1e-12);
    const Matrix x = n.input(f.maps[1]);
    EXPECT_NEAR(x(0, 3), (4.0 - mean) / n.input_std[0], 1e-12);
}
