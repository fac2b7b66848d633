#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "neurorate/error.hpp"
#include "neurorate/training.hpp"
#include "toy_data.hpp"

using namespace neurorate;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
    return v;
}

// Single-parameter set holding a vector, for optimizer checks.
ParameterSet vector_params(const std::vector<double>& v) {
    ParameterSet p;
    p.add("p", v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) p[0](static_cast<Eigen::Index>(i), 0) = v[i];
    return p;
}

// Quadratic bowl 0.5 * sum(c_i p_i^2); gradient c_i p_i.
double bowl(const ParameterSet& p, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += 0.5 * c[i] * p[0](static_cast<Eigen::Index>(i), 0) * p[0](static_cast<Eigen::Index>(i), 0);
    return s;
}

ParameterSet bowl_grad(const ParameterSet& p, const std::vector<double>& c) {
    auto g = p.zeros_like();
    for (std::size_t i = 0; i < c.size(); ++i) g[0](static_cast<Eigen::Index>(i), 0) = c[i] * p[0](static_cast<Eigen::Index>(i), 0);
    return g;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.batch_size = 5;
    c.max_epochs = 6;
    c.patience = 3;
    c.sgd_learning_rate = 1e-2;
    c.adam.learning_rate = 1e-3;
    c.seed = 17;
    return c;
}

struct ToySplits {
    Architecture arch = Architecture::toy();
    SequenceDataset train = toy::make_dataset(arch, 3, 14, 1);
    SequenceDataset validation = toy::make_dataset(arch, 1, 12, 2);
    SequenceDataset test = toy::make_dataset(arch, 2, 11, 3);
};

} // namespace

TEST(Metrics, HandValues) {
    const std::vector<double> y{1, 2}, p{2, 4};
    EXPECT_EQ(mse(y, y), 0.0);
    EXPECT_EQ(mse(y, p), 2.5);
    EXPECT_DOUBLE_EQ(mape(std::vector<double>{10}, std::vector<double>{9}), 10.0);
    EXPECT_EQ(mape(y, y), 0.0);
    const std::vector<double> a{1, 3, 2, 5};
    std::vector<double> neg;
    for (double v : a) neg.push_back(7.0 - v);
    EXPECT_NEAR(pearson(a, a), 1.0, 1e-15);
    EXPECT_NEAR(pearson(a, neg), -1.0, 1e-15);
}

TEST(Metrics, Errors) {
    const std::vector<double> one{1}, two{1, 2}, zero{0, 1}, flat{3, 3};
    EXPECT_THROW((void)mse(one, two), InvalidArgument);
    EXPECT_THROW((void)mse(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
    EXPECT_THROW((void)mape(zero, two), InvalidArgument);
    EXPECT_THROW((void)pearson(flat, two), InvalidArgument);
    EXPECT_THROW((void)pearson(two, flat), InvalidArgument);
    EXPECT_THROW((void)pearson(one, one), InvalidArgument);
}

TEST(Metrics, LoopOraclesOnRandomVectors) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 200;
        const auto y = random_vector(rng, n, 1.0, 90.0), p = random_vector(rng, n, 1.0, 90.0);
        long double se = 0, ape = 0;
        for (std::size_t i = 0; i < n; ++i) {
            se += static_cast<long double>(y[i] - p[i]) * (y[i] - p[i]);
            ape += std::abs(static_cast<long double>(y[i] - p[i])) / y[i];
        }
        const double m = static_cast<double>(se / n);
        EXPECT_NEAR(mse(y, p), m, 1e-12 * m);
        const double a = static_cast<double>(100.0L * ape / n);
        EXPECT_NEAR(mape(y, p), a, 1e-12 * a);
        // Covariance form: (E[xy] - E[x]E[y]) / sqrt(var x var y), in long double.
        long double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += y[i];
            sy += p[i];
            sxy += static_cast<long double>(y[i]) * p[i];
            sxx += static_cast<long double>(y[i]) * y[i];
            syy += static_cast<long double>(p[i]) * p[i];
        }
        const long double nn = n;
        const long double cov = sxy / nn - sx / nn * sy / nn;
        const long double r = cov / std::sqrt((sxx / nn - sx / nn * sx / nn) * (syy / nn - sy / nn * sy / nn));
        EXPECT_NEAR(pearson(y, p), static_cast<double>(r), 1e-12);
    }
}

TEST(Sgd, HandStepAndZeroGradient) {
    auto p = vector_params({1.0});
    auto g = vector_params({2.0});
    sgd_step(p, g, 1e-3);
    EXPECT_DOUBLE_EQ(p[0](0, 0), 0.998);
    const auto before = p[0];
    sgd_step(p, p.zeros_like(), 1e-3);
    EXPECT_EQ(p[0], before);
    EXPECT_THROW(sgd_step(p, vector_params({1.0, 2.0}), 1e-3), InvalidArgument);
}

TEST(Sgd, MonotoneDescentBelowCurvatureBound) {
    const std::vector<double> c{0.5, 2.0, 8.0};
    auto p = vector_params({1.0, -2.0, 0.5});
    const double lr = 1.0 / 8.0;  // below 2 / max curvature
    double last = bowl(p, c);
    for (int k = 0; k < 50; ++k) {
        sgd_step(p, bowl_grad(p, c), lr);
        const double now = bowl(p, c);
        EXPECT_LT(now, last);
        last = now;
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto p = vector_params({0.3, -0.7});
    auto s = AdamState::like(p);
    const auto before = p[0];
    adam_step(p, p.zeros_like(), s, 1, {});
    EXPECT_EQ(p[0], before);
    EXPECT_THROW(adam_step(p, p.zeros_like(), s, 0, {}), InvalidArgument);
}

TEST(Adam, FirstStepMagnitude) {
    // Bias correction makes m_hat = g and v_hat = g^2 at t = 1.
    const AdamSettings settings;
    for (double g : {1e-6, 1e-3, 0.5, -3.0, 250.0}) {
        auto p = vector_params({1.0});
        auto s = AdamState::like(p);
        adam_step(p, vector_params({g}), s, 1, settings);
        const double expected = settings.learning_rate * std::abs(g) / (std::abs(g) + settings.epsilon);
        EXPECT_NEAR(1.0 - p[0](0, 0), std::copysign(expected, g), 4.5e-16);  // two ulps of 1.0
        EXPECT_NEAR(std::abs(1.0 - p[0](0, 0)), settings.learning_rate, 0.02 * settings.learning_rate);
    }
}

TEST(Adam, DecreasesAConvexQuadratic) {
    const std::vector<double> c{1.0, 10.0, 0.1};
    auto p = vector_params({1.0, 1.0, 1.0});
    auto s = AdamState::like(p);
    const double start = bowl(p, c);
    AdamSettings settings;
    settings.learning_rate = 1e-2;
    for (std::uint64_t t = 1; t <= 100; ++t) adam_step(p, bowl_grad(p, c), s, t, settings);
    EXPECT_LT(bowl(p, c), start);
    EXPECT_EQ(s.step, 100u);
}

TEST(EarlyStopping, PatienceSixTrace) {
    EarlyStopping es(6);
    const std::vector<double> trace{5, 4, 4, 4, 4, 4, 4, 4};
    std::size_t stopped_at = 0;
    for (std::size_t e = 0; e < trace.size(); ++e) {
        es.update(trace[e]);
        if (es.should_stop()) {
            stopped_at = e + 1;
            break;
        }
    }
    EXPECT_EQ(stopped_at, 8u);
    EXPECT_EQ(es.best_epoch(), 2u);
    EXPECT_EQ(es.best_value(), 4.0);
}

TEST(EarlyStopping, NeverRunsPastBestPlusPatience) {
    Rng rng(8);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t patience = 1 + rng() % 8;
        EarlyStopping es(patience);
        double best = INFINITY;
        std::size_t best_epoch = 0, e = 0;
        while (!es.should_stop() && e < 300) {
            const double v = std::floor(10.0 * uniform01(rng));  // ties are common
            ++e;
            if (v < best) {
                best = v;
                best_epoch = e;
            }
            es.update(v);
            ASSERT_LE(es.epochs(), es.best_epoch() + patience);
        }
        EXPECT_EQ(es.best_epoch(), best_epoch);
        EXPECT_EQ(es.best_value(), best);
        if (es.should_stop()) {
            EXPECT_EQ(es.epochs(), best_epoch + patience);
        }
    }
    EXPECT_THROW(EarlyStopping(0), InvalidArgument);
}

TEST(TrainConfigCheck, RejectsBadValues) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    TrainConfig c;
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.patience = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.sgd_learning_rate = 0.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.adam.learning_rate = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(TrainStage, RetainsTheBestValidationEpoch) {
    ToySplits d;
    CnnModel net(d.arch);
    net.initialize(3);
    net.normalization() = fit_normalization(d.train);
    auto config = quick_config();
    config.max_epochs = 12;
    const auto report = train_stage(net, d.train, d.validation, OptimizerKind::Sgd, config);
    ASSERT_FALSE(report.epochs.empty());
    double lowest = INFINITY;
    std::size_t arg = 0;
    for (const auto& e : report.epochs) {
        if (e.validation_mse < lowest) {
            lowest = e.validation_mse;
            arg = e.epoch;
        }
    }
    EXPECT_EQ(report.best_epoch, arg);
    EXPECT_EQ(report.best_validation_mse, lowest);
    EXPECT_EQ(mse(d.validation.targets(), predict_dataset(net, d.validation)), lowest);
    EXPECT_LE(report.epochs.size(), report.best_epoch + config.patience);
    EXPECT_EQ(report.parameters, count_parameters(net));
}

TEST(TrainStage, ReproducibleAndThreadIndependent) {
    ToySplits d;
    auto run = [&](std::size_t threads) {
        FullModel net(d.arch);
        net.initialize(5);
        net.normalization() = fit_normalization(d.train);
        auto config = quick_config();
        config.max_epochs = 2;
        config.threads = threads;
        const auto r = train_stage(net, d.train, d.validation, OptimizerKind::Adam, config);
        return std::make_pair(r, net.parameters());
    };
    const auto [a, pa] = run(1);
    const auto [b, pb] = run(1);
    const auto [c, pc] = run(3);
    ASSERT_EQ(a.epochs.size(), 2u);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(a.epochs[e].train_loss, b.epochs[e].train_loss);
        EXPECT_EQ(a.epochs[e].train_loss, c.epochs[e].train_loss);
        EXPECT_EQ(a.epochs[e].validation_mse, c.epochs[e].validation_mse);
    }
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i], pc[i]) << pa.name(i);
}

TEST(TrainStage, SeedChangesTheRun) {
    ToySplits d;
    auto first_loss = [&](std::uint64_t seed) {
        CnnModel net(d.arch);
        net.initialize(5);
        net.normalization() = fit_normalization(d.train);
        auto config = quick_config();
        config.max_epochs = 1;
        config.seed = seed;
        return train_stage(net, d.train, d.validation, OptimizerKind::Sgd, config).epochs[0].train_loss;
    };
    EXPECT_NE(first_loss(1), first_loss(2));
}

TEST(TrainStage, DivergenceIsReported) {
    ToySplits d;
    CnnModel net(d.arch);
    net.initialize(1);
    net.normalization() = fit_normalization(d.train);
    auto config = quick_config();
    config.sgd_learning_rate = 1e30;
    EXPECT_THROW((void)train_stage(net, d.train, d.validation, OptimizerKind::Sgd, config), DivergenceError);
}

TEST(TrainStage, InputErrors) {
    ToySplits d;
    CnnModel net(d.arch);
    net.initialize(1);
    const SequenceDataset empty(d.arch.z, d.arch.grid, d.arch.bands, Aggregation::Mean);
    EXPECT_THROW((void)train_stage(net, empty, d.validation, OptimizerKind::Sgd, quick_config()), InvalidArgument);
    EXPECT_THROW((void)train_stage(net, d.train, empty, OptimizerKind::Sgd, quick_config()), InvalidArgument);
    auto other = toy::make_dataset(d.arch, 1, 10, 4);
    SequenceDataset mixed(d.arch.z, d.arch.grid, d.arch.bands, Aggregation::Sum);
    for (std::size_t i = 0; i < other.size(); ++i) {
        auto s = other.sample(i);
        s.target.mode = Aggregation::Sum;
        mixed.add(s);
    }
    EXPECT_THROW((void)train_stage(net, d.train, mixed, OptimizerKind::Sgd, quick_config()), InvalidArgument);
    CnnModel wrong(Architecture{});
    EXPECT_THROW((void)train_stage(wrong, d.train, d.validation, OptimizerKind::Sgd, quick_config()), InvalidArgument);
}

TEST(TrainStage, TargetStopsTraining) {
    ToySplits d;
    CnnModel net(d.arch);
    net.initialize(1);
    net.normalization() = fit_normalization(d.train);
    auto config = quick_config();
    config.target_train_mse = 1e9;
    const auto r = train_stage(net, d.train, d.validation, OptimizerKind::Sgd, config);
    EXPECT_EQ(r.stop, StopReason::TargetReached);
    EXPECT_EQ(r.epochs.size(), 1u);
    ASSERT_TRUE(r.epochs[0].train_mse.has_value());
    EXPECT_EQ(*r.epochs[0].train_mse, mse(d.train.targets(), predict_dataset(net, d.train)));
}

TEST(TwoStage, EncoderTransferAndFreeze) {
    ToySplits d;
    auto config = quick_config();
    config.max_epochs = 3;
    config.freeze_encoder = true;
    const auto out = train_two_stage(d.arch, d.train, d.validation, d.test, config);
    const auto& cp = out.cnn->parameters();
    const auto& fp = out.full->parameters();
    for (std::size_t i = 0; i < cp.size(); ++i) {
        if (cp.name(i).rfind("encoder.", 0) == 0) EXPECT_EQ(cp[i], fp.at(cp.name(i))) << cp.name(i);
    }
    EXPECT_EQ(out.report.cnn.optimizer, OptimizerKind::Sgd);
    EXPECT_EQ(out.report.full.optimizer, OptimizerKind::Adam);
    EXPECT_EQ(out.full->normalization(), fit_normalization(d.train));
    EXPECT_EQ(out.report.full_test.pearson.size(), 2u);
    EXPECT_NEAR(out.report.full_test.mape, mape(d.test.targets(), predict_dataset(*out.full, d.test)), 1e-12);

    std::ostringstream log, summary, trace;
    write_epoch_log(log, out.report);
    write_summary(summary, out.report);
    const auto cnn_pred = predict_dataset(*out.cnn, d.test), full_pred = predict_dataset(*out.full, d.test);
    write_prediction_trace(trace, d.test, cnn_pred, full_pred);
    const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    EXPECT_EQ(static_cast<std::size_t>(lines(log.str())),
              1 + out.report.cnn.epochs.size() + out.report.full.epochs.size());
    EXPECT_EQ(static_cast<std::size_t>(lines(trace.str())), 1 + d.test.size());
    EXPECT_NE(summary.str().find("adam_epsilon = 1e-08"), std::string::npos);
    EXPECT_NE(summary.str().find("test_mape_percent"), std::string::npos);
}

TEST(TwoStage, FineTuningMovesTheEncoder) {
    ToySplits d;
    auto config = quick_config();
    config.max_epochs = 2;
    const auto out = train_two_stage(d.arch, d.train, d.validation, d.test, config);
    EXPECT_NE(out.cnn->parameters().at("encoder.block1.conv1.weight"),
              out.full->parameters().at("encoder.block1.conv1.weight"));
}

TEST(Evaluate, PerVideoCorrelation) {
    const auto arch = Architecture::toy();
    const auto d = toy::make_dataset(arch, 2, 10, 9);
    auto pred = d.targets();
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = 2.0 * pred[i] + 1.0;
    const auto m = evaluate(d, pred);
    ASSERT_EQ(m.pearson.size(), 2u);
    for (const auto& [key, r] : m.pearson) {
        ASSERT_TRUE(r.has_value()) << key;
        EXPECT_NEAR(*r, 1.0, 1e-12);
    }
    std::vector<double> flat(d.size(), 70.0);
    const auto f = evaluate(d, flat);
    for (const auto& [key, r] : f.pearson) EXPECT_FALSE(r.has_value());
}

TEST(BatchStudy, EpochCountsStayInRange) {
    const auto arch = Architecture::toy();
    std::vector<SequenceDataset> sets;
    for (int s = 0; s < 2; ++s) {
        const std::string pid = "s0" + std::to_string(s + 1);
        sets.push_back(toy::make_dataset(arch, 2, 12, 10 + s, pid));
        sets.push_back(toy::make_dataset(arch, 1, 10, 20 + s, pid));
        sets.push_back(toy::make_dataset(arch, 1, 10, 30 + s, pid));
    }
    const std::vector<SubjectSplit> subjects{{"s01", &sets[0], &sets[1], &sets[2]}, {"s02", &sets[3], &sets[4], &sets[5]}};
    const std::vector<std::size_t> sizes{4, 10};
    auto config = quick_config();
    config.max_epochs = 4;
    config.patience = 1;
    const auto rows = batch_size_study(arch, subjects, sizes, config);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
        EXPECT_GE(r.epochs, 1u);
        EXPECT_LE(r.epochs, config.max_epochs);
        EXPECT_TRUE(std::isfinite(r.test_mse));
    }
    std::ostringstream out;
    write_batch_study(out, rows);
    EXPECT_NE(out.str().find("\n4,2,"), std::string::npos);
    EXPECT_NE(out.str().find("\n10,2,"), std::string::npos);
}
