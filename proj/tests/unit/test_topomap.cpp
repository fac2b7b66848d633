#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "neurorate/error.hpp"
#include "neurorate/topomap.hpp"
#include "test_paths.hpp"

using namespace neurorate;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v{n(rng), n(rng), n(rng)};
    const double r = v.norm();
    return {v.x / r, v.y / r, v.z / r};
}

bool inside_hull(const CloughTocher& ct, Point2 p) { return ct.locate(p).has_value(); }

} // namespace

TEST(Project, VertexMapsToOrigin) {
    const auto p = project_point({0.0, 0.0, 1.0});
    EXPECT_EQ(p.x, 0.0);
    EXPECT_EQ(p.y, 0.0);
}

TEST(Project, MirrorElectrodesAreMirrored) {
    const auto layout = project(default_montage());
    std::map<std::string, Point2> at;
    for (std::size_t i = 0; i < layout.size(); ++i) at[layout.labels[i]] = layout.points[i];
    for (auto [l, r] : std::vector<std::pair<std::string, std::string>>{{"F3", "F4"}, {"T7", "T8"}, {"PO3", "PO4"}, {"Fp1", "Fp2"}}) {
        EXPECT_DOUBLE_EQ(at[l].x, at[r].x) << l;
        EXPECT_DOUBLE_EQ(at[l].y, -at[r].y) << l;
    }
    // Front/back mirror: (x, y, z) -> (-x, y, z) flips the map x component.
    const auto a = project_point({0.3, 0.4, std::sqrt(0.75)});
    const auto b = project_point({-0.3, 0.4, std::sqrt(0.75)});
    EXPECT_DOUBLE_EQ(a.x, -b.x);
    EXPECT_DOUBLE_EQ(a.y, b.y);
}

TEST(Project, RadiusEqualsPolarAngle) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 2000; ++i) {
        const auto v = random_unit(rng);
        if (v.z < -0.999999) continue;
        const auto p = project_point(v);
        EXPECT_NEAR(std::hypot(p.x, p.y), std::acos(v.z), 1e-12);
        // Azimuth preserved.
        if (std::hypot(v.x, v.y) > 1e-6) EXPECT_NEAR(std::atan2(p.y, p.x), std::atan2(v.y, v.x), 1e-12);
    }
}

TEST(Project, AntipodeIsRejected) {
    EXPECT_THROW((void)project_point({0.0, 0.0, -1.0}), InvalidArgument);
    const Montage m({{"A", {0, 0, 1}}, {"B", {0, 0, -1}}});
    EXPECT_THROW((void)project(m), InvalidArgument);
}

TEST(Project, DefaultLayoutRadii) {
    const auto layout = project(default_montage());
    EXPECT_NEAR(layout.max_radius(), std::numbers::pi / 2.0, 1e-12);
}

class DefaultLayout : public ::testing::Test {
protected:
    ProjectedLayout layout = project(default_montage());
    GridFrame frame = GridFrame::around(layout, 32);
    CloughTocher ct{layout.points};
};

TEST_F(DefaultLayout, ConstantsAreReproduced) {
    const std::vector<double> v(layout.size(), 3.25);
    const auto map = interpolate(layout, v);
    int inside = 0;
    for (std::size_t r = 0; r < 32; ++r) {
        for (std::size_t c = 0; c < 32; ++c) {
            const double value = map(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            if (inside_hull(ct, frame.pixel_center(r, c))) {
                ++inside;
                EXPECT_NEAR(value, 3.25, 1e-9);
            } else {
                EXPECT_EQ(value, 0.0);
            }
        }
    }
    EXPECT_GT(inside, 400);
}

TEST_F(DefaultLayout, LinearFieldsAreReproduced) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = u(rng), b = u(rng), c = u(rng);
        std::vector<double> v;
        for (const auto& p : layout.points) v.push_back(a * p.x + b * p.y + c);
        const auto map = interpolate(layout, v);
        for (std::size_t r = 0; r < 32; ++r) {
            for (std::size_t col = 0; col < 32; ++col) {
                const auto p = frame.pixel_center(r, col);
                if (!inside_hull(ct, p)) continue;
                EXPECT_NEAR(map(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)), a * p.x + b * p.y + c, 1e-6);
            }
        }
    }
}

TEST_F(DefaultLayout, ExactAtElectrodes) {
    const auto v = random_values(layout.size(), 4);
    for (std::size_t i = 0; i < layout.size(); ++i) EXPECT_NEAR(ct(v, layout.points[i]), v[i], 1e-9) << layout.labels[i];
}

TEST_F(DefaultLayout, GradientEstimateIsExactForPlanes) {
    std::vector<double> v;
    for (const auto& p : layout.points) v.push_back(2.0 * p.x - 0.5 * p.y + 1.0);
    const auto s = ct.prepare(v);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        EXPECT_NEAR(ct.gradient(s, i).x, 2.0, 1e-12);
        EXPECT_NEAR(ct.gradient(s, i).y, -0.5, 1e-12);
    }
}

TEST_F(DefaultLayout, PermutingElectrodesChangesNothing) {
    const auto v = random_values(layout.size(), 9);
    const auto reference = interpolate(layout, v);
    std::mt19937_64 rng(10);
    std::vector<std::size_t> perm(layout.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        ProjectedLayout shuffled;
        std::vector<double> sv;
        for (auto i : perm) {
            shuffled.labels.push_back(layout.labels[i]);
            shuffled.points.push_back(layout.points[i]);
            sv.push_back(v[i]);
        }
        const auto map = interpolate(shuffled, sv);
        EXPECT_TRUE(map == reference);  // bit-exact
    }
}

TEST_F(DefaultLayout, InterpolationIsLinearInTheData) {
    const auto u = random_values(layout.size(), 21);
    const auto w = random_values(layout.size(), 22);
    const double alpha = 1.7, beta = -0.3;
    std::vector<double> mix(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) mix[i] = alpha * u[i] + beta * w[i];
    const auto mu = interpolate(layout, u), mw = interpolate(layout, w), mm = interpolate(layout, mix);
    EXPECT_LT((mm - (alpha * mu + beta * mw)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST_F(DefaultLayout, ContinuousAcrossTriangleEdges) {
    const auto v = random_values(layout.size(), 31);
    const auto s = ct.prepare(v);
    const double range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    const auto& tri = ct.triangulation();
    std::mt19937_64 rng(32);
    std::uniform_int_distribution<std::size_t> pick(0, tri.triangles().size() - 1);
    std::uniform_real_distribution<double> along(0.05, 0.95);
    int probes = 0;
    double worst_value = 0.0, worst_slope = 0.0;
    while (probes < 1000) {
        const auto& t = tri.triangles()[pick(rng)];
        const int e = static_cast<int>(rng() % 3);
        const Point2 a = tri.points()[t[static_cast<std::size_t>(e)]], b = tri.points()[t[static_cast<std::size_t>((e + 1) % 3)]];
        const double s_along = along(rng);
        const Point2 m{a.x + s_along * (b.x - a.x), a.y + s_along * (b.y - a.y)};
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const Point2 n{-(b.y - a.y) / len, (b.x - a.x) / len};
        const double eps = 1e-6;
        const Point2 p{m.x + 0.5 * eps * n.x, m.y + 0.5 * eps * n.y}, q{m.x - 0.5 * eps * n.x, m.y - 0.5 * eps * n.y};
        const auto lp = ct.locate(p), lq = ct.locate(q);
        if (!lp || !lq || lp->triangle == lq->triangle) continue;  // hull edge
        ++probes;
        worst_value = std::max(worst_value, std::abs(ct.evaluate(s, *lp) - ct.evaluate(s, *lq)));
        // One-sided normal slopes on either side agree (C1).
        const double h = 1e-5;
        const Point2 p2{m.x + h * n.x, m.y + h * n.y}, q2{m.x - h * n.x, m.y - h * n.y};
        const auto lp2 = ct.locate(p2), lq2 = ct.locate(q2), lm = ct.locate(m);
        const double fm = ct.evaluate(s, *lm);
        const double slope_p = (ct.evaluate(s, *lp2) - fm) / h;
        const double slope_q = (fm - ct.evaluate(s, *lq2)) / h;
        worst_slope = std::max(worst_slope, std::abs(slope_p - slope_q));
    }
    EXPECT_LT(worst_value, 1e-3 * range);
    EXPECT_LT(worst_slope, 1e-2 * range);
}

TEST(Interpolate, NeedsThreeElectrodes) {
    ProjectedLayout two{{"A", "B"}, {{0, 0}, {1, 0}}};
    EXPECT_THROW((void)interpolate(two, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

namespace {

EegRecording deap_recording(const std::vector<std::vector<SineComponent>>& comps, double seconds = 2.0) {
    SynthSpec spec;
    spec.duration = seconds;
    spec.sample_rate = 128.0;
    spec.channel_names = deap_channel_labels();
    spec.components = comps;
    return synthesize(spec);
}

} // namespace

TEST(BuildTensor, ShapeIs32x32x5) {
    std::vector<std::vector<SineComponent>> comps(32, {{10.0, 1.0, 0.0}, {20.0, 0.5, 0.0}});
    const auto rec = deap_recording(comps);
    const auto windows = segment(rec, {});
    const auto map = build_tensor(windows.front(), BandScheme::canonical(), default_montage());
    EXPECT_EQ(map.grid(), 32u);
    EXPECT_EQ(map.bands(), 5u);
    EXPECT_EQ(map.data().size(), 32u * 32u * 5u);
    for (float v : map.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(BuildTensor, ZeroWindowGivesZeroTensor) {
    const auto rec = deap_recording(std::vector<std::vector<SineComponent>>(32));
    const auto map = build_tensor(segment(rec, {}).front(), BandScheme::canonical(), default_montage());
    for (float v : map.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BuildTensor, FlatSpectrumGivesConstantBandMaps) {
    // Every non-DC, non-Nyquist bin carries amplitude a.
    const double a = 0.8;
    std::vector<SineComponent> flat;
    for (int k = 1; k < 128; ++k) flat.push_back({0.5 * k, a, 0.37 * k});
    const auto rec = deap_recording(std::vector<std::vector<SineComponent>>(32, flat));
    const TopoMapper mapper(default_montage(), rec.channel_names);
    const auto map = mapper.build(segment(rec, {}).front(), BandScheme::canonical());
    for (std::size_t r = 0; r < 32; ++r) {
        for (std::size_t c = 0; c < 32; ++c) {
            const bool inside = mapper.interpolator().locate(mapper.frame().pixel_center(r, c)).has_value();
            for (std::size_t b = 0; b < 5; ++b) EXPECT_NEAR(map.at(r, c, b), inside ? a : 0.0, 1e-6);
        }
    }
}

TEST(BuildTensor, ChannelOrderDoesNotMatter) {
    std::vector<std::vector<SineComponent>> comps;
    for (int c = 0; c < 32; ++c) comps.push_back({{6.0, 1.0 + 0.05 * c, 0.0}, {25.0, 2.0 - 0.03 * c, 1.0}});
    const auto rec = deap_recording(comps);
    EegRecording reversed = rec;
    std::reverse(reversed.channel_names.begin(), reversed.channel_names.end());
    reversed.samples = rec.samples.colwise().reverse();
    const auto a = build_tensor(segment(rec, {}).front(), BandScheme::canonical(), default_montage());
    const auto b = build_tensor(segment(reversed, {}).front(), BandScheme::canonical(), default_montage());
    EXPECT_TRUE(a == b);
}

TEST(BuildTensor, UnknownChannelPropagates) {
    EegRecording rec;
    rec.sample_rate = 128.0;
    rec.channel_names = {"Cz", "Pz", "Nope"};
    rec.samples = SampleMatrix::Ones(3, 256);
    EXPECT_THROW((void)build_tensor(segment(rec, {}).front(), BandScheme::canonical(), default_montage()), InvalidArgument);
}

TEST(TensorFile, RoundTripAndLayout) {
    std::vector<TopoMap> maps;
    for (int i = 0; i < 3; ++i) {
        TopoMap m(32, 5);
        for (std::size_t k = 0; k < m.data().size(); ++k) m.data()[k] = static_cast<float>(k % 97) * 0.25f + static_cast<float>(i);
        maps.push_back(m);
    }
    const auto path = test_paths::scratch_dir("tensor_file") / "maps.topo";
    save_tensors(maps, path);
    EXPECT_EQ(std::filesystem::file_size(path), 4u + 2u + 2u + 2u + 8u + 3u * 32u * 32u * 5u * 4u);
    const auto loaded = load_tensors(path);
    ASSERT_EQ(loaded.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(loaded[static_cast<std::size_t>(i)] == maps[static_cast<std::size_t>(i)]);
}
