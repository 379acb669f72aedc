#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "kaleido/data/canvas.hpp"
#include "kaleido/data/dataset_io.hpp"
#include "kaleido/data/gmm.hpp"

using namespace kaleido;
using namespace kaleido::data;

TEST(Gmm, DefaultLayoutAndWeights) {
    const auto g = toy_gmm_default(WeightVariant::unequal);
    ASSERT_EQ(g.size(), 4);
    EXPECT_EQ(g.num_classes(), 2);
    double total = 0;
    for (int k = 0; k < g.size(); ++k) total += g.at(k).weight;
    EXPECT_NEAR(total, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(g.class_conditional_weight(g.component_of(0, 0)), 0.7);
    EXPECT_DOUBLE_EQ(g.class_conditional_weight(g.component_of(1, 1)), 0.3);
    // majority modes sit on opposite halves of the plane
    EXPECT_LT(g.at(g.component_of(0, 0)).mean.y() * g.at(g.component_of(1, 0)).mean.y(), 0.0);
    EXPECT_EQ(mode_name(1, 1), "mode_1B");
}

TEST(Gmm, ValidationRejectsBadSpecs) {
    auto g = toy_gmm_default();
    g.components[0].weight += 0.1;
    EXPECT_THROW(g.validate(), ContractViolation);
    g = toy_gmm_default();
    g.components[1].mean = g.components[0].mean + Eigen::Vector2d(0.5, 0.0);
    EXPECT_THROW(g.validate(), ContractViolation);
    g = toy_gmm_default();
    g.components[1].mode_id = g.components[0].mode_id;
    EXPECT_THROW(g.validate(), ContractViolation);
}

TEST(Gmm, SampledFrequenciesMatchWeights) {
    const auto g = toy_gmm_default(WeightVariant::unequal);
    const int n = 20000;
    const auto s = sample_dataset(g, n, 42);
    std::vector<int> counts(4, 0);
    for (const auto& x : s) {
        ++counts[static_cast<std::size_t>(x.component)];
        EXPECT_EQ(g.at(x.component).class_id, x.class_id);
        EXPECT_EQ(assign_mode(x.x, g), x.component);
    }
    for (int k = 0; k < 4; ++k) {
        const double w = g.at(k).weight;
        EXPECT_NEAR(counts[static_cast<std::size_t>(k)] / double(n), w, 4 * std::sqrt(w * (1 - w) / n));
    }
}

TEST(Gmm, SamplingIsSeededAndPrefixStable) {
    const auto g = toy_gmm_default();
    const auto a = sample_dataset(g, 50, 7);
    const auto b = sample_dataset(g, 50, 7);
    const auto c = sample_dataset(g, 50, 8);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_NE(a[0].x, c[0].x);
}

TEST(DatasetCsv, RoundTripIsExact) {
    const auto s = sample_dataset(toy_gmm_default(WeightVariant::unequal), 200, 3);
    const auto back = dataset_from_csv(dataset_to_csv(s));
    ASSERT_EQ(back.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(back[i].x, s[i].x);
        EXPECT_EQ(back[i].class_id, s[i].class_id);
        EXPECT_EQ(back[i].mode_id, s[i].mode_id);
        EXPECT_EQ(back[i].component, s[i].component);
    }
}

TEST(DatasetCsv, MalformedInputIsAnIoError) {
    EXPECT_THROW(dataset_from_csv(""), IoError);
    EXPECT_THROW(dataset_from_csv("id,class,mode,dim_0\n0,0,0,1\n"), IoError);
    EXPECT_THROW(dataset_from_csv("sample_id,class,mode,dim_0\n0,0,0\n"), IoError);
    EXPECT_THROW(dataset_from_csv("sample_id,class,mode,dim_0\n0,0,0,abc\n"), std::exception);
}

TEST(SpecJson, GmmAndCanvasRoundTrip) {
    const auto g = toy_gmm_default(WeightVariant::unequal);
    const auto g2 = gmm_from_json(nlohmann::json::parse(to_json(g).dump()));
    ASSERT_EQ(g2.size(), g.size());
    for (int k = 0; k < g.size(); ++k) {
        EXPECT_EQ(g2.at(k).mean, g.at(k).mean);
        EXPECT_EQ(g2.at(k).weight, g.at(k).weight);
    }
    CanvasSpec c;
    c.width = 20;
    c.orientation_jitter_deg = 7.5;
    EXPECT_EQ(to_json(canvas_from_json(to_json(c))), to_json(c));
    EXPECT_THROW(gmm_from_json(nlohmann::json{{"components", 3}}), IoError);
}

TEST(Canvas, SamplesRespectGeometry) {
    const CanvasSpec spec;
    const auto s = sample_canvas_dataset(spec, 300, 5);
    int two = 0;
    for (const auto& x : s) {
        ASSERT_EQ(x.x.size(), spec.pixels());
        EXPECT_EQ(x.mode_id, static_cast<int>(x.bumps.size()) - 1);
        EXPECT_GE(x.x.minCoeff(), 0.0);
        EXPECT_LE(x.x.maxCoeff(), 1.0);
        for (const auto& b : x.bumps) {
            EXPECT_TRUE(bump_inside(spec, b));
            const double d = std::abs(b.theta_deg - (x.class_id == 0 ? 0.0 : 90.0));
            EXPECT_LE(std::min(d, 180.0 - d), spec.orientation_jitter_deg + 1e-9);
        }
        if (x.bumps.size() == 2) {
            ++two;
            const auto& a = x.bumps[0];
            const auto& b = x.bumps[1];
            EXPECT_GE(std::hypot(a.cx - b.cx, a.cy - b.cy), spec.min_separation * (a.sigma_major + b.sigma_major));
        }
        EXPECT_EQ(render_canvas(spec, x.bumps), x.x);
    }
    EXPECT_GT(two, 100);
    EXPECT_LT(two, 200);
}

TEST(Canvas, BumpSidecarRoundTrip) {
    const CanvasSpec spec;
    auto s = sample_canvas_dataset(spec, 20, 9);
    auto back = dataset_from_csv(dataset_to_csv(s));
    attach_bumps(back, nlohmann::json::parse(bumps_sidecar(s).dump()));
    for (std::size_t i = 0; i < s.size(); ++i) {
        ASSERT_EQ(back[i].bumps.size(), s[i].bumps.size());
        EXPECT_EQ(render_canvas(spec, back[i].bumps), s[i].x);
    }
    back.pop_back();
    EXPECT_THROW(attach_bumps(back, bumps_sidecar(s)), IoError);
}

TEST(Canvas, FoldDegrees) {
    EXPECT_DOUBLE_EQ(fold_degrees(-10.0), 170.0);
    EXPECT_DOUBLE_EQ(fold_degrees(180.0), 0.0);
    EXPECT_DOUBLE_EQ(fold_degrees(365.0), 5.0);
}

TEST(DatasetCsv, SubnormalPixelsRoundTrip) {
    const double tiny = 1.50234147610162e-317;
    EXPECT_EQ(parse_double(format_double(tiny), "x"), tiny);
    EXPECT_EQ(parse_double("-0", "x"), 0.0);
    EXPECT_THROW(parse_double("1e400", "x"), IoError);
    EXPECT_THROW(parse_double(" 1", "x"), IoError);
    EXPECT_THROW(parse_double("", "x"), IoError);
}
