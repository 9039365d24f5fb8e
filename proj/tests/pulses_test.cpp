// Copyright 2026 The qek Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qek {
namespace {

const WaveformParams kLambdaBo{85, 21, 50, 25, 20};

/// Schedule built directly from Lambda, bypassing build_schedule's checks.
PulseSchedule raw_schedule(const WaveformParams& p, double omega0) {
    PulseSchedule s;
    const auto a = p.as_array();
    for (std::size_t i = 0; i < 5; ++i) s.segments.push_back({a[i] / 1000.0, i % 2 == 0 ? omega0 : 0.0, kMixingPhase, 0});
    return s;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
    for (const auto& v : r.violations)
        if (v.rule == rule) return true;
    return false;
}

TEST(BuildSchedule, LayeredStructure) {
    const auto s = build_schedule(kLambdaBo, 15.8);
    ASSERT_EQ(s.segments.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(s.segments[i].omega, i % 2 == 0 ? 15.8 : 0.0);
        EXPECT_EQ(s.segments[i].detuning, 0.0);
        EXPECT_EQ(s.segments[i].phase, std::numbers::pi / 2);
    }
    EXPECT_DOUBLE_EQ(s.segments[0].duration_us, 0.085);
}

TEST(BuildSchedule, MixingAnglesOfTheOptimizedWaveform) {
    const auto th = mixing_angles(build_schedule(kLambdaBo, 15.8));
    ASSERT_EQ(th.size(), 3u);
    EXPECT_NEAR(th[0], 1.343, 5e-4);
    EXPECT_NEAR(th[1], 0.790, 5e-4);
    EXPECT_NEAR(th[2], 0.316, 5e-4);
    EXPECT_NEAR(th[1] * 180 / std::numbers::pi, 45, 0.5);
    EXPECT_NEAR(th[2] * 180 / std::numbers::pi, 18, 0.5);
    EXPECT_NEAR(th[0] * 180 / std::numbers::pi, 77, 0.5);
}

TEST(BuildSchedule, TotalDurationOf317ns) {
    const auto s = build_schedule({100, 50, 90, 40, 37}, 15.8);
    EXPECT_NEAR(s.total_duration_us(), 0.317, 1e-15);
}

TEST(BuildSchedule, AllTenNanoseconds) {
    const auto s = build_schedule({10, 10, 10, 10, 10}, 15.8);
    EXPECT_NEAR(s.total_duration_us(), 0.050, 1e-15);
    for (double th : mixing_angles(s)) EXPECT_NEAR(th, 0.158, 1e-12);
}

TEST(BuildSchedule, RejectsEachViolatedConstraint) {
    try {
        build_schedule({4, 5, 100, 100, 300}, 20.0);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("tau0"), std::string::npos);
        EXPECT_NE(m.find("t0"), std::string::npos);
        EXPECT_NE(m.find("total_time"), std::string::npos);
        EXPECT_NE(m.find("omega"), std::string::npos);
    }
    EXPECT_THROW(build_schedule(kLambdaBo, 0.0), ValidationError);
    EXPECT_THROW(build_schedule({100, 100, 100, 100, 100}, 15.8), ValidationError);
    EXPECT_NO_THROW(build_schedule({100, 100, 100, 100, 99.9}, 15.8));
}

TEST(BuildSchedule, PropertiesOnRandomFeasibleLambda) {
    std::mt19937_64 rng(2);
    const Polytope poly;
    for (int t = 0; t < 200; ++t) {
        const auto w = to_waveform(poly.sample(rng));
        const auto s = build_schedule(w, 12.5);
        const auto a = w.as_array();
        double sum_us = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_EQ(s.segments[i].duration_us, a[i] / 1000.0);
            sum_us += a[i] / 1000.0;
        }
        EXPECT_EQ(s.total_duration_us(), sum_us);
        const auto th = mixing_angles(s);
        EXPECT_EQ(th[0], 12.5 * (a[0] / 1000.0));
        EXPECT_EQ(th[1], 12.5 * (a[2] / 1000.0));
        EXPECT_EQ(th[2], 12.5 * (a[4] / 1000.0));
    }
}

TEST(ValidateTask, OptimizedWaveformWithFeasibleRegisterIsValid) {
    const RegisterConstraints c;
    const auto g = make_path(1, 4);
    const auto r = embed(g, c, 5);
    ASSERT_TRUE(r.reg);
    EXPECT_TRUE(validate_task(build_schedule(kLambdaBo, 15.8), *r.reg).valid());
}

TEST(ValidateTask, ShortFreeEvolutionMessage) {
    auto s = raw_schedule({85, 4, 50, 25, 20}, 15.8);
    const auto rep = validate_task(s, std::vector<Vec2>{{0, 0}, {6, 0}});
    ASSERT_EQ(rep.violations.size(), 1u);
    EXPECT_EQ(rep.violations[0].rule, "min_segment");
    EXPECT_EQ(rep.violations[0].message.rfind("min_segment: 4 < 5 ns", 0), 0u) << rep.violations[0].message;
    EXPECT_DOUBLE_EQ(rep.violations[0].measured, 4.0);
    EXPECT_DOUBLE_EQ(rep.violations[0].allowed, 5.0);
}

TEST(ValidateTask, AtomOutsideTheRectangle) {
    const auto rep = validate_task(build_schedule(kLambdaBo, 15.8), std::vector<Vec2>{{80, 0}, {74, 0}});
    ASSERT_EQ(rep.violations.size(), 1u);
    EXPECT_EQ(rep.violations[0].message.rfind("register area: x exceeds 75 um", 0), 0u) << rep.violations[0].message;
    EXPECT_EQ(rep.violations[0].measured, 80);
}

TEST(ValidateTask, ListsEveryViolation) {
    PulseSchedule s = raw_schedule({300, 3, 180, 25, 20}, 15.8);
    s.segments[2].omega = 20;
    const auto rep = validate_task(s, std::vector<Vec2>{{10, 1}, {12, 1}, {10, 90}});
    EXPECT_TRUE(has_rule(rep, "total_time"));
    EXPECT_TRUE(has_rule(rep, "min_segment"));
    EXPECT_TRUE(has_rule(rep, "omega"));
    EXPECT_TRUE(has_rule(rep, "register_area"));
    EXPECT_TRUE(has_rule(rep, "row_spacing"));
    EXPECT_TRUE(has_rule(rep, "min_pair_distance"));
}

TEST(ValidateTask, AgreesWithWaveformConstraintsOnRandomLambda) {
    std::mt19937_64 rng(13);
    int valid = 0, invalid = 0;
    const std::vector<Vec2> reg{{0, 0}, {6, 0}};
    for (int t = 0; t < 2000; ++t) {
        WaveformParams w;
        auto a = w.as_array();
        for (auto& v : a) v = uniform01(rng) < 0.1 ? 10 * uniform01(rng) : 2 + 150 * uniform01(rng);
        w = WaveformParams::from_array(a);
        const bool expect = waveform_feasible(w);
        EXPECT_EQ(validate_task(raw_schedule(w, 15.8), reg).valid(), expect) << "trial " << t;
        (expect ? valid : invalid)++;
    }
    EXPECT_GT(valid, 100);
    EXPECT_GT(invalid, 100);
    // Integer boundaries.
    EXPECT_FALSE(validate_task(raw_schedule({5, 10, 10, 10, 10}, 15.8), reg).valid());
    EXPECT_FALSE(validate_task(raw_schedule({100, 100, 100, 100, 100}, 15.8), reg).valid());
    EXPECT_TRUE(validate_task(raw_schedule({6, 6, 6, 6, 6}, 15.8), reg).valid());
}

TEST(Smoothing, KeepsTotalDurationAndAmplitudeBounds) {
    const auto s = build_schedule(kLambdaBo, 15.8);
    const auto sm = smooth_schedule(s, 0.005, 4);
    EXPECT_GT(sm.segments.size(), s.segments.size());
    EXPECT_NEAR(sm.total_duration_us(), s.total_duration_us(), 1e-15);
    for (const auto& seg : sm.segments) {
        EXPECT_GE(seg.omega, 0.0);
        EXPECT_LE(seg.omega, 15.8);
    }
    EXPECT_EQ(smooth_schedule(s, 0.0).segments.size(), s.segments.size());
}

}  // namespace
}  // namespace qek
