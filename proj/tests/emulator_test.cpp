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

#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qek/expm_oracle.hpp"
#include "test_support.hpp"

namespace qek {
namespace {

double max_amp_error(const StateVector& a, const StateVector& b) {
    double e = 0;
    for (std::size_t k = 0; k < a.amp.size(); ++k) e = std::max(e, std::abs(a.amp[k] - b.amp[k]));
    return e;
}

PulseSchedule single(double duration_us, double omega, double phase = 0, double detuning = 0) {
    return PulseSchedule{{{duration_us, omega, phase, detuning}}};
}

TEST(Hamiltonian, AllGroundWithoutDriveHasZeroDerivative) {
    const std::vector<Vec2> pos{{0, 0}, {5, 0}, {0, 6}};
    const auto d = hamiltonian_apply(pos, 0, 0, 0, StateVector::ground(3));
    for (const auto& a : d.amp) EXPECT_EQ(a, cplx(0, 0));
}

TEST(Hamiltonian, SingleAtomDriveCoupling) {
    const auto d = hamiltonian_apply({{0, 0}}, 2.0, 0.0, 0.0, StateVector::ground(1));
    EXPECT_NEAR(std::abs(d.amp[0]), 0.0, 1e-15);
    EXPECT_NEAR(d.amp[1].real(), 0.0, 1e-15);
    EXPECT_NEAR(d.amp[1].imag(), -1.0, 1e-15);
}

TEST(Hamiltonian, PairInteractionOnDoublyExcitedState) {
    const std::vector<Vec2> pos{{0, 0}, {4, 0}};
    const RydbergHamiltonian h(pos, 5.42e6);
    EXPECT_DOUBLE_EQ(h.interaction_diagonal()[3], 5.42e6 / 4096.0);
    EXPECT_EQ(h.interaction_diagonal()[1], 0.0);
    EXPECT_EQ(h.interaction_diagonal()[2], 0.0);
    EXPECT_DOUBLE_EQ(h.diagonal(3, 2.0), 5.42e6 / 4096.0 - 4.0);
}

TEST(Hamiltonian, MatchesDenseMatrixOnRandomStates) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        const int n = 1 + static_cast<int>(uniform_index(rng, 5));
        const auto pos = testing::random_positions(rng, n, 20, 4);
        StateVector psi{n, std::vector<cplx>(std::size_t{1} << n)};
        for (auto& a : psi.amp) a = {standard_normal(rng), standard_normal(rng)};
        const double om = 10 * uniform01(rng), ph = 6 * uniform01(rng), de = 5 * uniform01(rng);
        const auto d = hamiltonian_apply(pos, om, ph, de, psi);
        const Eigen::MatrixXcd H = dense_hamiltonian(pos, om, ph, de);
        const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(psi.amp.data(), H.rows());
        const Eigen::VectorXcd ref = cplx(0, -1) * (H * v);
        for (Eigen::Index k = 0; k < ref.size(); ++k)
            EXPECT_NEAR(std::abs(d.amp[static_cast<std::size_t>(k)] - ref[k]), 0.0, 1e-9 * (1 + std::abs(ref[k])));
        EXPECT_TRUE(H.isApprox(H.adjoint()));
    }
}

TEST(Evolve, RabiPiPulseFullyExcites) {
    const double omega = 15.8;
    const auto ev = evolve({{0, 0}}, single(std::numbers::pi / omega, omega));
    EXPECT_NEAR(ev.state.probabilities()[1], 1.0, 1e-8);
}

TEST(Evolve, RabiFormulaOverManyAngles) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 30; ++t) {
        const double omega = 1 + 14.8 * uniform01(rng);
        const double tau = 0.5 * uniform01(rng);
        const auto ev = evolve({{0, 0}}, single(tau, omega, 2 * std::numbers::pi * uniform01(rng)));
        const double s = std::sin(omega * tau / 2);
        EXPECT_NEAR(ev.state.probabilities()[1], s * s, 1e-7);
    }
}

TEST(Evolve, DriveOffKeepsAllGround) {
    std::mt19937_64 rng(1);
    const auto pos = testing::random_positions(rng, 5, 20, 4);
    PulseSchedule s{{{0.1, 0, 0, 0}, {0.2, 0, 1.0, 3.0}}};
    const auto ev = evolve(pos, s);
    EXPECT_NEAR(std::norm(ev.state.amp[0]), 1.0, 1e-14);
}

TEST(Evolve, BlockadeSuppressesDoubleExcitation) {
    const double rb = default_blockade_radius();
    const std::vector<Vec2> pos{{0, 0}, {rb / 2, 0}};
    for (double tau : {0.05, 0.137, 0.25, 0.5}) {
        const auto ev = evolve(pos, single(tau, 15.8, kMixingPhase));
        EXPECT_LT(ev.state.probabilities()[3], 1e-2) << tau;
        const auto ref = expm_evolve(pos, single(tau, 15.8, kMixingPhase));
        EXPECT_LT(max_amp_error(ev.state, ref), 1e-6);
    }
}

TEST(Evolve, MatchesDenseOracleOnRandomRegistersAndSchedules) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + static_cast<int>(uniform_index(rng, 4));
        const auto pos = testing::random_positions(rng, n, 18, 4);
        const auto sched = testing::random_schedule(rng, 1 + static_cast<int>(uniform_index(rng, 5)), 0.5);
        const auto ev = evolve(pos, sched);
        EXPECT_LT(max_amp_error(ev.state, expm_evolve(pos, sched)), 1e-6) << "trial " << t;
        EXPECT_LT(std::abs(ev.state.norm() - 1), 1e-8);
        EXPECT_LT(ev.max_norm_drift, 1e-8);
    }
}

TEST(Evolve, SegmentwiseAgreementWithOracle) {
    std::mt19937_64 rng(31);
    const auto pos = testing::random_positions(rng, 4, 16, 4);
    const auto sched = build_schedule({85, 21, 50, 25, 20}, 15.8);
    PulseSchedule prefix;
    for (const auto& seg : sched.segments) {
        prefix.segments.push_back(seg);
        EXPECT_LT(max_amp_error(evolve(pos, prefix).state, expm_evolve(pos, prefix)), 1e-6);
    }
}

TEST(Evolve, PhaseZeroAndHalfPiGiveSameDistribution) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const int n = 2 + static_cast<int>(uniform_index(rng, 5));
        const auto pos = testing::random_positions(rng, n, 18, 4);
        const auto w = to_waveform(Polytope{}.sample(rng));
        const auto py = expm_evolve(pos, build_schedule(w, 15.8, {}, kMixingPhase)).probabilities();
        const auto px = expm_evolve(pos, build_schedule(w, 15.8, {}, 0.0)).probabilities();
        for (std::size_t k = 0; k < py.size(); ++k) EXPECT_NEAR(py[k], px[k], 1e-10);
        const auto ey = evolve(pos, build_schedule(w, 15.8, {}, kMixingPhase)).state.probabilities();
        const auto ex = evolve(pos, build_schedule(w, 15.8, {}, 0.0)).state.probabilities();
        for (std::size_t k = 0; k < py.size(); ++k) EXPECT_NEAR(ey[k], ex[k], 1e-7);
    }
}

TEST(Evolve, PermutingAtomsPermutesBits) {
    std::mt19937_64 rng(6);
    const int n = 5;
    const auto pos = testing::random_positions(rng, n, 18, 4);
    std::vector<int> perm{3, 0, 4, 1, 2};  // new atom i is old atom perm[i]
    std::vector<Vec2> moved(n);
    for (int i = 0; i < n; ++i) moved[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    const auto sched = build_schedule({85, 21, 50, 25, 20}, 15.8);
    const auto a = evolve(pos, sched).state.probabilities();
    const auto b = evolve(moved, sched).state.probabilities();
    for (std::size_t k = 0; k < a.size(); ++k) {
        std::size_t kk = 0;
        for (int i = 0; i < n; ++i)
            if ((k >> perm[static_cast<std::size_t>(i)]) & 1U) kk |= std::size_t{1} << i;
        EXPECT_NEAR(a[k], b[kk], 1e-8);
    }
}

TEST(Evolve, DeterministicAndCapped) {
    const std::vector<Vec2> pos{{0, 0}, {6, 0}, {12, 0}};
    const auto sched = build_schedule({85, 21, 50, 25, 20}, 15.8);
    EXPECT_EQ(evolve(pos, sched).state.amp, evolve(pos, sched).state.amp);
    PhysicsConfig small;
    small.max_atoms = 2;
    EXPECT_THROW(evolve(pos, sched, small), CapacityError);
    EXPECT_THROW(expm_oracle(std::vector<Vec2>(7, Vec2{}), 1, 0, 0, 0.1, StateVector::ground(7)), CapacityError);
}

TEST(Oracle, ZeroDurationIsIdentityAndUndrivenKeepsModuli) {
    std::mt19937_64 rng(2);
    const auto pos = testing::random_positions(rng, 3, 15, 4);
    StateVector psi{3, std::vector<cplx>(8)};
    for (auto& a : psi.amp) a = {standard_normal(rng), standard_normal(rng)};
    const auto id = expm_oracle(pos, 10, 1, 2, 0.0, psi);
    EXPECT_LT(max_amp_error(id, psi), 1e-12);
    const auto diag = expm_oracle(pos, 0, 0, 3, 0.2, psi);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(std::abs(diag.amp[k]), std::abs(psi.amp[k]), 1e-12);
}

TEST(Sample, AllGroundGivesAllZeroShots) {
    const auto m = sample(StateVector::ground(4), 100, 3);
    EXPECT_EQ(m.requested, 100u);
    ASSERT_EQ(m.kept(), 100u);
    for (auto s : m.shots) EXPECT_EQ(to_bitstring(s, 4), "0000");
}

TEST(Sample, UniformSuperpositionWithinFiveSigma) {
    StateVector s{1, {cplx(1 / std::sqrt(2.0), 0), cplx(0, 1 / std::sqrt(2.0))}};
    const std::size_t n = 100000;
    const auto m = sample(s, n, 77);
    const double ones = static_cast<double>(std::count(m.shots.begin(), m.shots.end(), 1u));
    EXPECT_LT(std::abs(ones / n - 0.5), 5 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST(Sample, InitializationFailuresDiscardShots) {
    const int atoms = 4;
    const double p = 1 - std::pow(0.9, 1.0 / atoms);
    NoiseModel nm;
    nm.p_init_fail = p;
    const auto m = sample(StateVector::ground(atoms), 1000, 5, nm);
    const double sigma = std::sqrt(1000 * 0.9 * 0.1);
    EXPECT_EQ(m.requested, 1000u);
    EXPECT_LT(std::abs(static_cast<double>(m.kept()) - 900.0), 5 * sigma);
}

TEST(Sample, DetectionFlipsAtConfiguredRate) {
    NoiseModel nm;
    nm.eps_g_to_r = 0.1;
    const std::size_t n = 20000;
    const auto m = sample(StateVector::ground(3), n, 9, nm);
    double ones = 0;
    for (auto s : m.shots) ones += std::popcount(s);
    const double trials = 3.0 * n;
    EXPECT_LT(std::abs(ones / trials - 0.1), 5 * std::sqrt(0.1 * 0.9 / trials));
    NoiseModel bad;
    bad.eps_r_to_g = 1.0;
    EXPECT_THROW(sample(StateVector::ground(1), 10, 1, bad), ValidationError);
}

TEST(Sample, DeterministicForSeed) {
    StateVector s{2, {cplx(0.5, 0), cplx(0.5, 0), cplx(0, 0.5), cplx(0.5, 0)}};
    EXPECT_EQ(sample(s, 500, 42), sample(s, 500, 42));
    EXPECT_NE(sample(s, 500, 42), sample(s, 500, 43));
    EXPECT_THROW(sample(s, 0, 1), ValidationError);
}

TEST(Bitstrings, RoundTripAndAtomZeroFirst) {
    EXPECT_EQ(to_bitstring(0b0001, 4), "1000");
    EXPECT_EQ(from_bitstring("0010"), 0b0100u);
    for (std::uint64_t v = 0; v < 64; ++v) EXPECT_EQ(from_bitstring(to_bitstring(v, 6)), v);
    EXPECT_THROW(from_bitstring("01a"), ValidationError);
}

}  // namespace
}  // namespace qek
