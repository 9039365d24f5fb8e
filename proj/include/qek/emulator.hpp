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

#pragma once

// State-vector emulation of a globally driven Rydberg register.
//
// H/hbar = sum_i (Omega/2)(e^{i phi}|0><1|_i + e^{-i phi}|1><0|_i)
//          - Delta sum_i n_i + sum_{i<j} V_ij n_i n_j,   V_ij = C6 / |x_i - x_j|^6
//
// Basis index bit i is atom i (atom 0 least significant); bit value 1 is the
// Rydberg state.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qek/common.hpp"
#include "qek/physics.hpp"
#include "qek/pulses.hpp"

namespace qek {

using cplx = std::complex<double>;

struct StateVector {
    int atoms = 0;
    std::vector<cplx> amp;

    static StateVector ground(int atoms) {
        StateVector s{atoms, std::vector<cplx>(std::size_t{1} << atoms, cplx{0, 0})};
        s.amp[0] = 1.0;
        return s;
    }

    double norm() const {
        double t = 0;
        for (const auto& a : amp) t += std::norm(a);
        return std::sqrt(t);
    }

    std::vector<double> probabilities() const {
        std::vector<double> p(amp.size());
        for (std::size_t k = 0; k < amp.size(); ++k) p[k] = std::norm(amp[k]);
        return p;
    }
};

/// Integration failed inside a schedule segment.
class IntegrationError : public NumericalError {
  public:
    IntegrationError(std::size_t segment, const std::string& what)
        : NumericalError("segment " + std::to_string(segment) + ": " + what), segment_(segment) {}
    std::size_t segment() const { return segment_; }

  private:
    std::size_t segment_;
};

/// Matrix-free Hamiltonian for fixed atom positions. The interaction diagonal
/// is precomputed; the drive acts by flipping one bit at a time.
class RydbergHamiltonian {
  public:
    RydbergHamiltonian(const std::vector<Vec2>& positions, double c6_over_hbar)
        : atoms_(static_cast<int>(positions.size())) {
        if (atoms_ > 30) throw CapacityError("RydbergHamiltonian: too many atoms for a state vector");
        const auto v = interaction_matrix(positions, c6_over_hbar);
        const std::size_t dim = std::size_t{1} << atoms_;
        const auto n = static_cast<std::size_t>(atoms_);
        interaction_.assign(dim, 0.0);
        excitations_.assign(dim, 0);
        for (std::size_t k = 0; k < dim; ++k) {
            double e = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!((k >> i) & 1U)) continue;
                for (std::size_t j = i + 1; j < n; ++j)
                    if ((k >> j) & 1U) e += v[i * n + j];
            }
            interaction_[k] = e;
            excitations_[k] = std::popcount(k);
        }
    }

    int atoms() const { return atoms_; }
    std::size_t dim() const { return interaction_.size(); }
    const std::vector<double>& interaction_diagonal() const { return interaction_; }

    double diagonal(std::size_t k, double detuning) const { return interaction_[k] - detuning * excitations_[k]; }

    /// out = H psi (in units of hbar, rad/us).
    void apply(double omega, double phase, double detuning, const cplx* psi, cplx* out) const {
        const std::size_t dim = this->dim();
        const cplx up = 0.5 * omega * std::polar(1.0, phase);        // coefficient of |0><1|
        const cplx down = 0.5 * omega * std::polar(1.0, -phase);     // coefficient of |1><0|
        for (std::size_t k = 0; k < dim; ++k) {
            cplx acc = diagonal(k, detuning) * psi[k];
            if (omega != 0.0) {
                for (int i = 0; i < atoms_; ++i) {
                    const std::size_t bit = std::size_t{1} << i;
                    acc += (k & bit) ? down * psi[k ^ bit] : up * psi[k | bit];
                }
            }
            out[k] = acc;
        }
    }

    /// Crude bound on the spectral radius, used to pick the first step.
    double spectral_bound(double omega, double detuning) const {
        double dmax = 0;
        for (std::size_t k = 0; k < dim(); ++k) dmax = std::max(dmax, std::abs(diagonal(k, detuning)));
        return dmax + 0.5 * std::abs(omega) * atoms_;
    }

  private:
    int atoms_;
    std::vector<double> interaction_;
    std::vector<int> excitations_;
};

/// Returns -i H psi / hbar for a single set of drive parameters.
inline StateVector hamiltonian_apply(const std::vector<Vec2>& positions, double omega, double phase,
                                     double detuning, const StateVector& state,
                                     const PhysicsConfig& physics = {}) {
    const RydbergHamiltonian h(positions, physics.c6_over_hbar);
    if (state.amp.size() != h.dim()) throw ValidationError("hamiltonian_apply: state dimension mismatch");
    StateVector out{state.atoms, std::vector<cplx>(h.dim())};
    h.apply(omega, phase, detuning, state.amp.data(), out.amp.data());
    for (auto& a : out.amp) a = cplx{a.imag(), -a.real()};
    return out;
}

struct Evolution {
    StateVector state;
    double max_norm_drift = 0;   // largest |norm - 1| seen at a segment end, before renormalizing
    int renormalizations = 0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

class SegmentIntegrator {
  public:
    SegmentIntegrator(const RydbergHamiltonian& h, const PhysicsConfig& cfg) : h_(h), cfg_(cfg) {
        const auto d = h.dim();
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y5_}) v->assign(d, cplx{});
    }

    /// Advances psi through one constant-parameter segment of length `duration`.
    void run(std::vector<cplx>& psi, const PulseSegment& seg, std::size_t index, Evolution& stats) {
        const double T = seg.duration_us;
        if (!(T > 0)) return;
        if (seg.omega == 0.0) {
            // Diagonal generator: exact phase rotation.
            for (std::size_t k = 0; k < psi.size(); ++k)
                psi[k] *= std::polar(1.0, -h_.diagonal(k, seg.detuning) * T);
            return;
        }
        using DP = DormandPrince;
        const std::size_t d = psi.size();
        auto f = [&](const std::vector<cplx>& y, std::vector<cplx>& out) {
            h_.apply(seg.omega, seg.phase, seg.detuning, y.data(), out.data());
            for (auto& a : out) a = cplx{a.imag(), -a.real()};  // multiply by -i
        };
        double h = std::min({cfg_.max_step_us, T, 0.5 / std::max(1.0, h_.spectral_bound(seg.omega, seg.detuning))});
        double t = 0;
        f(psi, k1_);
        std::size_t guard = 0;
        const std::size_t max_steps = 50'000'000;
        while (t < T) {
            const bool last = t + h >= T;
            if (last) h = T - t;
            auto stage = [&](std::vector<cplx>& out, std::initializer_list<std::pair<double, const std::vector<cplx>*>> terms) {
                for (std::size_t k = 0; k < d; ++k) {
                    cplx acc = psi[k];
                    for (const auto& [a, kv] : terms) acc += h * a * (*kv)[k];
                    tmp_[k] = acc;
                }
                f(tmp_, out);
            };
            stage(k2_, {{DP::a21, &k1_}});
            stage(k3_, {{DP::a31, &k1_}, {DP::a32, &k2_}});
            stage(k4_, {{DP::a41, &k1_}, {DP::a42, &k2_}, {DP::a43, &k3_}});
            stage(k5_, {{DP::a51, &k1_}, {DP::a52, &k2_}, {DP::a53, &k3_}, {DP::a54, &k4_}});
            stage(k6_, {{DP::a61, &k1_}, {DP::a62, &k2_}, {DP::a63, &k3_}, {DP::a64, &k4_}, {DP::a65, &k5_}});
            for (std::size_t k = 0; k < d; ++k)
                y5_[k] = psi[k] + h * (DP::b1 * k1_[k] + DP::b3 * k3_[k] + DP::b4 * k4_[k] + DP::b5 * k5_[k] +
                                       DP::b6 * k6_[k]);
            f(y5_, k7_);
            double err = 0;
            for (std::size_t k = 0; k < d; ++k) {
                const cplx e = h * (DP::e1 * k1_[k] + DP::e3 * k3_[k] + DP::e4 * k4_[k] + DP::e5 * k5_[k] +
                                    DP::e6 * k6_[k] + DP::e7 * k7_[k]);
                const double sc = cfg_.abs_tolerance + cfg_.rel_tolerance * std::max(std::abs(psi[k]), std::abs(y5_[k]));
                const double r = std::abs(e) / sc;
                err += r * r;
            }
            err = std::sqrt(err / static_cast<double>(d));
            if (!std::isfinite(err)) throw IntegrationError(index, "non-finite error estimate");
            if (err <= 1.0) {
                t = last ? T : t + h;
                psi.swap(y5_);
                k1_.swap(k7_);  // first-same-as-last
                ++stats.accepted_steps;
            } else {
                ++stats.rejected_steps;
            }
            const double fac = err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(cfg_.max_step_us, h * (err <= 1.0 ? fac : std::min(1.0, fac)));
            if (t < T && h < 1e-14 * T) throw IntegrationError(index, "step size underflow");
            if (++guard > max_steps) throw IntegrationError(index, "step budget exhausted");
        }
    }

  private:
    const RydbergHamiltonian& h_;
    const PhysicsConfig& cfg_;
    std::vector<cplx> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y5_;
};

}  // namespace detail

/// Evolves |0...0> through every segment of `schedule`.
inline Evolution evolve(const std::vector<Vec2>& positions, const PulseSchedule& schedule,
                        const PhysicsConfig& physics = {}) {
    physics.validate();
    const int n = static_cast<int>(positions.size());
    if (n < 1) throw ValidationError("evolve: empty register");
    if (n > physics.max_atoms)
        throw CapacityError("evolve: " + std::to_string(n) + " atoms exceeds the cap of " +
                            std::to_string(physics.max_atoms));
    for (std::size_t i = 0; i < schedule.segments.size(); ++i)
        if (!(schedule.segments[i].duration_us >= 0) || !std::isfinite(schedule.segments[i].omega))
            throw ValidationError("evolve: invalid segment " + std::to_string(i));
    const RydbergHamiltonian h(positions, physics.c6_over_hbar);
    Evolution ev;
    ev.state = StateVector::ground(n);
    detail::SegmentIntegrator integrator(h, physics);
    for (std::size_t i = 0; i < schedule.segments.size(); ++i) {
        integrator.run(ev.state.amp, schedule.segments[i], i, ev);
        const double nrm = ev.state.norm();
        const double drift = std::abs(nrm - 1.0);
        ev.max_norm_drift = std::max(ev.max_norm_drift, drift);
        if (drift > 1e-12) {
            for (auto& a : ev.state.amp) a /= nrm;
            ++ev.renormalizations;
        }
    }
    return ev;
}

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

struct NoiseModel {
    double p_init_fail = 0;  // per atom; a shot with any failed atom is discarded
    double eps_g_to_r = 0;   // ground read as Rydberg
    double eps_r_to_g = 0;   // Rydberg read as ground

    void validate() const {
        for (double p : {p_init_fail, eps_g_to_r, eps_r_to_g})
            if (!(p >= 0 && p < 1)) throw ValidationError("noise probabilities must lie in [0, 1)");
    }
};

/// Kept shots as basis indices (bit i = atom i).
struct MeasurementSet {
    int atoms = 0;
    std::size_t requested = 0;
    std::vector<std::uint64_t> shots;

    std::size_t kept() const { return shots.size(); }
    bool operator==(const MeasurementSet&) const = default;
};

/// Bitstring with character i describing atom i ('1' = Rydberg).
inline std::string to_bitstring(std::uint64_t shot, int atoms) {
    std::string s(static_cast<std::size_t>(atoms), '0');
    for (int i = 0; i < atoms; ++i)
        if ((shot >> i) & 1U) s[static_cast<std::size_t>(i)] = '1';
    return s;
}

inline std::uint64_t from_bitstring(const std::string& s) {
    if (s.size() > 64) throw ValidationError("bitstring longer than 64 atoms");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1')
            v |= std::uint64_t{1} << i;
        else if (s[i] != '0')
            throw ValidationError("bitstring contains '" + std::string(1, s[i]) + "'");
    }
    return v;
}

/// Draws i.i.d. computational-basis shots from |amp|^2, then applies the noise model.
inline MeasurementSet sample(const StateVector& state, std::size_t n_shots, std::uint64_t seed,
                             const NoiseModel& noise = {}) {
    if (n_shots < 1) throw ValidationError("sample: n_shots must be >= 1");
    noise.validate();
    std::vector<double> cdf(state.amp.size());
    double acc = 0;
    for (std::size_t k = 0; k < cdf.size(); ++k) {
        acc += std::norm(state.amp[k]);
        cdf[k] = acc;
    }
    std::mt19937_64 rng(seed);
    const double discard = 1.0 - std::pow(1.0 - noise.p_init_fail, state.atoms);
    MeasurementSet m{state.atoms, n_shots, {}};
    m.shots.reserve(n_shots);
    for (std::size_t s = 0; s < n_shots; ++s) {
        if (discard > 0 && uniform01(rng) < discard) continue;
        const double u = uniform01(rng) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        auto shot = static_cast<std::uint64_t>(it - cdf.begin());
        if (noise.eps_g_to_r > 0 || noise.eps_r_to_g > 0) {
            for (int i = 0; i < state.atoms; ++i) {
                const std::uint64_t bit = std::uint64_t{1} << i;
                const double eps = (shot & bit) ? noise.eps_r_to_g : noise.eps_g_to_r;
                if (eps > 0 && uniform01(rng) < eps) shot ^= bit;
            }
        }
        m.shots.push_back(shot);
    }
    return m;
}

}  // namespace qek
