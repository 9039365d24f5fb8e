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

// Device constants and the Van der Waals interaction shared by the
// embedder, emulator and feature extraction.

#include <cmath>
#include <vector>

#include "qek/common.hpp"

namespace qek {

/// Position in micrometres.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

inline double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Maximum Rabi frequency of the drive, rad/us.
inline constexpr double kDefaultOmegaMax = 15.8;

struct PhysicsConfig {
    /// C6/hbar in rad*um^6/us. Device-class value for the 70S Rb-87 level.
    double c6_over_hbar = 5.42e6;
    /// Relative tolerance of the adaptive integrator.
    double rel_tolerance = 1e-8;
    /// Absolute tolerance on amplitudes.
    double abs_tolerance = 1e-10;
    /// Largest step the integrator may take, us.
    double max_step_us = 1e-2;
    /// Largest register the emulator accepts.
    int max_atoms = 14;

    void validate() const {
        if (!(c6_over_hbar > 0)) throw ValidationError("c6_over_hbar must be positive");
        if (!(rel_tolerance > 0 && rel_tolerance < 1e-4)) throw ValidationError("rel_tolerance must lie in (0, 1e-4)");
        if (!(abs_tolerance > 0)) throw ValidationError("abs_tolerance must be positive");
        if (!(max_step_us > 0)) throw ValidationError("max_step_us must be positive");
        if (max_atoms < 1) throw ValidationError("max_atoms must be >= 1");
    }
};

/// V = C6 / d^6 in rad/us.
inline double vdw_interaction(double c6_over_hbar, double d_um) {
    const double d2 = d_um * d_um;
    return c6_over_hbar / (d2 * d2 * d2);
}

/// Blockade radius (C6 / (hbar * sqrt(Omega^2 + Delta^2)))^(1/6), um.
inline double rydberg_radius(double c6_over_hbar, double omega, double detuning = 0.0) {
    const double rate = std::hypot(omega, detuning);
    if (!(rate > 0)) throw ValidationError("rydberg_radius: drive strength must be positive");
    return std::pow(c6_over_hbar / rate, 1.0 / 6.0);
}

inline double default_blockade_radius() { return rydberg_radius(PhysicsConfig{}.c6_over_hbar, kDefaultOmegaMax); }

/// Pairwise interaction matrix (row-major n*n, zero diagonal).
inline std::vector<double> interaction_matrix(const std::vector<Vec2>& pos, double c6_over_hbar) {
    const std::size_t n = pos.size();
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(pos[i], pos[j]);
            if (!(d > 0)) throw ValidationError("two atoms share a position");
            v[i * n + j] = v[j * n + i] = vdw_interaction(c6_over_hbar, d);
        }
    return v;
}

}  // namespace qek
