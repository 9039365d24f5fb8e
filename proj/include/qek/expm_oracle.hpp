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

// Dense reference propagator for small registers. Builds the full Hermitian
// matrix, diagonalizes it and applies exp(-i H t) exactly. Test use only.

#include <Eigen/Dense>

#include "qek/emulator.hpp"

namespace qek {

inline constexpr int kExpmOracleMaxAtoms = 6;

/// Dense H/hbar for one set of drive parameters.
inline Eigen::MatrixXcd dense_hamiltonian(const std::vector<Vec2>& positions, double omega, double phase,
                                          double detuning, const PhysicsConfig& physics = {}) {
    const RydbergHamiltonian h(positions, physics.c6_over_hbar);
    const auto dim = static_cast<Eigen::Index>(h.dim());
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim, dim);
    const int n = static_cast<int>(positions.size());
    for (Eigen::Index k = 0; k < dim; ++k) {
        H(k, k) = h.diagonal(static_cast<std::size_t>(k), detuning);
        for (int i = 0; i < n; ++i) {
            const Eigen::Index bit = Eigen::Index{1} << i;
            if (k & bit) continue;
            // <k|H|k+bit>: lowering term (Omega/2) e^{i phi} |0><1|
            const cplx c = 0.5 * omega * std::polar(1.0, phase);
            H(k, k | bit) = c;
            H(k | bit, k) = std::conj(c);
        }
    }
    return H;
}

/// exp(-i H duration) applied to `state` for constant drive parameters.
inline StateVector expm_oracle(const std::vector<Vec2>& positions, double omega, double phase, double detuning,
                               double duration_us, const StateVector& state, const PhysicsConfig& physics = {}) {
    if (static_cast<int>(positions.size()) > kExpmOracleMaxAtoms)
        throw CapacityError("expm_oracle: at most " + std::to_string(kExpmOracleMaxAtoms) + " atoms");
    const Eigen::MatrixXcd H = dense_hamiltonian(positions, omega, phase, detuning, physics);
    if (static_cast<std::size_t>(H.rows()) != state.amp.size())
        throw ValidationError("expm_oracle: state dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success) throw NumericalError("expm_oracle: eigendecomposition failed");
    const Eigen::VectorXcd psi = Eigen::Map<const Eigen::VectorXcd>(state.amp.data(), H.rows());
    Eigen::VectorXcd coeff = es.eigenvectors().adjoint() * psi;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff[k] *= std::polar(1.0, -es.eigenvalues()[k] * duration_us);
    const Eigen::VectorXcd out = es.eigenvectors() * coeff;
    StateVector r{state.atoms, std::vector<cplx>(out.data(), out.data() + out.size())};
    return r;
}

/// Segment-by-segment oracle evolution of |0...0>.
inline StateVector expm_evolve(const std::vector<Vec2>& positions, const PulseSchedule& schedule,
                               const PhysicsConfig& physics = {}) {
    auto s = StateVector::ground(static_cast<int>(positions.size()));
    for (const auto& seg : schedule.segments)
        s = expm_oracle(positions, seg.omega, seg.phase, seg.detuning, seg.duration_us, s, physics);
    return s;
}

}  // namespace qek
