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

// Interaction-energy distributions and graph kernels built on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "qek/common.hpp"
#include "qek/emulator.hpp"
#include "qek/graph.hpp"
#include "qek/physics.hpp"

namespace qek {

inline constexpr std::size_t kEnergyBins = 100;

/// Interaction energies (rad/us) of the kept shots of one graph.
struct EnergySample {
    GraphId graph_id = 0;
    std::vector<double> values;
};

struct EnergyDistribution {
    GraphId graph_id = 0;
    double e1 = 0, e2 = 0;
    std::vector<double> probabilities;  // kEnergyBins entries

    bool operator==(const EnergyDistribution&) const = default;
};

struct Binning {
    double e1 = 0, e2 = 0;
    std::vector<double> edges;  // kEnergyBins + 1 entries; all equal when e1 == e2
    bool degenerate() const { return !(e2 > e1); }
};

enum class KernelKind { qek, spk };

/// Symmetric similarity matrix (row-major) over an ordered list of graph ids.
struct KernelMatrix {
    KernelKind kind = KernelKind::qek;
    double mu = 1.0;
    std::vector<GraphId> ids;
    std::vector<double> values;

    std::size_t size() const { return ids.size(); }
    double operator()(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }
};

// ---------------------------------------------------------------------------
// Energies and binning
// ---------------------------------------------------------------------------

/// Sum over every unordered pair j<k of V_jk n_j n_k; non-edges contribute their tails.
inline double interaction_energy(std::uint64_t shot, const std::vector<double>& interactions, std::size_t atoms) {
    double e = 0;
    for (std::size_t j = 0; j < atoms; ++j) {
        if (!((shot >> j) & 1U)) continue;
        for (std::size_t k = j + 1; k < atoms; ++k)
            if ((shot >> k) & 1U) e += interactions[j * atoms + k];
    }
    return e;
}

inline double interaction_energy(const std::string& bitstring, const std::vector<Vec2>& positions,
                                 const PhysicsConfig& physics = {}) {
    if (bitstring.size() != positions.size())
        throw ValidationError("interaction_energy: bitstring length differs from atom count");
    return interaction_energy(from_bitstring(bitstring), interaction_matrix(positions, physics.c6_over_hbar),
                              positions.size());
}

inline EnergySample energy_sample(GraphId id, const MeasurementSet& m, const std::vector<Vec2>& positions,
                                  const PhysicsConfig& physics = {}) {
    if (static_cast<std::size_t>(m.atoms) != positions.size())
        throw ValidationError("energy_sample: graph " + std::to_string(id) + " atom count mismatch");
    const auto v = interaction_matrix(positions, physics.c6_over_hbar);
    EnergySample s{id, {}};
    s.values.reserve(m.shots.size());
    for (auto shot : m.shots) s.values.push_back(interaction_energy(shot, v, positions.size()));
    return s;
}

/// Shared support [e1, e2] over all samples, split in kEnergyBins equal bins.
inline Binning global_binning(const std::vector<EnergySample>& samples) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples)
        for (double v : s.values) {
            if (!std::isfinite(v)) throw ValidationError("global_binning: non-finite energy");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(lo <= hi)) throw ValidationError("global_binning: every sample is empty");
    Binning b{lo, hi, std::vector<double>(kEnergyBins + 1)};
    for (std::size_t i = 0; i <= kEnergyBins; ++i)
        b.edges[i] = i == kEnergyBins ? hi : lo + (hi - lo) * static_cast<double>(i) / kEnergyBins;
    return b;
}

/// Bin index of v; the last bin is right-closed. Throws outside [e1, e2].
inline std::size_t bin_index(double v, const Binning& b) {
    if (!(v >= b.e1 && v <= b.e2)) throw ValidationError("energy outside the binning support");
    if (b.degenerate()) return 0;
    // Arithmetic guess, then fix against the stored edges.
    auto i = static_cast<std::size_t>((v - b.e1) / (b.e2 - b.e1) * kEnergyBins);
    i = std::min(i, kEnergyBins - 1);
    while (i > 0 && v < b.edges[i]) --i;
    while (i + 1 < kEnergyBins && v >= b.edges[i + 1]) ++i;
    return i;
}

/// Normalized histogram of `sample` on the shared binning. A degenerate
/// support places all mass in the first bin.
inline EnergyDistribution to_distribution(const EnergySample& sample, const Binning& b) {
    if (sample.values.empty())
        throw ValidationError("to_distribution: graph " + std::to_string(sample.graph_id) + " has no kept shots");
    std::vector<std::size_t> counts(kEnergyBins, 0);
    for (double v : sample.values) ++counts[bin_index(v, b)];
    EnergyDistribution d{sample.graph_id, b.e1, b.e2, std::vector<double>(kEnergyBins)};
    const auto k = static_cast<double>(sample.values.size());
    for (std::size_t i = 0; i < kEnergyBins; ++i) d.probabilities[i] = static_cast<double>(counts[i]) / k;
    return d;
}

// ---------------------------------------------------------------------------
// Divergence and kernels
// ---------------------------------------------------------------------------

/// Jensen-Shannon divergence with natural logarithms, in [0, ln 2].
///
/// Evaluated as sum_i [p log(2p/(p+q)) + q log(2q/(p+q))] / 2 on the inputs
/// divided by their totals; mass on bins where only one side is non-zero
/// contributes exactly ln 2 times its share, so disjoint supports return ln 2.
inline double js_divergence(const std::vector<double>& P, const std::vector<double>& Q) {
    if (P.size() != Q.size()) throw ValidationError("js_divergence: support lengths differ");
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        if (!(P[i] >= 0 && Q[i] >= 0)) throw ValidationError("js_divergence: negative probability");
        sp += P[i];
        sq += Q[i];
    }
    if (std::abs(sp - 1) > 1e-9 || std::abs(sq - 1) > 1e-9)
        throw ValidationError("js_divergence: inputs are not normalized");
    double shared = 0, only_p = 0, only_q = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double p = P[i], q = Q[i];
        if (p > 0 && q > 0) {
            const double pn = p / sp, qn = q / sq, m = pn + qn;
            shared += pn * std::log(2 * pn / m) + qn * std::log(2 * qn / m);
        } else if (p > 0) {
            only_p += p;
        } else if (q > 0) {
            only_q += q;
        }
    }
    const double js = 0.5 * shared + 0.5 * std::numbers::ln2 * (only_p / sp + only_q / sq);
    return std::clamp(js, 0.0, std::numbers::ln2);
}

/// exp(-mu * JS), evaluated as 2^(-mu * JS / ln 2) so that JS = ln 2 yields 2^-mu exactly.
inline double qek_value(double js, double mu) {
    if (!(mu > 0)) throw ValidationError("qek: mu must be positive");
    return std::exp2(-mu * (js / std::numbers::ln2));
}

inline double qek_value(const EnergyDistribution& a, const EnergyDistribution& b, double mu) {
    return qek_value(js_divergence(a.probabilities, b.probabilities), mu);
}

inline KernelMatrix qek_matrix(const std::vector<EnergyDistribution>& dists, double mu = 1.0) {
    if (dists.size() < 2) throw ValidationError("qek_matrix: need at least two distributions");
    if (!(mu > 0)) throw ValidationError("qek: mu must be positive");
    const std::size_t n = dists.size();
    KernelMatrix K{KernelKind::qek, mu, {}, std::vector<double>(n * n, 0.0)};
    for (const auto& d : dists) K.ids.push_back(d.graph_id);
    parallel_for(n, [&](std::size_t i) {
        K(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) K(i, j) = qek_value(dists[i], dists[j], mu);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) K(j, i) = K(i, j);
    return K;
}

/// Counts of shortest-path lengths over unordered connected node pairs.
inline std::map<int, std::size_t> shortest_path_histogram(const Graph& g) {
    std::map<int, std::size_t> h;
    const auto adj = adjacency(g);
    for (int s = 0; s < g.nodes; ++s) {
        const auto d = bfs_distances(adj, s);
        for (int t = s + 1; t < g.nodes; ++t)
            if (d[t] > 0) ++h[d[t]];
    }
    return h;
}

/// Unnormalized delta kernel on path lengths: number of path pairs of equal length.
inline double spk_raw(const std::map<int, std::size_t>& a, const std::map<int, std::size_t>& b) {
    double k = 0;
    for (const auto& [len, ca] : a) {
        const auto it = b.find(len);
        if (it != b.end()) k += static_cast<double>(ca) * static_cast<double>(it->second);
    }
    return k;
}

/// Normalized shortest-path kernel K(G,G') / sqrt(K(G,G) K(G',G')).
inline KernelMatrix spk_matrix(const std::vector<Graph>& graphs) {
    const std::size_t n = graphs.size();
    KernelMatrix K{KernelKind::spk, 0.0, {}, std::vector<double>(n * n, 0.0)};
    std::vector<std::map<int, std::size_t>> hist(n);
    parallel_for(n, [&](std::size_t i) { hist[i] = shortest_path_histogram(graphs[i]); });
    std::vector<double> self(n);
    for (std::size_t i = 0; i < n; ++i) {
        K.ids.push_back(graphs[i].id);
        self[i] = spk_raw(hist[i], hist[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        K(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double den = std::sqrt(self[i] * self[j]);
            K(i, j) = K(j, i) = den > 0 ? spk_raw(hist[i], hist[j]) / den : 0.0;
        }
    }
    return K;
}

}  // namespace qek
