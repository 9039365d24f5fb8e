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

// Unit-disk embedding of graphs into a rectangular atom register.
//
// A penalty loss is zero exactly when the positions realize the graph as a
// unit-disk graph (with a safety margin around the blockade radius) and
// satisfy the register rules. Embedding runs seeded multi-restart gradient
// descent on that loss, snaps atoms to the discrete rows, re-optimizes the
// x coordinates with rows frozen, and accepts a result only if the exact
// checker verify_ud agrees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qek/common.hpp"
#include "qek/graph.hpp"
#include "qek/physics.hpp"

namespace qek {

struct RegisterConstraints {
    double width = 75.0;              // um
    double height = 76.0;             // um
    double row_spacing = 4.0;         // um, 0 disables the row rule
    double min_pair_distance = 4.0;   // um
    double blockade_radius = default_blockade_radius();  // um
    double margin = -1.0;             // um, negative selects blockade_radius / 20

    double effective_margin() const { return margin < 0 ? blockade_radius / 20.0 : margin; }

    void validate() const {
        if (!(width > 0 && height > 0)) throw ValidationError("register width and height must be positive");
        if (!(row_spacing >= 0)) throw ValidationError("row_spacing must be >= 0");
        if (!(min_pair_distance > 0)) throw ValidationError("min_pair_distance must be positive");
        if (!(min_pair_distance < blockade_radius))
            throw ValidationError("min_pair_distance must be smaller than the blockade radius");
        if (!(blockade_radius < std::max(width, height)))
            throw ValidationError("blockade radius must be smaller than the register");
        if (effective_margin() < 0 || effective_margin() >= blockade_radius - min_pair_distance)
            throw ValidationError("margin must lie in [0, blockade_radius - min_pair_distance)");
    }

    /// Upper bound on the number of atoms the rectangle can hold.
    std::size_t capacity() const {
        const double dy = row_spacing > 0 ? row_spacing : min_pair_distance;
        const auto rows = static_cast<std::size_t>(std::floor(height / dy + 1e-9)) + 1;
        const auto cols = static_cast<std::size_t>(std::floor(width / min_pair_distance + 1e-9)) + 1;
        return rows * cols;
    }
};

/// Atom positions (um) realizing a graph, paired with the blockade radius.
struct Register {
    GraphId graph_id = 0;
    double r_b = 0.0;
    std::vector<Vec2> positions;

    std::size_t size() const { return positions.size(); }
    bool operator==(const Register&) const = default;
};

struct EmbeddingReport {
    bool feasible = false;
    std::vector<Edge> violated_edges;   // edges with d >= r_b
    std::vector<Edge> spurious_edges;   // non-edges with d < r_b
    std::vector<std::string> boundary_violations;  // area, spacing and row rules
    double final_loss = 0.0;
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace detail {

struct LossTerms {
    bool rows = true;       // include the row terms
    bool move_y = true;     // accumulate y gradients
};

inline double row_offset(double y, double spacing) {
    const double r = y - spacing * std::round(y / spacing);
    return r;  // signed distance to the nearest row, in [-s/2, s/2]
}

/// Loss and (optionally) its gradient, laid out as [x0, y0, x1, y1, ...].
inline double loss_with_gradient(const std::vector<Vec2>& pos, const Graph& g, const RegisterConstraints& c,
                                 std::vector<double>* grad, LossTerms terms = {}) {
    const std::size_t n = pos.size();
    if (grad) grad->assign(2 * n, 0.0);
    const double rb = c.blockade_radius;
    const double m = c.effective_margin();
    const double s = c.row_spacing;
    const bool rows = terms.rows && s > 0;
    double loss = 0.0;

    auto add_pair = [&](std::size_t i, std::size_t j, double coef, double ux, double uy) {
        if (!grad) return;
        (*grad)[2 * i] += coef * ux;
        (*grad)[2 * i + 1] += coef * uy;
        (*grad)[2 * j] -= coef * ux;
        (*grad)[2 * j + 1] -= coef * uy;
    };

    std::size_t next_edge = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = pos[i].x - pos[j].x;
            const double dy = pos[i].y - pos[j].y;
            const double d = std::hypot(dx, dy);
            double ux = 1.0, uy = 0.0;
            if (d > 0) {
                ux = dx / d;
                uy = dy / d;
            }
            // Edges are sorted lexicographically, matching this loop order.
            bool edge = false;
            if (next_edge < g.edges.size() && g.edges[next_edge] == Edge{static_cast<int>(i), static_cast<int>(j)}) {
                edge = true;
                ++next_edge;
            }
            if (edge) {
                const double h = d - (rb - m);
                if (h > 0) {
                    loss += h * h;
                    add_pair(i, j, 2 * h, ux, uy);
                }
            } else {
                const double h = (rb + m) - d;
                if (h > 0) {
                    loss += h * h;
                    add_pair(i, j, -2 * h, ux, uy);
                }
            }
            const double hmin = c.min_pair_distance - d;
            if (hmin > 0) {
                loss += hmin * hmin;
                add_pair(i, j, -2 * hmin, ux, uy);
            }
            if (rows) {
                const double ady = std::abs(dy);
                if (ady > 0 && ady < s) {
                    // Push the pair onto one row or a full row apart, whichever is nearer.
                    const double sign = dy > 0 ? 1.0 : -1.0;
                    if (ady < s - ady) {
                        loss += ady * ady;
                        add_pair(i, j, 2 * ady * sign, 0.0, 1.0);
                    } else {
                        const double h = s - ady;
                        loss += h * h;
                        add_pair(i, j, -2 * h * sign, 0.0, 1.0);
                    }
                }
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto wall = [&](double v, double hi, std::size_t k) {
            if (v < 0) {
                loss += v * v;
                if (grad) (*grad)[k] += 2 * v;
            } else if (v > hi) {
                loss += (v - hi) * (v - hi);
                if (grad) (*grad)[k] += 2 * (v - hi);
            }
        };
        wall(pos[i].x, c.width, 2 * i);
        wall(pos[i].y, c.height, 2 * i + 1);
        if (rows) {
            const double r = row_offset(pos[i].y, s);
            loss += r * r;
            if (grad) (*grad)[2 * i + 1] += 2 * r;
        }
    }
    if (grad && !terms.move_y)
        for (std::size_t i = 0; i < n; ++i) (*grad)[2 * i + 1] = 0.0;
    return loss;
}

}  // namespace detail

/// Sum of squared hinge penalties; zero iff every unit-disk and register
/// rule holds with the configured margin around the blockade radius.
inline double embedding_loss(const std::vector<Vec2>& positions, const Graph& g, const RegisterConstraints& c) {
    if (positions.size() != static_cast<std::size_t>(g.nodes))
        throw ValidationError("embedding_loss: position count differs from node count");
    return detail::loss_with_gradient(positions, g, c, nullptr);
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Exact check of every register invariant, independent of the optimizer.
/// Comparisons use a fixed 1e-9 um slack only where it cannot hide a UD error.
inline EmbeddingReport verify_ud(const Register& reg, const Graph& g, const RegisterConstraints& c) {
    constexpr double eps = 1e-9;
    if (reg.positions.size() != static_cast<std::size_t>(g.nodes))
        throw ValidationError("verify_ud: position count differs from node count");
    EmbeddingReport rep;
    const auto& p = reg.positions;
    const double rb = reg.r_b > 0 ? reg.r_b : c.blockade_radius;
    const std::size_t n = p.size();

    auto fmt = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };

    for (std::size_t i = 0; i < n; ++i) {
        if (p[i].x < -eps || p[i].x > c.width + eps)
            rep.boundary_violations.push_back("atom " + std::to_string(i) + ": x = " + fmt(p[i].x) +
                                              " outside [0, " + fmt(c.width) + "]");
        if (p[i].y < -eps || p[i].y > c.height + eps)
            rep.boundary_violations.push_back("atom " + std::to_string(i) + ": y = " + fmt(p[i].y) +
                                              " outside [0, " + fmt(c.height) + "]");
        if (c.row_spacing > 0) {
            const double k = std::round(p[i].y / c.row_spacing);
            if (std::abs(p[i].y - k * c.row_spacing) > eps)
                rep.boundary_violations.push_back("atom " + std::to_string(i) + ": y = " + fmt(p[i].y) +
                                                  " not on a row (spacing " + fmt(c.row_spacing) + ")");
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(p[i], p[j]);
            if (d < c.min_pair_distance - eps)
                rep.boundary_violations.push_back("atoms " + std::to_string(i) + "," + std::to_string(j) +
                                                  ": distance " + fmt(d) + " < " + fmt(c.min_pair_distance));
            const bool edge = has_edge(g, static_cast<int>(i), static_cast<int>(j));
            // Strict: an edge needs d < r_b, a non-edge needs d >= r_b.
            if (edge && !(d < rb)) rep.violated_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
            if (!edge && d < rb) rep.spurious_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    rep.feasible = rep.violated_edges.empty() && rep.spurious_edges.empty() && rep.boundary_violations.empty();
    RegisterConstraints cc = c;
    cc.blockade_radius = rb;
    rep.final_loss = detail::loss_with_gradient(p, g, cc, nullptr);
    return rep;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct EmbedOptions {
    int attempts = 20;
    int iterations = 4000;       // per phase
    double learning_rate = 0.4;  // um
};

struct EmbedResult {
    std::optional<Register> reg;  // set iff feasible
    EmbeddingReport report;       // of the returned register, or of the best attempt
    int attempts_used = 0;
};

namespace detail {

/// Adam with coordinate clamping to the rectangle. Stops at zero loss.
inline double descend(std::vector<Vec2>& pos, const Graph& g, const RegisterConstraints& c, LossTerms terms,
                      int iterations, double lr) {
    const std::size_t n = pos.size();
    std::vector<double> grad, m1(2 * n, 0.0), m2(2 * n, 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-12;
    double loss = loss_with_gradient(pos, g, c, &grad, terms);
    double b1t = 1.0, b2t = 1.0;
    for (int it = 0; it < iterations && loss > 0; ++it) {
        b1t *= b1;
        b2t *= b2;
        // Linear decay keeps late iterations fine-grained.
        const double step = lr * (1.0 - 0.9 * static_cast<double>(it) / iterations);
        for (std::size_t k = 0; k < 2 * n; ++k) {
            m1[k] = b1 * m1[k] + (1 - b1) * grad[k];
            m2[k] = b2 * m2[k] + (1 - b2) * grad[k] * grad[k];
            const double mh = m1[k] / (1 - b1t);
            const double vh = m2[k] / (1 - b2t);
            const double delta = step * mh / (std::sqrt(vh) + eps);
            if (k % 2 == 0) {
                pos[k / 2].x = std::clamp(pos[k / 2].x - delta, 0.0, c.width);
            } else if (terms.move_y) {
                pos[k / 2].y = std::clamp(pos[k / 2].y - delta, 0.0, c.height);
            }
        }
        loss = loss_with_gradient(pos, g, c, &grad, terms);
    }
    return loss;
}

inline void snap_to_rows(std::vector<Vec2>& pos, const RegisterConstraints& c) {
    if (c.row_spacing <= 0) return;
    const double top = std::floor(c.height / c.row_spacing + 1e-9) * c.row_spacing;
    for (auto& p : pos) p.y = std::clamp(std::round(p.y / c.row_spacing) * c.row_spacing, 0.0, top);
}

}  // namespace detail

/// Seeded multi-restart embedding. Throws ValidationError for graphs that are
/// rejected upfront (no edges, disconnected, fewer than 2 nodes, over capacity).
inline EmbedResult embed(const Graph& g, const RegisterConstraints& c, std::uint64_t seed,
                         const EmbedOptions& opt = {}) {
    c.validate();
    if (opt.attempts < 1) throw ValidationError("embed: attempts must be >= 1");
    if (g.nodes < 2) throw ValidationError("embed: graph " + std::to_string(g.id) + " has fewer than 2 nodes");
    if (g.edges.empty()) throw ValidationError("embed: graph " + std::to_string(g.id) + " has no edges");
    if (static_cast<std::size_t>(g.nodes) > c.capacity())
        throw ValidationError("embed: graph " + std::to_string(g.id) + " exceeds register capacity " +
                              std::to_string(c.capacity()));
    if (!is_connected(g)) throw ValidationError("embed: graph " + std::to_string(g.id) + " is disconnected");

    const auto n = static_cast<std::size_t>(g.nodes);
    const double side = std::min({c.width, c.height, c.blockade_radius * (1.0 + std::sqrt(static_cast<double>(n)))});
    const double x0 = 0.5 * (c.width - side), y0 = 0.5 * (c.height - side);

    EmbedResult best;
    best.report.final_loss = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    for (int attempt = 1; attempt <= opt.attempts; ++attempt) {
        std::vector<Vec2> pos(n);
        for (auto& p : pos) {
            p.x = x0 + side * uniform01(rng);
            p.y = y0 + side * uniform01(rng);
        }
        // Continuous layout first, then with the row terms switched on.
        detail::descend(pos, g, c, {false, true}, opt.iterations, opt.learning_rate);
        detail::descend(pos, g, c, {true, true}, opt.iterations, opt.learning_rate * 0.5);
        detail::snap_to_rows(pos, c);
        detail::descend(pos, g, c, {true, false}, opt.iterations, opt.learning_rate * 0.5);

        Register reg{g.id, c.blockade_radius, pos};
        auto rep = verify_ud(reg, g, c);
        if (rep.feasible) {
            return EmbedResult{std::move(reg), std::move(rep), attempt};
        }
        if (rep.final_loss < best.report.final_loss) best.report = std::move(rep);
        best.attempts_used = attempt;
    }
    return best;
}

struct EmbeddedGraph {
    Graph graph;
    Register reg;
    int attempts = 0;
};

struct DatasetEmbedding {
    std::vector<EmbeddedGraph> embedded;
    std::vector<GraphId> rejected;
    std::vector<std::pair<GraphId, std::string>> rejection_reasons;
};

/// Embeds every graph with a per-graph seed derived from (seed, graph id).
/// Output order follows the input order regardless of threading.
inline DatasetEmbedding embed_dataset(const GraphSet& gs, const RegisterConstraints& c, std::uint64_t seed,
                                      const EmbedOptions& opt = {}) {
    std::vector<std::optional<EmbeddedGraph>> ok(gs.size());
    std::vector<std::string> why(gs.size());
    parallel_for(gs.size(), [&](std::size_t i) {
        const auto& g = gs.graphs[i];
        try {
            auto r = embed(g, c, derive_seed(seed, "embed", static_cast<std::uint64_t>(g.id)), opt);
            if (r.reg) {
                ok[i] = EmbeddedGraph{g, std::move(*r.reg), r.attempts_used};
            } else {
                why[i] = "no feasible embedding in " + std::to_string(r.attempts_used) + " attempts (best loss " +
                         std::to_string(r.report.final_loss) + ")";
            }
        } catch (const ValidationError& e) {
            why[i] = e.what();
        }
    });
    DatasetEmbedding out;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        if (ok[i]) {
            out.embedded.push_back(std::move(*ok[i]));
        } else {
            out.rejected.push_back(gs.graphs[i].id);
            out.rejection_reasons.emplace_back(gs.graphs[i].id, why[i]);
        }
    }
    return out;
}

}  // namespace qek
