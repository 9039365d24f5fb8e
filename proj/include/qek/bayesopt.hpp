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

// Gaussian-process Bayesian optimization of the waveform durations.
//
// Surrogate: zero-mean GP with an isotropic Matern-5/2 covariance on the raw
// nanosecond inputs. Acquisition: upper confidence bound mean + k * std,
// maximized over the feasible polytope {x_i > 5 ns, sum x_i < 500 ns}.
// Hyperparameters (length scale, signal std) are refit periodically by MAP
// with log-normal priors centred on their initial values.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "qek/common.hpp"
#include "qek/pulses.hpp"

namespace qek {

using Point = std::vector<double>;

struct GpHyperparams {
    double length_scale = 10.0;
    double signal_std = 10.0;
    double prior_mean = 0.0;  // mean of the N(0, 10) mean prior
    double jitter = 1e-8;

    bool operator==(const GpHyperparams&) const = default;
};

inline double euclidean(const Point& a, const Point& b) {
    if (a.size() != b.size()) throw ValidationError("matern52: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// sigma^2 (1 + sqrt5 r/l + 5 r^2/(3 l^2)) exp(-sqrt5 r/l).
inline double matern52(double r, const GpHyperparams& hp) {
    const double z = std::sqrt(5.0) * r / hp.length_scale;
    return hp.signal_std * hp.signal_std * (1.0 + z + z * z / 3.0) * std::exp(-z);
}

inline double matern52(const Point& a, const Point& b, const GpHyperparams& hp) { return matern52(euclidean(a, b), hp); }

/// Observations plus the factorized covariance for the current hyperparameters.
class GpState {
  public:
    GpState() = default;
    explicit GpState(GpHyperparams hp) : hp_(hp) {}

    const GpHyperparams& hyperparams() const { return hp_; }
    const std::vector<Point>& inputs() const { return X_; }
    const std::vector<double>& values() const { return y_; }
    std::size_t size() const { return X_.size(); }
    double jitter_used() const { return jitter_used_; }

    void add(Point x, double y) {
        if (!X_.empty() && x.size() != X_.front().size()) throw ValidationError("GpState: dimension mismatch");
        X_.push_back(std::move(x));
        y_.push_back(y);
        factorize();
    }

    void set_hyperparams(const GpHyperparams& hp) {
        if (!(hp.length_scale > 0 && hp.signal_std > 0)) throw ValidationError("GP hyperparameters must be positive");
        hp_ = hp;
        factorize();
    }

    /// Posterior mean and variance at x. Variance is clamped at zero.
    std::pair<double, double> posterior(const Point& x) const {
        if (X_.empty()) throw ValidationError("gp_posterior: no observations");
        const auto n = static_cast<Eigen::Index>(X_.size());
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k[i] = matern52(X_[static_cast<std::size_t>(i)], x, hp_);
        const double mean = hp_.prior_mean + k.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var = matern52(0.0, hp_) - v.squaredNorm();
        return {mean, std::max(0.0, var)};
    }

    /// log p(y | X, hyperparameters).
    double log_marginal_likelihood() const {
        if (X_.empty()) return 0;
        const auto n = static_cast<double>(X_.size());
        double logdet = 0;
        const Eigen::MatrixXd L = llt_.matrixL();
        for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
        return -0.5 * resid_.dot(alpha_) - logdet - 0.5 * n * std::log(2 * std::numbers::pi);
    }

  private:
    void factorize() {
        const auto n = static_cast<Eigen::Index>(X_.size());
        if (n == 0) return;
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                K(i, j) = K(j, i) = matern52(X_[static_cast<std::size_t>(i)], X_[static_cast<std::size_t>(j)], hp_);
        double jitter = hp_.jitter;
        for (int attempt = 0; attempt < 10; ++attempt, jitter *= 10) {
            Eigen::MatrixXd Kj = K;
            Kj.diagonal().array() += jitter;
            llt_.compute(Kj);
            if (llt_.info() == Eigen::Success) {
                jitter_used_ = jitter;
                resid_ = Eigen::Map<const Eigen::VectorXd>(y_.data(), n).array() - hp_.prior_mean;
                alpha_ = llt_.solve(resid_);
                return;
            }
        }
        throw NumericalError("GP covariance is not positive definite after jitter escalation");
    }

    GpHyperparams hp_{};
    std::vector<Point> X_;
    std::vector<double> y_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd resid_, alpha_;
    double jitter_used_ = 0;
};

inline std::pair<double, double> gp_posterior(const GpState& s, const Point& x) { return s.posterior(x); }

/// mean + k * std.
inline double ucb(const GpState& s, const Point& x, double k) {
    if (!(k >= 0)) throw ValidationError("ucb: k must be >= 0");
    const auto [m, v] = s.posterior(x);
    return m + k * std::sqrt(v);
}

// ---------------------------------------------------------------------------
// MAP refit
// ---------------------------------------------------------------------------

struct MapPrior {
    double log_length_center = std::log(10.0);
    double log_signal_center = std::log(10.0);
    double log_scale = 1.0;
};

/// Log marginal likelihood plus Gaussian log-densities on (log l, log sigma).
inline double penalized_log_likelihood(const GpState& s, const MapPrior& prior = {}) {
    const auto& hp = s.hyperparams();
    const double zl = (std::log(hp.length_scale) - prior.log_length_center) / prior.log_scale;
    const double zs = (std::log(hp.signal_std) - prior.log_signal_center) / prior.log_scale;
    return s.log_marginal_likelihood() - 0.5 * (zl * zl + zs * zs);
}

namespace detail {

/// Nelder-Mead maximization in 2-d.
inline std::pair<std::array<double, 2>, double> nelder_mead_max(const std::function<double(const std::array<double, 2>&)>& f,
                                                                std::array<double, 2> start, double step, int iters) {
    using P = std::array<double, 2>;
    std::array<P, 3> v{start, P{start[0] + step, start[1]}, P{start[0], start[1] + step}};
    std::array<double, 3> fv{};
    for (int i = 0; i < 3; ++i) fv[i] = f(v[i]);
    auto lerp = [](const P& a, const P& b, double t) { return P{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])}; };
    for (int it = 0; it < iters; ++it) {
        std::array<int, 3> o{0, 1, 2};
        std::sort(o.begin(), o.end(), [&](int a, int b) { return fv[a] > fv[b]; });
        const P best = v[o[0]], mid = v[o[1]], worst = v[o[2]];
        if (std::abs(fv[o[0]] - fv[o[2]]) < 1e-10 && std::hypot(best[0] - worst[0], best[1] - worst[1]) < 1e-8) break;
        const P c{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
        const P r = lerp(c, worst, -1.0);
        const double fr = f(r);
        if (fr > fv[o[0]]) {
            const P e = lerp(c, worst, -2.0);
            const double fe = f(e);
            if (fe > fr) { v[o[2]] = e; fv[o[2]] = fe; }
            else { v[o[2]] = r; fv[o[2]] = fr; }
        } else if (fr > fv[o[1]]) {
            v[o[2]] = r;
            fv[o[2]] = fr;
        } else {
            const P cc = lerp(c, worst, 0.5);
            const double fc = f(cc);
            if (fc > fv[o[2]]) {
                v[o[2]] = cc;
                fv[o[2]] = fc;
            } else {
                for (int k : {o[1], o[2]}) {
                    v[k] = lerp(best, v[k], 0.5);
                    fv[k] = f(v[k]);
                }
            }
        }
    }
    int b = 0;
    for (int i = 1; i < 3; ++i)
        if (fv[i] > fv[b]) b = i;
    return {v[b], fv[b]};
}

}  // namespace detail

/// MAP estimate of (length scale, signal std) by multi-start Nelder-Mead in
/// log space. Returns the incumbent hyperparameters when no start improves on them.
inline GpHyperparams map_refit(const GpState& s, std::uint64_t seed, const MapPrior& prior = {}, int starts = 8) {
    if (s.size() < 3) throw ValidationError("map_refit: needs at least 3 observations");
    const GpHyperparams base = s.hyperparams();
    GpState work = s;
    auto objective = [&](const std::array<double, 2>& p) {
        if (std::abs(p[0]) > 30 || std::abs(p[1]) > 30) return -std::numeric_limits<double>::infinity();
        GpHyperparams hp = base;
        hp.length_scale = std::exp(p[0]);
        hp.signal_std = std::exp(p[1]);
        try {
            work.set_hyperparams(hp);
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
        const double v = penalized_log_likelihood(work, prior);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };
    const std::array<double, 2> incumbent{std::log(base.length_scale), std::log(base.signal_std)};
    double best_val = objective(incumbent);
    std::array<double, 2> best = incumbent;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < starts; ++k) {
        std::array<double, 2> start = incumbent;
        if (k == 1) start = {prior.log_length_center, prior.log_signal_center};
        if (k >= 2)
            start = {prior.log_length_center + prior.log_scale * 1.5 * standard_normal(rng),
                     prior.log_signal_center + prior.log_scale * 1.5 * standard_normal(rng)};
        const auto [p, v] = detail::nelder_mead_max(objective, start, 0.5, 300);
        if (v > best_val) {
            best_val = v;
            best = p;
        }
    }
    GpHyperparams out = base;
    out.length_scale = std::exp(best[0]);
    out.signal_std = std::exp(best[1]);
    return out;
}

// ---------------------------------------------------------------------------
// Constrained acquisition
// ---------------------------------------------------------------------------

/// Polytope {x_i >= lower, sum x_i <= total}, with lower/total pulled inside
/// the strict hardware limits by `slack`.
struct Polytope {
    std::size_t dim = 5;
    double lower = 5.0;
    double total = 500.0;
    double slack = 1e-3;

    double lo() const { return lower + slack; }
    double hi_sum() const { return total - slack; }

    bool contains(const Point& x) const {
        double s = 0;
        for (double v : x) {
            if (!(v > lower)) return false;
            s += v;
        }
        return s < total;
    }

    template <class Engine>
    Point sample(Engine& rng) const {
        // Uniform on the simplex via normalized exponentials (one slack coordinate).
        std::vector<double> e(dim + 1);
        double sum = 0;
        for (auto& v : e) {
            double u = uniform01(rng);
            while (u <= 0) u = uniform01(rng);
            v = -std::log(u);
            sum += v;
        }
        const double room = hi_sum() - lo() * static_cast<double>(dim);
        Point x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = lo() + room * e[i] / sum;
        return x;
    }

    /// Euclidean projection onto the closed polytope with bounds lo() and hi_sum().
    Point project(Point x) const {
        for (auto& v : x) v = std::max(v, lo());
        double s = 0;
        for (double v : x) s += v;
        if (s <= hi_sum()) return x;
        // Project y = x - lo onto the simplex {y >= 0, sum y = room}.
        const double room = hi_sum() - lo() * static_cast<double>(dim);
        std::vector<double> y(dim), u(dim);
        for (std::size_t i = 0; i < dim; ++i) y[i] = x[i] - lo();
        u = y;
        std::sort(u.begin(), u.end(), std::greater<>());
        double cum = 0, theta = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            cum += u[i];
            const double t = (cum - room) / static_cast<double>(i + 1);
            if (u[i] - t > 0) theta = t;
        }
        for (std::size_t i = 0; i < dim; ++i) x[i] = lo() + std::max(0.0, y[i] - theta);
        // Guard against round-off pushing the sum over the bound.
        double s2 = 0;
        for (double v : x) s2 += v;
        if (s2 > hi_sum()) {
            const double scale = room / (s2 - lo() * static_cast<double>(dim));
            for (auto& v : x) v = lo() + (v - lo()) * scale * (1 - 1e-12);
        }
        return x;
    }
};

struct BoConfig {
    int max_iterations = 50;
    int initial_points = 5;   // seeded random evaluations before the surrogate is used
    double ucb_k = 2.0;
    int refit_period = 10;
    Polytope bounds{};
    GpHyperparams gp{};
    MapPrior prior{};
    std::uint64_t seed = 0;
    int acquisition_samples = 4000;
    int acquisition_refine = 6;

    void validate() const {
        if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
        if (refit_period < 1) throw ValidationError("refit_period must be >= 1");
        if (!(ucb_k >= 0)) throw ValidationError("ucb_k must be >= 0");
        if (initial_points < 0) throw ValidationError("initial_points must be >= 0");
    }
};

/// Maximizes UCB over the polytope: seeded random candidates plus
/// perturbations of the best observations, then projected pattern search
/// from the top candidates. With no observations returns a random feasible point.
inline Point propose_next(const GpState& s, const BoConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& poly = cfg.bounds;
    if (s.size() == 0) return poly.sample(rng);

    auto acq = [&](const Point& x) { return ucb(s, x, cfg.ucb_k); };
    std::vector<std::pair<double, Point>> cands;
    cands.reserve(static_cast<std::size_t>(cfg.acquisition_samples) + s.size() * 8);
    for (int i = 0; i < cfg.acquisition_samples; ++i) {
        auto x = poly.sample(rng);
        const double a = acq(x);
        cands.emplace_back(a, std::move(x));
    }
    const double scale = s.hyperparams().length_scale;
    for (std::size_t o = 0; o < s.size(); ++o)
        for (int r = 0; r < 8; ++r) {
            Point x = s.inputs()[o];
            for (auto& v : x) v += scale * standard_normal(rng);
            x = poly.project(std::move(x));
            const double a = acq(x);
            cands.emplace_back(a, std::move(x));
        }
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(cfg.acquisition_refine), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(top), cands.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });

    Point best = cands.front().second;
    double best_val = cands.front().first;
    for (std::size_t c = 0; c < top; ++c) {
        Point x = cands[c].second;
        double fx = cands[c].first;
        double step = std::max(1.0, 0.5 * scale);
        while (step > 1e-3) {
            bool improved = false;
            for (std::size_t d = 0; d < x.size(); ++d)
                for (double sign : {1.0, -1.0}) {
                    Point y = x;
                    y[d] += sign * step;
                    y = poly.project(std::move(y));
                    const double fy = acq(y);
                    if (fy > fx) {
                        x = std::move(y);
                        fx = fy;
                        improved = true;
                    }
                }
            if (!improved) step *= 0.5;
        }
        if (fx > best_val) {
            best_val = fx;
            best = x;
        }
    }
    return best;
}

struct TraceEntry {
    int iteration = 0;  // 1-based
    Point x;
    std::optional<double> value;  // empty when the objective failed
    double incumbent = -std::numeric_limits<double>::infinity();
    std::string error;
    bool cached = false;
};

struct BoResult {
    Point best_x;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<TraceEntry> trace;
    GpHyperparams final_hyperparams;
};

/// Propose, evaluate, update; MAP refit every refit_period iterations.
/// Objective exceptions are recorded in the trace and the iteration is skipped.
inline BoResult optimize(const std::function<double(const Point&)>& objective, const BoConfig& cfg) {
    cfg.validate();
    GpState gp(cfg.gp);
    BoResult res;
    std::map<std::vector<std::uint64_t>, double> cache;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto seed = derive_seed(cfg.seed, "bo-propose", static_cast<std::uint64_t>(it));
        Point x;
        if (it <= cfg.initial_points || gp.size() == 0) {
            std::mt19937_64 rng(seed);
            x = cfg.bounds.sample(rng);
        } else {
            x = propose_next(gp, cfg, seed);
        }
        TraceEntry e;
        e.iteration = it;
        e.x = x;
        std::vector<std::uint64_t> key;
        for (double v : x) key.push_back(std::bit_cast<std::uint64_t>(v));
        try {
            double fx;
            if (auto hit = cache.find(key); hit != cache.end()) {
                fx = hit->second;
                e.cached = true;
            } else {
                fx = objective(x);
                if (!std::isfinite(fx)) throw NumericalError("objective returned a non-finite value");
                cache.emplace(key, fx);
            }
            e.value = fx;
            if (!e.cached) gp.add(x, fx);
            if (fx > res.best_value) {
                res.best_value = fx;
                res.best_x = x;
            }
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        e.incumbent = res.best_value;
        res.trace.push_back(std::move(e));
        if (it % cfg.refit_period == 0 && gp.size() >= 3)
            gp.set_hyperparams(map_refit(gp, derive_seed(cfg.seed, "bo-refit", static_cast<std::uint64_t>(it)), cfg.prior));
    }
    res.final_hyperparams = gp.hyperparams();
    return res;
}

/// Optimization over waveform parameters.
inline WaveformParams to_waveform(const Point& x) {
    if (x.size() != 5) throw ValidationError("waveform point must have 5 coordinates");
    return WaveformParams{x[0], x[1], x[2], x[3], x[4]};
}

inline Point to_point(const WaveformParams& w) {
    const auto a = w.as_array();
    return Point(a.begin(), a.end());
}

}  // namespace qek
