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

// Binary soft-margin SVM on a precomputed kernel, stratified K-fold
// cross-validation and grid search over (C, class weights).
//
// Labels are the graph classes {1, 2}; class 1 is the positive class
// (y = +1) for training and for every metric.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qek/common.hpp"

namespace qek {

struct SvmHyperparams {
    double C = 1.0;
    double w1 = 1.0;  // weight of class 1
    double w2 = 1.0;  // weight of class 2

    void validate() const {
        if (!(C > 0 && w1 > 0 && w2 > 0)) throw ValidationError("SVM hyperparameters must be positive");
    }
    bool operator==(const SvmHyperparams&) const = default;
};

struct SvmOptions {
    double tolerance = 1e-4;  // KKT violation gap
    std::size_t max_iterations = 10'000'000;
    double indefinite_threshold = -1e-6;
};

struct SvmModel {
    std::vector<double> coef;     // alpha_i * y_i for every training point
    double bias = 0;              // decision = sum coef_i K(x, x_i) + bias
    std::vector<std::size_t> support;
    double dual_objective = 0;    // sum alpha - 1/2 alpha^T Q alpha
    double diagonal_shift = 0;    // added to the Gram diagonal when it was indefinite
    std::size_t iterations = 0;
};

/// Dense symmetric matrix view used by the solver (row-major).
struct Gram {
    std::size_t n = 0;
    std::vector<double> v;
    double operator()(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

inline double label_sign(int label) { return label == 1 ? 1.0 : -1.0; }

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const std::vector<double>& a, std::size_t n) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i * n + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Shift applied to the diagonal of an indefinite Gram matrix, zero otherwise.
inline double indefinite_shift(const std::vector<double>& k, std::size_t n, double threshold = -1e-6) {
    if (n == 0) return 0;
    const double lmin = min_eigenvalue(k, n);
    return lmin < threshold ? -lmin : 0.0;
}

/// Dual objective sum(alpha) - 1/2 alpha^T Q alpha with Q_ij = y_i y_j K_ij.
inline double svm_dual_objective(const std::vector<double>& alpha, const std::vector<double>& y, const Gram& K) {
    double lin = 0, quad = 0;
    for (std::size_t i = 0; i < K.n; ++i) {
        lin += alpha[i];
        for (std::size_t j = 0; j < K.n; ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * K(i, j);
    }
    return lin - 0.5 * quad;
}

namespace detail {

/// SMO with second-order working-set selection (Fan, Chen and Lin 2005).
/// Minimizes 1/2 a^T Q a - e^T a s.t. y^T a = 0, 0 <= a_i <= ub_i.
inline SvmModel smo_solve(const Gram& K, const std::vector<double>& y, const std::vector<double>& ub,
                          const SvmOptions& opt) {
    const std::size_t n = K.n;
    constexpr double tau = 1e-12;
    std::vector<double> a(n, 0.0), G(n, -1.0);
    auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K(i, j); };
    auto is_up = [&](std::size_t t) { return (y[t] > 0 && a[t] < ub[t]) || (y[t] < 0 && a[t] > 0); };
    auto is_low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < ub[t]); };

    std::size_t iter = 0;
    for (; iter < opt.max_iterations; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (is_up(t) && -y[t] * G[t] >= gmax) {
                if (-y[t] * G[t] > gmax || i == n) i = t;
                gmax = -y[t] * G[t];
            }
        if (i == n) break;
        std::size_t j = n;
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (!is_low(t)) continue;
            gmax2 = std::max(gmax2, y[t] * G[t]);
            const double b = gmax + y[t] * G[t];
            if (b > 0) {
                double aa = K(i, i) + K(t, t) - 2.0 * K(i, t);
                if (aa <= 0) aa = tau;
                const double val = -(b * b) / aa;
                if (val < obj_min) {
                    obj_min = val;
                    j = t;
                }
            }
        }
        if (gmax + gmax2 < opt.tolerance || j == n) break;

        // Two-variable analytic update (libsvm Solver::Solve).
        const double Ci = ub[i], Cj = ub[j];
        const double old_ai = a[i], old_aj = a[j];
        if (y[i] != y[j]) {
            double quad = K(i, i) + K(j, j) + 2.0 * Q(i, j);
            if (quad <= 0) quad = tau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) { a[j] = 0; a[i] = diff; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
            }
            if (diff > Ci - Cj) {
                if (a[i] > Ci) { a[i] = Ci; a[j] = Ci - diff; }
            } else {
                if (a[j] > Cj) { a[j] = Cj; a[i] = Cj + diff; }
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * Q(i, j);
            if (quad <= 0) quad = tau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > Ci) {
                if (a[i] > Ci) { a[i] = Ci; a[j] = sum - Ci; }
            } else {
                if (a[j] < 0) { a[j] = 0; a[i] = sum; }
            }
            if (sum > Cj) {
                if (a[j] > Cj) { a[j] = Cj; a[i] = sum - Cj; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = sum; }
            }
        }
        const double dai = a[i] - old_ai, daj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) G[t] += Q(t, i) * dai + Q(t, j) * daj;
    }
    if (iter >= opt.max_iterations) throw NumericalError("SMO did not converge within the iteration budget");

    // Bias (libsvm calculate_rho).
    double ubound = std::numeric_limits<double>::infinity(), lbound = -ubound, sum_free = 0;
    std::size_t nr_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yG = y[t] * G[t];
        if (a[t] >= ub[t]) {
            if (y[t] < 0) ubound = std::min(ubound, yG);
            else lbound = std::max(lbound, yG);
        } else if (a[t] <= 0) {
            if (y[t] > 0) ubound = std::min(ubound, yG);
            else lbound = std::max(lbound, yG);
        } else {
            ++nr_free;
            sum_free += yG;
        }
    }
    const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : 0.5 * (ubound + lbound);

    SvmModel m;
    m.coef.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        m.coef[t] = a[t] * y[t];
        if (a[t] > 0) m.support.push_back(t);
    }
    m.bias = -rho;
    m.dual_objective = svm_dual_objective(a, y, K);
    m.iterations = iter;
    return m;
}

}  // namespace detail

/// Trains on a symmetric n*n kernel (row-major) with labels in {1, 2}.
inline SvmModel train_svm(const std::vector<double>& kernel, const std::vector<int>& labels, const SvmHyperparams& hp,
                          const SvmOptions& opt = {}) {
    hp.validate();
    const std::size_t n = labels.size();
    if (kernel.size() != n * n) throw ValidationError("train_svm: kernel size does not match label count");
    bool has1 = false, has2 = false;
    for (int l : labels) {
        if (l == 1) has1 = true;
        else if (l == 2) has2 = true;
        else throw ValidationError("train_svm: labels must be 1 or 2");
    }
    if (!has1 || !has2) throw ValidationError("train_svm: training set contains a single class");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(kernel[i * n + j] - kernel[j * n + i]) > 1e-12 * std::max(1.0, std::abs(kernel[i * n + j])))
                throw ValidationError("train_svm: kernel is not symmetric");

    Gram K{n, kernel};
    const double shift = indefinite_shift(kernel, n, opt.indefinite_threshold);
    if (shift > 0)
        for (std::size_t i = 0; i < n; ++i) K.v[i * n + i] += shift;
    std::vector<double> y(n), ub(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = label_sign(labels[i]);
        ub[i] = hp.C * (labels[i] == 1 ? hp.w1 : hp.w2);
    }
    auto m = detail::smo_solve(K, y, ub, opt);
    m.diagonal_shift = shift;
    return m;
}

inline double decision_value(const SvmModel& m, const std::vector<double>& kernel_row) {
    if (kernel_row.size() != m.coef.size())
        throw ValidationError("predict: kernel row has " + std::to_string(kernel_row.size()) + " entries, expected " +
                              std::to_string(m.coef.size()));
    double s = m.bias;
    for (std::size_t i : m.support) s += m.coef[i] * kernel_row[i];
    return s;
}

/// Class label per row; a decision value of exactly 0 maps to class 1.
inline std::vector<int> predict(const SvmModel& m, const std::vector<std::vector<double>>& kernel_rows) {
    std::vector<int> out;
    out.reserve(kernel_rows.size());
    for (const auto& row : kernel_rows) out.push_back(decision_value(m, row) >= 0 ? 1 : 2);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
    double f1 = 0, accuracy = 0, precision = 0, recall = 0;
};

/// Binary metrics with class 1 positive. Undefined ratios evaluate to 0.
inline Metrics evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw ValidationError("evaluate: length mismatch");
    if (y_true.empty()) throw ValidationError("evaluate: empty input");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] == 1, p = y_pred[i] == 1;
        if (t && p) ++tp;
        else if (!t && p) ++fp;
        else if (t && !p) ++fn;
        else ++tn;
    }
    Metrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(y_true.size());
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

inline Metrics mean_metrics(const std::vector<Metrics>& ms) {
    Metrics out;
    if (ms.empty()) return out;
    for (const auto& m : ms) {
        out.f1 += m.f1;
        out.accuracy += m.accuracy;
        out.precision += m.precision;
        out.recall += m.recall;
    }
    const auto k = static_cast<double>(ms.size());
    out.f1 /= k;
    out.accuracy /= k;
    out.precision /= k;
    out.recall /= k;
    return out;
}

/// Metrics of always predicting the most frequent class (ties pick class 2).
inline Metrics majority_baseline(const std::vector<int>& labels) {
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const int majority = ones > labels.size() - ones ? 1 : 2;
    return evaluate(labels, std::vector<int>(labels.size(), majority));
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Fold index per sample. Each class is shuffled and dealt round-robin, the
/// deal continuing across classes, so fold sizes differ by at most one and
/// per-class counts per fold differ by at most one.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("cross-validation needs k >= 2");
    if (labels.size() < static_cast<std::size_t>(k))
        throw ValidationError("cross-validation: fewer samples than folds");
    std::mt19937_64 rng(seed);
    std::vector<int> fold(labels.size(), -1);
    std::size_t next = 0;
    for (int cls : {1, 2}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        shuffle(idx, rng);
        for (auto i : idx) fold[i] = static_cast<int>(next++ % static_cast<std::size_t>(k));
    }
    return fold;
}

struct Grid {
    std::vector<double> C;
    std::vector<double> minority_weight;  // applied to class 1; class 2 keeps weight 1

    std::size_t size() const { return C.size() * minority_weight.size(); }
    SvmHyperparams at(std::size_t idx) const {
        return {C[idx / minority_weight.size()], minority_weight[idx % minority_weight.size()], 1.0};
    }
};

inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
    std::vector<double> v(count);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = count == 1 ? lo : std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    return v;
}

/// 100 values of C in [1e-4, 1e4] and 30 class-1 weights in [1, 1000], both log-spaced.
inline Grid default_grid() { return Grid{logspace(1e-4, 1e4, 100), logspace(1.0, 1000.0, 30)}; }

struct CvResult {
    SvmHyperparams best;
    std::vector<Metrics> folds;  // of the best grid point
    Metrics mean;
    std::vector<int> fold_of;    // fold index per sample
    std::vector<Metrics> grid_means;  // mean metrics per grid point, in grid order
};

struct FoldData {
    std::vector<std::size_t> train, test;
    std::vector<int> train_labels, test_labels;
    std::vector<double> gram;                  // train x train, shifted if indefinite
    std::vector<std::vector<double>> rows;     // test x train
    bool single_class = false;
};

inline std::vector<FoldData> make_folds(const std::vector<double>& K, const std::vector<int>& labels,
                                        const std::vector<int>& fold_of, int k, const SvmOptions& opt) {
    const std::size_t n = labels.size();
    std::vector<FoldData> folds(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        auto& fd = folds[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? fd.test : fd.train).push_back(i);
        for (auto i : fd.train) fd.train_labels.push_back(labels[i]);
        for (auto i : fd.test) fd.test_labels.push_back(labels[i]);
        const std::size_t m = fd.train.size();
        fd.gram.resize(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) fd.gram[a * m + b] = K[fd.train[a] * n + fd.train[b]];
        const double shift = indefinite_shift(fd.gram, m, opt.indefinite_threshold);
        if (shift > 0)
            for (std::size_t a = 0; a < m; ++a) fd.gram[a * m + a] += shift;
        for (auto t : fd.test) {
            std::vector<double> row(m);
            for (std::size_t b = 0; b < m; ++b) row[b] = K[t * n + fd.train[b]];
            fd.rows.push_back(std::move(row));
        }
        fd.single_class = std::all_of(fd.train_labels.begin(), fd.train_labels.end(),
                                      [&](int l) { return l == fd.train_labels.front(); });
    }
    return folds;
}

/// Held-out metrics of one hyperparameter point on one fold. A training split
/// holding a single class predicts that class.
inline Metrics fold_metrics(const FoldData& fd, const SvmHyperparams& hp, const SvmOptions& opt) {
    if (fd.test.empty()) return {};
    std::vector<int> pred;
    if (fd.single_class) {
        pred.assign(fd.test.size(), fd.train_labels.front());
    } else {
        SvmOptions inner = opt;
        inner.indefinite_threshold = -std::numeric_limits<double>::infinity();  // already shifted
        pred = predict(train_svm(fd.gram, fd.train_labels, hp, inner), fd.rows);
    }
    return evaluate(fd.test_labels, pred);
}

/// Grid search under stratified k-fold CV. Best = highest mean F1; ties go to
/// the lower C, then the lower class-1 weight.
inline CvResult kfold_grid_search(const std::vector<double>& K, const std::vector<int>& labels, const Grid& grid,
                                  int k, std::uint64_t seed, const SvmOptions& opt = {}) {
    const std::size_t n = labels.size();
    if (K.size() != n * n) throw ValidationError("kfold_grid_search: kernel size does not match label count");
    if (grid.size() == 0) throw ValidationError("kfold_grid_search: empty grid");
    CvResult res;
    res.fold_of = stratified_folds(labels, k, seed);
    const auto folds = make_folds(K, labels, res.fold_of, k, opt);

    std::vector<std::vector<Metrics>> per_point(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
        const auto hp = grid.at(g);
        auto& out = per_point[g];
        out.reserve(folds.size());
        for (const auto& fd : folds) out.push_back(fold_metrics(fd, hp, opt));
    });

    std::size_t best = 0;
    res.grid_means.reserve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) res.grid_means.push_back(mean_metrics(per_point[g]));
    auto better = [&](std::size_t a, std::size_t b) {
        if (res.grid_means[a].f1 != res.grid_means[b].f1) return res.grid_means[a].f1 > res.grid_means[b].f1;
        const auto ha = grid.at(a), hb = grid.at(b);
        if (ha.C != hb.C) return ha.C < hb.C;
        return ha.w1 / ha.w2 < hb.w1 / hb.w2;
    };
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (better(g, best)) best = g;
    res.best = grid.at(best);
    res.folds = per_point[best];
    res.mean = res.grid_means[best];
    return res;
}

inline CvResult kfold_grid_search(const std::vector<double>& K, const std::vector<int>& labels, int k,
                                  std::uint64_t seed) {
    return kfold_grid_search(K, labels, default_grid(), k, seed);
}

}  // namespace qek
