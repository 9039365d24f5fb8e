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

// End-to-end orchestration: configuration, staged runs with persisted
// artifacts, shot-count subsampling and kernel comparison.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qek/bayesopt.hpp"
#include "qek/embedder.hpp"
#include "qek/emulator.hpp"
#include "qek/features.hpp"
#include "qek/graph.hpp"
#include "qek/io.hpp"
#include "qek/learn.hpp"
#include "qek/pulses.hpp"

namespace qek {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "QEK_OUTPUT_ROOT";

/// A failure inside one pipeline stage.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

/// Relative paths resolve under $QEK_OUTPUT_ROOT when it is set.
inline fs::path resolve_output(const fs::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
    return p;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Name of the TU dataset in `dir`, taken from its single `<name>_A.txt`.
inline std::string dataset_name_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("dataset directory does not exist: " + dir.string());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto f = e.path().filename().string();
        if (f.size() > 6 && f.ends_with("_A.txt")) names.push_back(f.substr(0, f.size() - 6));
    }
    if (names.size() != 1)
        throw ValidationError("expected exactly one <name>_A.txt in " + dir.string() + ", found " +
                              std::to_string(names.size()));
    return names.front();
}

inline GraphSet load_dataset(const fs::path& dir, std::string name = {}) {
    if (name.empty()) name = dataset_name_in(dir);
    return parse_tu_dataset(dir, name);
}

/// Seed of one pipeline stage, derived from the master seed.
inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
    return derive_seed(master, "stage", fnv1a(stage));
}

struct SynthOptions {
    std::size_t per_class = 20;
    int min_nodes = 6;
    int max_nodes = 10;
    double gap = 0.3;  // um kept clear on both sides of the blockade radius
    int max_candidates = 2000;
};

namespace detail {

/// Unit-disk graph of `pts`, or nothing if a pair sits within `gap` of r_b
/// or the graph is disconnected.
inline std::optional<Graph> ud_graph(GraphId id, const std::vector<Vec2>& pts, double rb, double gap, int label) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d = distance(pts[i], pts[j]);
            if (std::abs(d - rb) < gap) return std::nullopt;
            if (d < rb) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    auto g = make_graph(id, static_cast<int>(pts.size()), std::move(edges), label);
    if (!is_connected(g)) return std::nullopt;
    return g;
}

/// Compact blob: n sites of a 4 x 3 lattice (5 um columns, one row pitch
/// apart), each shifted by up to 0.5 um along x.
template <class Rng>
std::vector<Vec2> cluster_points(Rng& rng, int n, const RegisterConstraints& c) {
    std::vector<Vec2> sites;
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 4; ++k) sites.push_back({5.0 * k, c.row_spacing * r});
    shuffle(sites, rng);
    sites.resize(static_cast<std::size_t>(std::min<int>(n, static_cast<int>(sites.size()))));
    for (auto& p : sites) p.x += uniform01(rng) - 0.5;
    return sites;
}

/// Forward walk: each atom steps 5.5 to 7.5 um ahead, staying on a row.
template <class Rng>
std::vector<Vec2> chain_points(Rng& rng, int n, const RegisterConstraints& c) {
    std::vector<Vec2> pts{{0.0, 2 * c.row_spacing}};
    while (static_cast<int>(pts.size()) < n) {
        const double step = 5.5 + 2.0 * uniform01(rng);
        const double dy = c.row_spacing * (static_cast<double>(uniform_index(rng, 3)) - 1.0);
        const double dx = std::sqrt(std::max(step * step - dy * dy, 1.0));
        const auto& last = pts.back();
        double y = last.y + dy;
        if (y < 0 || y > 4 * c.row_spacing) y = last.y;
        pts.push_back({last.x + dx, y});
    }
    return pts;
}

}  // namespace detail

/// Two topology classes of unit-disk graphs: dense clusters (label 1) and
/// chain-like walks (label 2). Every returned graph embeds under the embed
/// stage stream of a pipeline run with the same master seed.
inline GraphSet synthetic_corpus(std::uint64_t seed, const SynthOptions& opt = {}, const RegisterConstraints& c = {}) {
    c.validate();
    if (opt.min_nodes < 2 || opt.max_nodes < opt.min_nodes) throw ValidationError("synthetic: bad node range");
    GraphSet gs;
    gs.name = "SYNTH";
    GraphId next_id = 1;
    for (int label : {1, 2}) {
        std::mt19937_64 rng(derive_seed(seed, "synth", static_cast<std::uint64_t>(label)));
        std::size_t kept = 0;
        for (int cand = 0; cand < opt.max_candidates && kept < opt.per_class; ++cand) {
            const int n = opt.min_nodes +
                          static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(opt.max_nodes - opt.min_nodes + 1)));
            const auto pts = label == 1 ? detail::cluster_points(rng, n, c) : detail::chain_points(rng, n, c);
            if (static_cast<int>(pts.size()) != n) continue;
            auto g = detail::ud_graph(next_id, pts, c.blockade_radius, opt.gap, label);
            if (!g) continue;
            if (!embed(*g, c, derive_seed(stage_seed(seed, "embed"), "embed", static_cast<std::uint64_t>(g->id))).reg)
                continue;
            gs.graphs.push_back(std::move(*g));
            ++next_id;
            ++kept;
        }
        if (kept < opt.per_class)
            throw ValidationError("synthetic: only " + std::to_string(kept) + " graphs of class " +
                                  std::to_string(label) + " embedded");
    }
    return gs;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
    fs::path dataset;
    std::string dataset_name;  // empty: detected from the directory
    int max_nodes = 10;
    RegisterConstraints constraints;
    EmbedOptions embed;
    std::optional<WaveformParams> lambda = WaveformParams{85, 21, 50, 25, 20};  // empty: optimize
    double omega = kDefaultOmegaMax;
    HardwareLimits limits;
    PhysicsConfig physics;
    NoiseModel noise;
    std::size_t n_shots = 1000;
    double mu = 1.0;
    int folds = 10;
    Grid grid = default_grid();
    BoConfig bo;
    std::uint64_t seed = 0;
    fs::path output = "run";

    void validate() const {
        if (!fs::is_directory(dataset)) throw ValidationError("dataset directory does not exist: " + dataset.string());
        if (max_nodes < 1) throw ValidationError("max_nodes must be >= 1");
        constraints.validate();
        physics.validate();
        noise.validate();
        if (!(omega > 0 && omega <= limits.omega_max)) throw ValidationError("omega must lie in (0, omega_max]");
        if (lambda) {
            const auto bad = waveform_violations(*lambda, limits);
            if (!bad.empty()) throw ValidationError("lambda: " + bad.front());
        }
        if (n_shots < 1) throw ValidationError("n_shots must be >= 1");
        if (!(mu > 0)) throw ValidationError("mu must be positive");
        if (folds < 2) throw ValidationError("folds must be >= 2");
        if (grid.size() == 0) throw ValidationError("empty hyperparameter grid");
        bo.validate();
    }
};

namespace detail {

template <class T>
void read_opt(const io::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const io::json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const io::json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* n : known) ok = ok || k == n;
        if (!ok) throw ValidationError("config: unknown key '" + k + "' in " + where);
    }
}

}  // namespace detail

/// Reads the JSON config grammar documented in the README. Relative dataset
/// paths resolve against `base`.
inline PipelineConfig config_from_json(const io::json& j, const fs::path& base = {}) {
    using detail::read_opt;
    detail::reject_unknown(j, {"dataset", "dataset_name", "max_nodes", "constraints", "embed", "lambda", "omega",
                               "physics", "noise", "n_shots", "mu", "cv", "bo", "seed", "output"},
                           "config");
    PipelineConfig c;
    if (!j.contains("dataset")) throw ValidationError("config: 'dataset' is required");
    c.dataset = j.at("dataset").get<std::string>();
    if (c.dataset.is_relative() && !base.empty()) c.dataset = base / c.dataset;
    read_opt(j, "dataset_name", c.dataset_name);
    read_opt(j, "max_nodes", c.max_nodes);
    read_opt(j, "omega", c.omega);
    read_opt(j, "n_shots", c.n_shots);
    read_opt(j, "mu", c.mu);
    read_opt(j, "seed", c.seed);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("physics")) {
        const auto& p = j.at("physics");
        detail::reject_unknown(p, {"c6_over_hbar", "rel_tolerance", "abs_tolerance", "max_step_us", "max_atoms"},
                               "physics");
        read_opt(p, "c6_over_hbar", c.physics.c6_over_hbar);
        read_opt(p, "rel_tolerance", c.physics.rel_tolerance);
        read_opt(p, "abs_tolerance", c.physics.abs_tolerance);
        read_opt(p, "max_step_us", c.physics.max_step_us);
        read_opt(p, "max_atoms", c.physics.max_atoms);
    }
    c.constraints.blockade_radius = rydberg_radius(c.physics.c6_over_hbar, c.omega);
    if (j.contains("constraints")) {
        const auto& r = j.at("constraints");
        detail::reject_unknown(r, {"width_um", "height_um", "row_spacing_um", "min_pair_distance_um",
                                   "blockade_radius_um", "margin_um"},
                               "constraints");
        read_opt(r, "width_um", c.constraints.width);
        read_opt(r, "height_um", c.constraints.height);
        read_opt(r, "row_spacing_um", c.constraints.row_spacing);
        read_opt(r, "min_pair_distance_um", c.constraints.min_pair_distance);
        read_opt(r, "blockade_radius_um", c.constraints.blockade_radius);
        read_opt(r, "margin_um", c.constraints.margin);
    }
    c.limits.reg = c.constraints;
    if (j.contains("embed")) {
        const auto& e = j.at("embed");
        detail::reject_unknown(e, {"attempts", "iterations", "learning_rate"}, "embed");
        read_opt(e, "attempts", c.embed.attempts);
        read_opt(e, "iterations", c.embed.iterations);
        read_opt(e, "learning_rate", c.embed.learning_rate);
    }
    if (j.contains("lambda")) {
        const auto& l = j.at("lambda");
        if (l.is_string()) {
            if (l.get<std::string>() != "optimize") throw ValidationError("config: lambda must be 5 numbers or \"optimize\"");
            c.lambda.reset();
        } else {
            const auto v = l.get<std::vector<double>>();
            if (v.size() != 5) throw ValidationError("config: lambda needs 5 durations in ns");
            c.lambda = WaveformParams{v[0], v[1], v[2], v[3], v[4]};
        }
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::reject_unknown(n, {"p_init_fail", "eps_g_to_r", "eps_r_to_g"}, "noise");
        read_opt(n, "p_init_fail", c.noise.p_init_fail);
        read_opt(n, "eps_g_to_r", c.noise.eps_g_to_r);
        read_opt(n, "eps_r_to_g", c.noise.eps_r_to_g);
    }
    if (j.contains("cv")) {
        const auto& v = j.at("cv");
        detail::reject_unknown(v, {"folds", "c_min", "c_max", "c_count", "w_min", "w_max", "w_count"}, "cv");
        read_opt(v, "folds", c.folds);
        double cmin = 1e-4, cmax = 1e4, wmin = 1, wmax = 1000;
        std::size_t cn = 100, wn = 30;
        read_opt(v, "c_min", cmin);
        read_opt(v, "c_max", cmax);
        read_opt(v, "c_count", cn);
        read_opt(v, "w_min", wmin);
        read_opt(v, "w_max", wmax);
        read_opt(v, "w_count", wn);
        c.grid = Grid{logspace(cmin, cmax, cn), logspace(wmin, wmax, wn)};
    }
    if (j.contains("bo")) {
        const auto& b = j.at("bo");
        detail::reject_unknown(b, {"iterations", "initial_points", "ucb_k", "refit_period"}, "bo");
        read_opt(b, "iterations", c.bo.max_iterations);
        read_opt(b, "initial_points", c.bo.initial_points);
        read_opt(b, "ucb_k", c.bo.ucb_k);
        read_opt(b, "refit_period", c.bo.refit_period);
    }
    c.bo.bounds = Polytope{5, c.limits.min_segment_ns, c.limits.max_total_ns};
    return c;
}

inline PipelineConfig load_config(const fs::path& p) {
    return config_from_json(io::parse_json(io::read_file(p), p.string()), p.parent_path());
}

/// Full snapshot; config_from_json(to_json(c)) reproduces c.
inline io::json to_json(const PipelineConfig& c) {
    io::json lambda = c.lambda ? io::json(to_point(*c.lambda)) : io::json("optimize");
    return io::json{
        {"dataset", fs::absolute(c.dataset).lexically_normal().string()},
        {"dataset_name", c.dataset_name},
        {"max_nodes", c.max_nodes},
        {"constraints",
         {{"width_um", c.constraints.width},
          {"height_um", c.constraints.height},
          {"row_spacing_um", c.constraints.row_spacing},
          {"min_pair_distance_um", c.constraints.min_pair_distance},
          {"blockade_radius_um", c.constraints.blockade_radius},
          {"margin_um", c.constraints.margin}}},
        {"embed",
         {{"attempts", c.embed.attempts}, {"iterations", c.embed.iterations}, {"learning_rate", c.embed.learning_rate}}},
        {"lambda", lambda},
        {"omega", c.omega},
        {"physics",
         {{"c6_over_hbar", c.physics.c6_over_hbar},
          {"rel_tolerance", c.physics.rel_tolerance},
          {"abs_tolerance", c.physics.abs_tolerance},
          {"max_step_us", c.physics.max_step_us},
          {"max_atoms", c.physics.max_atoms}}},
        {"noise",
         {{"p_init_fail", c.noise.p_init_fail}, {"eps_g_to_r", c.noise.eps_g_to_r}, {"eps_r_to_g", c.noise.eps_r_to_g}}},
        {"n_shots", c.n_shots},
        {"mu", c.mu},
        {"cv",
         {{"folds", c.folds},
          {"c_min", c.grid.C.front()},
          {"c_max", c.grid.C.back()},
          {"c_count", c.grid.C.size()},
          {"w_min", c.grid.minority_weight.front()},
          {"w_max", c.grid.minority_weight.back()},
          {"w_count", c.grid.minority_weight.size()}}},
        {"bo",
         {{"iterations", c.bo.max_iterations},
          {"initial_points", c.bo.initial_points},
          {"ucb_k", c.bo.ucb_k},
          {"refit_period", c.bo.refit_period}}},
        {"seed", c.seed},
        {"output", c.output.string()}};
}

// ---------------------------------------------------------------------------
// Stage building blocks
// ---------------------------------------------------------------------------

struct EmulationOutput {
    std::vector<io::MeasurementRecord> records;
    double max_norm_drift = 0;
};

/// Emulates every register under one schedule and samples shots with
/// per-graph streams.
inline EmulationOutput emulate_registers(const std::vector<Register>& regs, const PulseSchedule& schedule,
                                         std::size_t n_shots, std::uint64_t seed, const PhysicsConfig& physics = {},
                                         const NoiseModel& noise = {}) {
    EmulationOutput out;
    out.records.resize(regs.size());
    std::vector<double> drift(regs.size(), 0.0);
    parallel_for(regs.size(), [&](std::size_t i) {
        const auto ev = evolve(regs[i].positions, schedule, physics);
        drift[i] = ev.max_norm_drift;
        out.records[i] = {regs[i].graph_id,
                          sample(ev.state, n_shots, derive_seed(seed, "sample", static_cast<std::uint64_t>(regs[i].graph_id)),
                                 noise)};
    });
    for (double d : drift) out.max_norm_drift = std::max(out.max_norm_drift, d);
    return out;
}

/// Energy distributions on one binning shared by all graphs.
inline std::vector<EnergyDistribution> distributions_for(const std::vector<io::MeasurementRecord>& recs,
                                                         const std::vector<Register>& regs,
                                                         const PhysicsConfig& physics = {}) {
    std::map<GraphId, const Register*> by_id;
    for (const auto& r : regs) by_id[r.graph_id] = &r;
    std::vector<EnergySample> samples;
    for (const auto& rec : recs) {
        const auto it = by_id.find(rec.graph_id);
        if (it == by_id.end()) throw ValidationError("no register for graph " + std::to_string(rec.graph_id));
        auto set = rec.set;
        if (set.atoms == 0) set.atoms = static_cast<int>(it->second->positions.size());
        samples.push_back(energy_sample(rec.graph_id, set, it->second->positions, physics));
    }
    const auto b = global_binning(samples);
    std::vector<EnergyDistribution> out;
    for (const auto& s : samples) out.push_back(to_distribution(s, b));
    return out;
}

inline std::vector<int> labels_for(const std::vector<GraphId>& ids, const std::map<GraphId, int>& label_of) {
    std::vector<int> out;
    for (auto id : ids) {
        const auto it = label_of.find(id);
        if (it == label_of.end()) throw ValidationError("no label for graph " + std::to_string(id));
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct StageRecord {
    std::string name;
    std::vector<std::string> artifacts;  // relative to the run directory
    double seconds = 0;
};

struct RunManifest {
    fs::path directory;
    io::json config;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<StageRecord> stages;
    std::string status = "running";
    std::string failed_stage;
    std::string error;
    std::optional<WaveformParams> lambda;
    CvResult cv;
    double max_norm_drift = 0;

    io::json to_json() const {
        io::json st = io::json::array();
        for (const auto& s : stages) st.push_back({{"name", s.name}, {"artifacts", s.artifacts}, {"seconds", s.seconds}});
        io::json j{{"version", kVersion}, {"config", config}, {"seeds", seeds}, {"stages", st}, {"status", status}};
        if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
        if (!error.empty()) j["error"] = error;
        if (lambda) j["lambda"] = to_point(*lambda);
        return j;
    }

    void save() const { io::write_file(directory / "manifest.json", to_json().dump(2) + "\n"); }
};

inline constexpr const char* kStageNames[] = {"parse",         "filter", "embed",  "schedule",
                                              "emulate",       "distributions", "kernel", "train"};

inline std::map<std::string, std::uint64_t> stage_seeds(std::uint64_t master) {
    return {{"master", master},
            {"embed", stage_seed(master, "embed")},
            {"emulate", stage_seed(master, "emulate")},
            {"cv", stage_seed(master, "cv")},
            {"bo", stage_seed(master, "bo")}};
}

/// Mean CV F1 of one waveform on already embedded graphs; the BO objective.
inline double waveform_score(const WaveformParams& w, const std::vector<Register>& regs,
                             const std::map<GraphId, int>& label_of, const PipelineConfig& c,
                             const std::map<std::string, std::uint64_t>& seeds) {
    const auto sched = build_schedule(w, c.omega, c.limits);
    const auto em = emulate_registers(regs, sched, c.n_shots, seeds.at("emulate"), c.physics, c.noise);
    const auto K = qek_matrix(distributions_for(em.records, regs, c.physics), c.mu);
    return kfold_grid_search(K.values, labels_for(K.ids, label_of), c.grid, c.folds, seeds.at("cv")).mean.f1;
}

/// parse -> filter -> embed -> schedule -> emulate -> distributions -> kernel -> train.
/// Every stage writes its artifacts under the run directory and the manifest
/// is rewritten after each one; a failing stage is recorded and rethrown.
inline RunManifest run_pipeline(const PipelineConfig& c) {
    c.validate();
    RunManifest m;
    m.directory = resolve_output(c.output);
    fs::create_directories(m.directory);
    m.config = to_json(c);
    m.seeds = stage_seeds(c.seed);
    const auto& dir = m.directory;

    GraphSet parsed, filtered;
    DatasetEmbedding emb;
    std::vector<Register> regs;
    std::map<GraphId, int> label_of;
    PulseSchedule schedule;
    EmulationOutput em;
    std::vector<EnergyDistribution> dists;
    KernelMatrix K;

    auto stage = [&](const std::string& name, const std::function<std::vector<std::string>()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto artifacts = body();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            m.stages.push_back({name, std::move(artifacts), secs});
            m.save();
        } catch (const std::exception& e) {
            m.status = "failed";
            m.failed_stage = name;
            m.error = e.what();
            m.save();
            throw StageError(name, e.what());
        }
    };

    stage("parse", [&] {
        parsed = load_dataset(c.dataset, c.dataset_name);
        io::write_file(dir / "parse" / "stats.json", io::to_json(corpus_stats(parsed)).dump(2) + "\n");
        return std::vector<std::string>{"parse/stats.json"};
    });
    stage("filter", [&] {
        filtered = filter_by_node_count(parsed, c.max_nodes);
        if (filtered.empty()) throw ValidationError("no graph has at most " + std::to_string(c.max_nodes) + " nodes");
        write_tu_dataset(filtered, dir / "filter");
        io::write_file(dir / "filter" / "stats.json", io::to_json(corpus_stats(filtered)).dump(2) + "\n");
        return std::vector<std::string>{"filter", "filter/stats.json"};
    });
    stage("embed", [&] {
        emb = embed_dataset(filtered, c.constraints, m.seeds.at("embed"), c.embed);
        for (const auto& e : emb.embedded) {
            regs.push_back(e.reg);
            label_of[e.graph.id] = e.graph.label;
        }
        io::json rejected = io::json::array();
        for (const auto& [id, why] : emb.rejection_reasons) rejected.push_back({{"graph_id", id}, {"reason", why}});
        io::save_registers(regs, dir / "embed" / "registers.jsonl");
        io::write_file(dir / "embed" / "report.json",
                       io::json{{"embedded", regs.size()}, {"rejected", rejected}}.dump(2) + "\n");
        if (regs.size() < 2) throw ValidationError("fewer than two graphs embedded");
        return std::vector<std::string>{"embed/registers.jsonl", "embed/report.json"};
    });

    if (!c.lambda) {
        const auto t0 = std::chrono::steady_clock::now();
        BoConfig bc = c.bo;
        bc.seed = m.seeds.at("bo");
        BoResult bo;
        try {
            bo = optimize([&](const Point& x) { return waveform_score(to_waveform(x), regs, label_of, c, m.seeds); }, bc);
            if (bo.best_x.empty()) throw NumericalError("every objective evaluation failed");
        } catch (const std::exception& e) {
            m.status = "failed";
            m.failed_stage = "bo";
            m.error = e.what();
            m.save();
            throw StageError("bo", e.what());
        }
        io::write_file(dir / "bo" / "trace.csv", io::trace_csv(bo));
        io::write_file(dir / "bo" / "plot_trace.py",
                       "import pandas as pd, matplotlib.pyplot as plt\n"
                       "t = pd.read_csv('trace.csv')\n"
                       "plt.plot(t['iter'], t['f1_mean'], '.', label='f1_mean')\n"
                       "plt.plot(t['iter'], t['incumbent'], '-', label='incumbent')\n"
                       "plt.xlabel('iteration'); plt.legend(); plt.savefig('trace.png')\n");
        m.lambda = to_waveform(bo.best_x);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.stages.push_back({"bo", {"bo/trace.csv", "bo/plot_trace.py"}, secs});
        m.save();
    } else {
        m.lambda = c.lambda;
    }

    stage("schedule", [&] {
        schedule = build_schedule(*m.lambda, c.omega, c.limits);
        io::json segs = io::json::array();
        for (const auto& s : schedule.segments)
            segs.push_back(
                {{"duration_us", s.duration_us}, {"omega", s.omega}, {"phase", s.phase}, {"detuning", s.detuning}});
        io::write_file(dir / "schedule" / "schedule.json",
                       io::json{{"lambda_ns", to_point(*m.lambda)}, {"omega", c.omega}, {"segments", segs}}.dump(2) +
                           "\n");
        for (const auto& r : regs)
            io::write_file(dir / "schedule" / "tasks" / (std::to_string(r.graph_id) + ".json"),
                           io::emit_task_document(schedule, r, c.n_shots, c.limits));
        return std::vector<std::string>{"schedule/schedule.json", "schedule/tasks"};
    });
    stage("emulate", [&] {
        em = emulate_registers(regs, schedule, c.n_shots, m.seeds.at("emulate"), c.physics, c.noise);
        m.max_norm_drift = em.max_norm_drift;
        io::save_measurements(em.records, dir / "emulate" / "measurements.jsonl");
        io::save_registers(regs, dir / "emulate" / "registers.jsonl");
        io::write_file(dir / "emulate" / "physics.json",
                       io::json{{"c6_over_hbar", c.physics.c6_over_hbar},
                                {"rel_tolerance", c.physics.rel_tolerance},
                                {"abs_tolerance", c.physics.abs_tolerance},
                                {"max_norm_drift", em.max_norm_drift}}
                               .dump(2) + "\n");
        return std::vector<std::string>{"emulate/measurements.jsonl", "emulate/registers.jsonl",
                                        "emulate/physics.json"};
    });
    stage("distributions", [&] {
        dists = distributions_for(em.records, regs, c.physics);
        io::save_distributions(dists, dir / "distributions" / "distributions.jsonl");
        return std::vector<std::string>{"distributions/distributions.jsonl"};
    });
    stage("kernel", [&] {
        K = qek_matrix(dists, c.mu);
        io::save_kernel(K, dir / "kernel" / "kernel.csv");
        io::write_file(dir / "kernel" / "labels.csv", io::labels_to_csv(K.ids, labels_for(K.ids, label_of)));
        return std::vector<std::string>{"kernel/kernel.csv", "kernel/labels.csv"};
    });
    stage("train", [&] {
        m.cv = kfold_grid_search(K.values, labels_for(K.ids, label_of), c.grid, c.folds, m.seeds.at("cv"));
        io::write_file(dir / "train" / "cv.json", io::to_json(m.cv).dump(2) + "\n");
        io::write_file(dir / "train" / "metrics.csv", io::metrics_csv(m.cv));
        return std::vector<std::string>{"train/cv.json", "train/metrics.csv"};
    });
    m.status = "ok";
    m.save();
    return m;
}

/// Config snapshot stored in a run manifest.
inline PipelineConfig config_from_manifest(const fs::path& manifest) {
    const auto j = io::parse_json(io::read_file(manifest), manifest.string());
    if (!j.contains("config")) throw ValidationError("manifest has no config snapshot");
    return config_from_json(j.at("config"));
}

// ---------------------------------------------------------------------------
// Shot-count sensitivity
// ---------------------------------------------------------------------------

struct ShotRow {
    std::size_t shots = 0;
    CvResult cv;
};

struct SubsampleOptions {
    double mu = 1.0;
    int folds = 10;
    Grid grid = default_grid();
    std::uint64_t cv_seed = 0;
    PhysicsConfig physics;
};

/// For each k: k shots per graph drawn without replacement, a fresh global
/// binning, the kernel and CV metrics. k equal to the kept count reproduces
/// the full-data metrics exactly, since histograms ignore shot order.
inline std::vector<ShotRow> shot_subsample_analysis(const std::vector<io::MeasurementRecord>& recs,
                                                    const std::vector<Register>& regs,
                                                    const std::map<GraphId, int>& label_of,
                                                    const std::vector<std::size_t>& counts, std::uint64_t seed,
                                                    const SubsampleOptions& opt = {}) {
    for (auto k : counts) {
        if (k < 1) throw ValidationError("shot counts must be >= 1");
        for (const auto& r : recs)
            if (k > r.set.kept())
                throw ValidationError("graph " + std::to_string(r.graph_id) + " has " + std::to_string(r.set.kept()) +
                                      " kept shots, fewer than " + std::to_string(k));
    }
    std::vector<ShotRow> rows;
    for (auto k : counts) {
        auto sub = recs;
        const auto stream = derive_seed(seed, "subsample", k);
        for (auto& r : sub) {
            std::mt19937_64 rng(derive_seed(stream, "graph", static_cast<std::uint64_t>(r.graph_id)));
            shuffle(r.set.shots, rng);
            r.set.shots.resize(k);
        }
        const auto K = qek_matrix(distributions_for(sub, regs, opt.physics), opt.mu);
        rows.push_back({k, kfold_grid_search(K.values, labels_for(K.ids, label_of), opt.grid, opt.folds, opt.cv_seed)});
    }
    return rows;
}

inline std::string shot_table_csv(const std::vector<ShotRow>& rows) {
    std::string out = "shots,f1,accuracy,precision,recall,C,w1\n";
    for (const auto& r : rows)
        out += std::to_string(r.shots) + "," + io::fmt_double(r.cv.mean.f1) + "," + io::fmt_double(r.cv.mean.accuracy) +
               "," + io::fmt_double(r.cv.mean.precision) + "," + io::fmt_double(r.cv.mean.recall) + "," +
               io::fmt_double(r.cv.best.C) + "," + io::fmt_double(r.cv.best.w1) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Kernel comparison
// ---------------------------------------------------------------------------

struct NamedKernel {
    std::string name;
    KernelMatrix kernel;
};

struct ComparisonRow {
    std::string name;
    Metrics mean;
    std::optional<SvmHyperparams> best;  // empty for the baseline row
};

struct ComparisonReport {
    std::vector<GraphId> ids;
    std::vector<int> fold_of;
    std::vector<ComparisonRow> rows;  // one per kernel, then the majority baseline
};

/// Reorders `k` to the id order `ids`; throws if the id sets differ.
inline KernelMatrix align_kernel(const KernelMatrix& k, const std::vector<GraphId>& ids) {
    if (k.size() != ids.size()) throw ValidationError("kernels cover different graph sets");
    std::map<GraphId, std::size_t> pos;
    for (std::size_t i = 0; i < k.size(); ++i) pos[k.ids[i]] = i;
    std::vector<std::size_t> src;
    for (auto id : ids) {
        const auto it = pos.find(id);
        if (it == pos.end()) throw ValidationError("graph " + std::to_string(id) + " is missing from a kernel");
        src.push_back(it->second);
    }
    KernelMatrix out{k.kind, k.mu, ids, std::vector<double>(ids.size() * ids.size())};
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j) out(i, j) = k(src[i], src[j]);
    return out;
}

/// Same folds and grid for every kernel; the last row is the majority baseline.
inline ComparisonReport compare_kernels(const std::vector<NamedKernel>& kernels, const std::map<GraphId, int>& label_of,
                                        int folds, std::uint64_t seed, const Grid& grid = default_grid()) {
    if (kernels.empty()) throw ValidationError("compare: no kernels");
    ComparisonReport rep;
    rep.ids = kernels.front().kernel.ids;
    const auto labels = labels_for(rep.ids, label_of);
    for (const auto& nk : kernels) {
        const auto K = align_kernel(nk.kernel, rep.ids);
        const auto cv = kfold_grid_search(K.values, labels, grid, folds, seed);
        rep.fold_of = cv.fold_of;
        rep.rows.push_back({nk.name, cv.mean, cv.best});
    }
    rep.rows.push_back({"majority", majority_baseline(labels), std::nullopt});
    return rep;
}

inline std::string comparison_csv(const ComparisonReport& r) {
    std::string out = "kernel,f1,accuracy,precision,recall,C,w1\n";
    for (const auto& row : r.rows) {
        out += row.name + "," + io::fmt_double(row.mean.f1) + "," + io::fmt_double(row.mean.accuracy) + "," +
               io::fmt_double(row.mean.precision) + "," + io::fmt_double(row.mean.recall) + ",";
        out += row.best ? io::fmt_double(row.best->C) + "," + io::fmt_double(row.best->w1) : std::string(",");
        out += "\n";
    }
    return out;
}

}  // namespace qek
