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

#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qek {
namespace {

using testing::TempDir;

/// A small synthetic dataset on disk and a fast configuration for it.
class PipelineRun : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("pipe");
        SynthOptions so;
        so.per_class = 8;
        so.min_nodes = 5;
        so.max_nodes = 8;
        write_tu_dataset(synthetic_corpus(11, so), dir_->path() / "data");
        manifest_ = new RunManifest(run_pipeline(config("run")));
    }
    static void TearDownTestSuite() {
        delete manifest_;
        delete dir_;
    }

    static PipelineConfig config(const std::string& out) {
        PipelineConfig c;
        c.dataset = dir_->path() / "data";
        c.seed = 11;
        c.n_shots = 300;
        c.folds = 4;
        c.grid = Grid{logspace(1e-2, 1e2, 5), logspace(1, 10, 3)};
        c.output = dir_->path() / out;
        return c;
    }

    static TempDir* dir_;
    static RunManifest* manifest_;
};

TempDir* PipelineRun::dir_ = nullptr;
RunManifest* PipelineRun::manifest_ = nullptr;

TEST_F(PipelineRun, EveryStageRunsAndRecordsItsArtifacts) {
    const auto& m = *manifest_;
    EXPECT_EQ(m.status, "ok");
    std::vector<std::string> names;
    for (const auto& s : m.stages) {
        names.push_back(s.name);
        EXPECT_FALSE(s.artifacts.empty()) << s.name;
        for (const auto& a : s.artifacts) EXPECT_TRUE(fs::exists(m.directory / a)) << a;
    }
    EXPECT_EQ(names, (std::vector<std::string>{std::begin(kStageNames), std::end(kStageNames)}));
    const auto j = io::parse_json(io::read_file(m.directory / "manifest.json"), "manifest");
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["seeds"]["master"], 11);
    EXPECT_EQ(j["lambda"], (io::json{85, 21, 50, 25, 20}));
}

TEST_F(PipelineRun, ArtifactsRevalidate) {
    const auto& dir = manifest_->directory;
    const auto regs = io::load_registers(dir / "embed" / "registers.jsonl");
    ASSERT_EQ(regs.size(), 16u);
    const RegisterConstraints c;
    std::map<GraphId, Graph> graph_of;
    for (const auto& g : parse_tu_dataset(dir / "filter", "SYNTH").graphs) graph_of[g.id] = g;
    for (const auto& r : regs) {
        const auto task = io::parse_task_document(
            io::read_file(dir / "schedule" / "tasks" / (std::to_string(r.graph_id) + ".json")));
        EXPECT_EQ(task.n_shots, 300u);
        EXPECT_TRUE(validate_task(task.schedule(), task.positions_um()).valid()) << r.graph_id;
        EXPECT_TRUE(verify_ud(r, graph_of.at(r.graph_id), c).feasible) << r.graph_id;
    }
    const auto recs = io::load_measurements(dir / "emulate" / "measurements.jsonl");
    ASSERT_EQ(recs.size(), regs.size());
    for (const auto& r : recs) EXPECT_EQ(r.set.kept(), 300u);
    const auto dists = io::load_distributions(dir / "distributions" / "distributions.jsonl");
    EXPECT_EQ(dists.size(), regs.size());
    const auto K = io::load_kernel(dir / "kernel" / "kernel.csv");
    EXPECT_EQ(K.values, qek_matrix(dists, 1.0).values);
    for (std::size_t i = 0; i < K.size(); ++i) EXPECT_EQ(K(i, i), 1.0);
    const auto labels = io::labels_from_csv(io::read_file(dir / "kernel" / "labels.csv"));
    ASSERT_EQ(labels.size(), K.size());
    for (std::size_t i = 0; i < K.size(); ++i) EXPECT_EQ(labels[i].first, K.ids[i]);
    const auto cv = io::parse_json(io::read_file(dir / "train" / "cv.json"), "cv");
    EXPECT_EQ(cv["folds"].size(), 4u);
    EXPECT_LT(manifest_->max_norm_drift, 1e-8);
}

TEST_F(PipelineRun, RerunFromManifestIsBitIdentical) {
    auto c = config_from_manifest(manifest_->directory / "manifest.json");
    c.output = dir_->path() / "rerun";
    const auto m = run_pipeline(c);
    for (const char* f : {"kernel/kernel.csv", "train/metrics.csv", "emulate/measurements.jsonl"})
        EXPECT_EQ(io::read_file(m.directory / f), io::read_file(manifest_->directory / f)) << f;
}

TEST_F(PipelineRun, ThreadCountDoesNotChangeArtifacts) {
    ::setenv("QEK_THREADS", "3", 1);
    const auto m = run_pipeline(config("threads"));
    ::unsetenv("QEK_THREADS");
    for (const char* f : {"embed/registers.jsonl", "emulate/measurements.jsonl", "kernel/kernel.csv", "train/cv.json"})
        EXPECT_EQ(io::read_file(m.directory / f), io::read_file(manifest_->directory / f)) << f;
}

TEST_F(PipelineRun, OptimizeModeWritesATrace) {
    auto c = config("bo");
    c.lambda.reset();
    c.bo.max_iterations = 3;
    c.bo.initial_points = 2;
    c.n_shots = 100;
    const auto m = run_pipeline(c);
    ASSERT_TRUE(m.lambda);
    EXPECT_TRUE(waveform_feasible(*m.lambda));
    std::vector<std::string> names;
    for (const auto& s : m.stages) names.push_back(s.name);
    ASSERT_EQ(names.size(), 9u);
    EXPECT_EQ(names[3], "bo");
    EXPECT_EQ(names[4], "schedule");
    const auto trace = io::read_file(m.directory / "bo" / "trace.csv");
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,tau0,t0,tau1,t1,tau2,f1_mean,incumbent");
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);
    EXPECT_TRUE(fs::exists(m.directory / "bo" / "plot_trace.py"));
}

TEST_F(PipelineRun, ShotSubsamplingAtFullCountReproducesTheRun) {
    const auto& dir = manifest_->directory;
    const auto recs = io::load_measurements(dir / "emulate" / "measurements.jsonl");
    const auto regs = io::load_registers(dir / "emulate" / "registers.jsonl");
    std::map<GraphId, int> label_of;
    for (const auto& [id, l] : io::labels_from_csv(io::read_file(dir / "kernel" / "labels.csv"))) label_of[id] = l;
    SubsampleOptions opt;
    opt.folds = 4;
    opt.grid = config("x").grid;
    opt.cv_seed = manifest_->seeds.at("cv");
    const auto rows = shot_subsample_analysis(recs, regs, label_of, {10, 100, 300}, 5, opt);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2].cv.mean.f1, manifest_->cv.mean.f1);
    EXPECT_EQ(rows[2].cv.mean.accuracy, manifest_->cv.mean.accuracy);
    EXPECT_EQ(rows[2].cv.best, manifest_->cv.best);
    const auto csv = shot_table_csv(rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    try {
        shot_subsample_analysis(recs, regs, label_of, {301}, 5, opt);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("graph " + std::to_string(recs.front().graph_id)), std::string::npos);
    }
}

TEST_F(PipelineRun, KernelComparisonSharesFolds) {
    const auto& dir = manifest_->directory;
    const auto Kq = io::load_kernel(dir / "kernel" / "kernel.csv");
    const auto gs = parse_tu_dataset(dir / "filter", "SYNTH");
    std::map<GraphId, int> label_of;
    for (const auto& g : gs.graphs) label_of[g.id] = g.label;
    // SPK over the same graphs, stored in reverse id order.
    std::vector<Graph> rev(gs.graphs.rbegin(), gs.graphs.rend());
    const auto Ks = spk_matrix(rev);
    const auto grid = config("x").grid;
    const auto rep = compare_kernels({{"qek", Kq}, {"spk", Ks}}, label_of, 4, 3, grid);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.rows[2].name, "majority");
    EXPECT_FALSE(rep.rows[2].best);
    EXPECT_EQ(rep.fold_of, stratified_folds(labels_for(rep.ids, label_of), 4, 3));
    // Alignment makes the order of the stored kernel irrelevant.
    const auto direct = kfold_grid_search(align_kernel(Ks, rep.ids).values, labels_for(rep.ids, label_of), grid, 4, 3);
    EXPECT_EQ(rep.rows[1].mean.f1, direct.mean.f1);
    auto missing = Ks;
    missing.ids.back() = 9999;
    EXPECT_THROW(compare_kernels({{"qek", Kq}, {"bad", missing}}, label_of, 4, 3, grid), ValidationError);
    const auto csv = comparison_csv(rep);
    EXPECT_NE(csv.find("\nmajority,"), std::string::npos);
}

TEST_F(PipelineRun, FailingStageIsRecorded) {
    auto c = config("fail");
    c.max_nodes = 2;
    try {
        run_pipeline(c);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "filter");
    }
    const auto j = io::parse_json(io::read_file(dir_->path() / "fail" / "manifest.json"), "m");
    EXPECT_EQ(j["status"], "failed");
    EXPECT_EQ(j["failed_stage"], "filter");
    EXPECT_EQ(j["stages"].size(), 1u);
}

TEST_F(PipelineRun, RelativeOutputResolvesUnderTheOutputRoot) {
    auto c = config("unused");
    c.output = "rooted";
    c.n_shots = 50;
    ::setenv(kOutputRootEnv, (dir_->path() / "root").c_str(), 1);
    const auto m = run_pipeline(c);
    ::unsetenv(kOutputRootEnv);
    EXPECT_EQ(m.directory, dir_->path() / "root" / "rooted");
    EXPECT_TRUE(fs::exists(dir_->path() / "root" / "rooted" / "manifest.json"));
}

TEST(Config, ParsesAndRoundTrips) {
    TempDir d("cfg");
    fs::create_directories(d / "data");
    const auto j = io::json::parse(R"({
        "dataset": "data", "seed": 4, "n_shots": 500, "mu": 2.0, "omega": 12.0,
        "lambda": "optimize",
        "cv": {"folds": 5, "c_count": 7, "w_count": 2},
        "bo": {"iterations": 20},
        "noise": {"p_init_fail": 0.01}
    })");
    const auto c = config_from_json(j, d.path());
    EXPECT_EQ(c.dataset, d / "data");
    EXPECT_FALSE(c.lambda);
    EXPECT_EQ(c.grid.size(), 14u);
    EXPECT_EQ(c.folds, 5);
    EXPECT_EQ(c.bo.max_iterations, 20);
    EXPECT_NEAR(c.constraints.blockade_radius, std::pow(5.42e6 / 12.0, 1.0 / 6), 1e-12);
    EXPECT_EQ(c.limits.reg.blockade_radius, c.constraints.blockade_radius);
    EXPECT_NO_THROW(c.validate());
    const auto snap = to_json(c);
    EXPECT_EQ(to_json(config_from_json(snap)), snap);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    TempDir d("cfg");
    fs::create_directories(d / "data");
    auto parse = [&](const std::string& text) { return config_from_json(io::json::parse(text), d.path()); };
    EXPECT_THROW(parse(R"({"dataset": "data", "shots": 5})"), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "data", "cv": {"fold": 5}})"), ValidationError);
    EXPECT_THROW(parse(R"({"seed": 1})"), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "data", "lambda": [1, 2]})"), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "data", "lambda": "auto"})"), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "data", "lambda": [100, 100, 100, 100, 100]})").validate(), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "data", "omega": 20})").validate(), ValidationError);
    EXPECT_THROW(parse(R"({"dataset": "missing"})").validate(), ValidationError);
}

TEST(Synthetic, TwoConnectedClassesDeterministically) {
    SynthOptions so;
    so.per_class = 5;
    const auto a = synthetic_corpus(3, so);
    const auto b = synthetic_corpus(3, so);
    ASSERT_EQ(a.size(), 10u);
    std::set<GraphId> ids;
    int ones = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& g = a.graphs[i];
        EXPECT_TRUE(is_connected(g));
        EXPECT_GE(g.nodes, so.min_nodes);
        EXPECT_LE(g.nodes, so.max_nodes);
        EXPECT_EQ(g.edges, b.graphs[i].edges);
        ids.insert(g.id);
        ones += g.label == 1;
    }
    EXPECT_EQ(ids.size(), a.size());
    EXPECT_EQ(ones, 5);
}

}  // namespace
}  // namespace qek
