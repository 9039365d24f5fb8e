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

// Command-line front end. Exit codes: 0 success, 2 validation failure,
// 3 stage or runtime error.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qek/qek.hpp"

namespace {

using namespace qek;
using json = io::json;

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(io::parse_double(detail::trim(cell), "argument", 0));
    return out;
}

WaveformParams parse_lambda(const std::string& text) {
    const auto v = parse_list(text);
    if (v.size() != 5) throw ValidationError("--lambda needs 5 comma-separated durations in ns");
    return {v[0], v[1], v[2], v[3], v[4]};
}

std::map<GraphId, int> label_map(const std::vector<std::pair<GraphId, int>>& rows) {
    std::map<GraphId, int> out;
    for (const auto& [id, l] : rows)
        if (!out.emplace(id, l).second) throw ValidationError("duplicate label for graph " + std::to_string(id));
    return out;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum evolution kernel pipeline"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    // data
    auto* data = app.add_subcommand("data", "Inspect, filter or generate TU datasets");
    data->require_subcommand(1);
    std::string data_dir, data_out;
    int max_nodes = 10;
    auto* stats = data->add_subcommand("stats", "Corpus statistics as JSON");
    stats->add_option("dir", data_dir, "TU dataset directory")->required();
    auto* filter = data->add_subcommand("filter", "Keep graphs with at most N nodes");
    filter->add_option("dir", data_dir, "TU dataset directory")->required();
    filter->add_option("--max-nodes", max_nodes)->required();
    filter->add_option("--out", data_out, "Output directory")->required();
    std::uint64_t seed = 0;
    std::size_t per_class = 20;
    auto* synth = data->add_subcommand("synth", "Generate the two-class synthetic corpus");
    synth->add_option("--seed", seed);
    synth->add_option("--per-class", per_class);
    synth->add_option("--max-nodes", max_nodes);
    synth->add_option("--out", data_out, "Output directory")->required();

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "Embed a dataset as unit-disk registers");
    std::string dataset, out;
    int attempts = 20;
    embed_cmd->add_option("dataset", dataset)->required();
    embed_cmd->add_option("--max-nodes", max_nodes);
    embed_cmd->add_option("--seed", seed);
    embed_cmd->add_option("--attempts", attempts);
    embed_cmd->add_option("--out", out)->required();

    // pulse
    auto* pulse = app.add_subcommand("pulse", "Build or validate pulse schedules");
    pulse->require_subcommand(1);
    std::string lambda_text = "85,21,50,25,20", register_path, task_path;
    double omega = kDefaultOmegaMax;
    std::size_t shots = 1000;
    auto* build = pulse->add_subcommand("build", "Schedule for a waveform; a task document when a register is given");
    build->add_option("--lambda", lambda_text);
    build->add_option("--omega", omega);
    build->add_option("--register", register_path, "Register JSON");
    build->add_option("--shots", shots);
    build->add_option("--out", out);
    auto* validate = pulse->add_subcommand("validate", "Check a task document against the hardware limits");
    validate->add_option("task", task_path)->required();

    // emulate
    auto* emulate_cmd = app.add_subcommand("emulate", "Emulate embedded registers and sample shots");
    std::string emb_dir;
    emulate_cmd->add_option("embeddings", emb_dir, "Directory holding registers.jsonl")->required();
    emulate_cmd->add_option("--lambda", lambda_text);
    emulate_cmd->add_option("--omega", omega);
    emulate_cmd->add_option("--shots", shots);
    emulate_cmd->add_option("--seed", seed);
    emulate_cmd->add_option("--out", out)->required();

    // kernel
    auto* kernel_cmd = app.add_subcommand("kernel", "Kernel matrix from measurements or a classical baseline");
    std::string meas_dir, classical;
    double mu = 1.0;
    kernel_cmd->add_option("--measurements", meas_dir, "Directory holding measurements.jsonl and registers.jsonl");
    kernel_cmd->add_option("--mu", mu);
    kernel_cmd->add_option("--classical", classical, "Classical kernel name (spk)");
    kernel_cmd->add_option("--dataset", dataset);
    kernel_cmd->add_option("--max-nodes", max_nodes);
    kernel_cmd->add_option("--out", out)->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Cross-validated SVM grid search on a kernel");
    std::string kernel_path, labels_path;
    int folds = 10;
    train_cmd->add_option("--kernel", kernel_path)->required();
    train_cmd->add_option("--labels", labels_path)->required();
    train_cmd->add_option("--k", folds);
    train_cmd->add_option("--seed", seed);
    train_cmd->add_option("--out", out, "Directory for cv.json and metrics.csv");

    // bo
    auto* bo_cmd = app.add_subcommand("bo", "Optimize the waveform by Bayesian optimization, then run the pipeline");
    int iters = 50;
    bo_cmd->add_option("--dataset", dataset)->required();
    bo_cmd->add_option("--iters", iters);
    bo_cmd->add_option("--seed", seed);
    bo_cmd->add_option("--max-nodes", max_nodes);
    bo_cmd->add_option("--shots", shots);
    bo_cmd->add_option("--out", out);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline from a config or a previous manifest");
    std::string config_path, manifest_path;
    run_cmd->add_option("config", config_path, "Config JSON");
    run_cmd->add_option("--manifest", manifest_path, "Re-run the config stored in a manifest");
    run_cmd->add_option("--out", out, "Override the output directory");

    // analyze-shots
    auto* shots_cmd = app.add_subcommand("analyze-shots", "Metrics against the number of shots per graph");
    std::string run_dir, counts_text = "10,100,1000";
    shots_cmd->add_option("run", run_dir, "Run directory")->required();
    shots_cmd->add_option("--shots", counts_text);
    shots_cmd->add_option("--seed", seed);
    shots_cmd->add_option("--out", out);

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Compare kernels on identical folds and grids");
    std::vector<std::string> kernel_args;
    compare_cmd->add_option("--kernel", kernel_args, "name=path or path")->required();
    compare_cmd->add_option("--labels", labels_path)->required();
    compare_cmd->add_option("--k", folds);
    compare_cmd->add_option("--seed", seed);
    compare_cmd->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*stats) {
            print(io::to_json(corpus_stats(load_dataset(data_dir))));
        } else if (*filter) {
            const auto gs = filter_by_node_count(load_dataset(data_dir), max_nodes);
            write_tu_dataset(gs, resolve_output(data_out));
            std::cout << "kept " << gs.size() << " graphs\n";
        } else if (*synth) {
            SynthOptions so;
            so.per_class = per_class;
            so.max_nodes = max_nodes;
            const auto gs = synthetic_corpus(seed, so);
            write_tu_dataset(gs, resolve_output(data_out));
            print(io::to_json(corpus_stats(gs)));
        } else if (*embed_cmd) {
            const auto gs = filter_by_node_count(load_dataset(dataset), max_nodes);
            EmbedOptions eo;
            eo.attempts = attempts;
            // Same stream as the embed stage of a run with this master seed.
            const auto emb = embed_dataset(gs, RegisterConstraints{}, stage_seed(seed, "embed"), eo);
            std::vector<Register> regs;
            std::vector<GraphId> ids;
            std::vector<int> labels;
            for (const auto& e : emb.embedded) {
                regs.push_back(e.reg);
                ids.push_back(e.graph.id);
                labels.push_back(e.graph.label);
            }
            const auto dir = resolve_output(out);
            io::save_registers(regs, dir / "registers.jsonl");
            io::write_file(dir / "labels.csv", io::labels_to_csv(ids, labels));
            json rejected = json::array();
            for (const auto& [id, why] : emb.rejection_reasons) rejected.push_back({{"graph_id", id}, {"reason", why}});
            const json report{{"embedded", regs.size()}, {"rejected", rejected}};
            io::write_file(dir / "report.json", report.dump(2) + "\n");
            print(report);
        } else if (*build) {
            const auto sched = build_schedule(parse_lambda(lambda_text), omega);
            std::string text;
            if (!register_path.empty()) {
                text = io::emit_task_document(sched, io::load_register(register_path), shots);
            } else {
                json segs = json::array();
                for (const auto& s : sched.segments)
                    segs.push_back({{"duration_us", s.duration_us},
                                    {"omega", s.omega},
                                    {"phase", s.phase},
                                    {"detuning", s.detuning}});
                text = json{{"segments", segs}, {"mixing_angles", mixing_angles(sched)}}.dump(2) + "\n";
            }
            if (out.empty())
                std::cout << text;
            else
                io::write_file(resolve_output(out), text);
        } else if (*validate) {
            const auto doc = io::parse_task_document(io::read_file(task_path), task_path);
            const auto rep = validate_task(doc.schedule(), doc.positions_um());
            if (!rep.valid()) {
                for (const auto& v : rep.violations) std::cout << v.message << "\n";
                return kExitValidation;
            }
            std::cout << "valid\n";
        } else if (*emulate_cmd) {
            const auto regs = io::load_registers(fs::path(emb_dir) / "registers.jsonl");
            const auto sched = build_schedule(parse_lambda(lambda_text), omega);
            const PhysicsConfig physics;
            const auto em = emulate_registers(regs, sched, shots, stage_seed(seed, "emulate"), physics);
            const auto dir = resolve_output(out);
            io::save_measurements(em.records, dir / "measurements.jsonl");
            io::save_registers(regs, dir / "registers.jsonl");
            if (fs::exists(fs::path(emb_dir) / "labels.csv"))
                fs::copy_file(fs::path(emb_dir) / "labels.csv", dir / "labels.csv",
                              fs::copy_options::overwrite_existing);
            io::write_file(dir / "physics.json", json{{"c6_over_hbar", physics.c6_over_hbar},
                                                      {"rel_tolerance", physics.rel_tolerance},
                                                      {"abs_tolerance", physics.abs_tolerance},
                                                      {"max_norm_drift", em.max_norm_drift}}
                                                         .dump(2) + "\n");
            std::cout << "emulated " << regs.size() << " registers, max norm drift " << em.max_norm_drift << "\n";
        } else if (*kernel_cmd) {
            KernelMatrix K;
            if (!classical.empty()) {
                if (classical != "spk") throw ValidationError("unknown classical kernel '" + classical + "'");
                if (dataset.empty()) throw ValidationError("--classical needs --dataset");
                K = spk_matrix(filter_by_node_count(load_dataset(dataset), max_nodes).graphs);
            } else {
                if (meas_dir.empty()) throw ValidationError("kernel needs --measurements or --classical");
                const auto recs = io::load_measurements(fs::path(meas_dir) / "measurements.jsonl");
                const auto regs = io::load_registers(fs::path(meas_dir) / "registers.jsonl");
                const auto dists = distributions_for(recs, regs);
                const auto target = resolve_output(out);
                io::save_distributions(dists, target.parent_path() / "distributions.jsonl");
                K = qek_matrix(dists, mu);
            }
            io::save_kernel(K, resolve_output(out));
            std::cout << "wrote " << K.size() << "x" << K.size() << " kernel\n";
        } else if (*train_cmd) {
            const auto K = io::load_kernel(kernel_path);
            const auto labels = labels_for(K.ids, label_map(io::labels_from_csv(io::read_file(labels_path), labels_path)));
            const auto cv = kfold_grid_search(K.values, labels, folds, stage_seed(seed, "cv"));
            if (!out.empty()) {
                const auto dir = resolve_output(out);
                io::write_file(dir / "cv.json", io::to_json(cv).dump(2) + "\n");
                io::write_file(dir / "metrics.csv", io::metrics_csv(cv));
            }
            print(io::to_json(cv));
        } else if (*bo_cmd) {
            PipelineConfig c;
            c.dataset = dataset;
            c.max_nodes = max_nodes;
            c.lambda.reset();
            c.bo.max_iterations = iters;
            c.n_shots = shots;
            c.seed = seed;
            if (!out.empty()) c.output = out;
            const auto m = run_pipeline(c);
            std::cout << "best lambda";
            for (double v : to_point(*m.lambda)) std::cout << " " << v;
            std::cout << "\nmean f1 " << m.cv.mean.f1 << "\nrun " << m.directory.string() << "\n";
        } else if (*run_cmd) {
            PipelineConfig c;
            if (!manifest_path.empty())
                c = config_from_manifest(manifest_path);
            else if (!config_path.empty())
                c = load_config(config_path);
            else
                throw ValidationError("run needs a config file or --manifest");
            if (!out.empty()) c.output = out;
            const auto m = run_pipeline(c);
            print(io::to_json(m.cv));
            std::cout << "run " << m.directory.string() << "\n";
        } else if (*shots_cmd) {
            const fs::path dir(run_dir);
            const auto c = config_from_manifest(dir / "manifest.json");
            const auto recs = io::load_measurements(dir / "emulate" / "measurements.jsonl");
            const auto regs = io::load_registers(dir / "emulate" / "registers.jsonl");
            const auto labels = label_map(io::labels_from_csv(io::read_file(dir / "kernel" / "labels.csv")));
            std::vector<std::size_t> counts;
            for (double v : parse_list(counts_text)) counts.push_back(static_cast<std::size_t>(v));
            SubsampleOptions so;
            so.mu = c.mu;
            so.folds = c.folds;
            so.grid = c.grid;
            so.cv_seed = stage_seeds(c.seed).at("cv");
            so.physics = c.physics;
            const auto table = shot_table_csv(shot_subsample_analysis(recs, regs, labels, counts, seed, so));
            if (!out.empty()) io::write_file(resolve_output(out), table);
            std::cout << table;
        } else if (*compare_cmd) {
            std::vector<NamedKernel> ks;
            for (const auto& arg : kernel_args) {
                const auto eq = arg.find('=');
                const std::string name = eq == std::string::npos ? fs::path(arg).stem().string() : arg.substr(0, eq);
                const std::string path = eq == std::string::npos ? arg : arg.substr(eq + 1);
                ks.push_back({name, io::load_kernel(path)});
            }
            const auto labels = label_map(io::labels_from_csv(io::read_file(labels_path), labels_path));
            const auto table = comparison_csv(compare_kernels(ks, labels, folds, stage_seed(seed, "cv")));
            if (!out.empty()) io::write_file(resolve_output(out), table);
            std::cout << table;
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
