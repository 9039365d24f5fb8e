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

// On-disk formats: registers, task documents, measurement records,
// distributions, kernel matrices, labels, CV results and BO traces.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qek/bayesopt.hpp"
#include "qek/embedder.hpp"
#include "qek/emulator.hpp"
#include "qek/features.hpp"
#include "qek/graph.hpp"
#include "qek/learn.hpp"
#include "qek/pulses.hpp"

namespace qek::io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError(p.string(), 0, "cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin, 0, e.what());
    }
}

/// Shortest decimal text that reads back to the same double.
inline std::string fmt_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

/// v * 10^exp10 computed on the shortest decimal form of v, so unit changes
/// such as 85 ns -> 8.5e-8 s land on the double nearest the decimal value.
inline double scale_decimal(double v, int exp10) {
    if (!std::isfinite(v) || v == 0) return v * std::pow(10.0, exp10);
    std::string text = fmt_double(v);
    int e = exp10;
    if (const auto pos = text.find('e'); pos != std::string::npos) {
        e += std::stoi(text.substr(pos + 1));
        text.resize(pos);
    }
    text += "e" + std::to_string(e);
    double out = 0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

template <class T>
T get_field(const json& j, const char* key, const std::string& origin) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(origin, 0, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(origin, 0, std::string("field '") + key + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

inline json to_json(const CorpusStats& s) {
    json classes = json::object();
    for (const auto& [k, v] : s.class_counts) classes[std::to_string(k)] = v;
    return json{{"graphs", s.graph_count},
                {"nodes", {{"min", s.min_nodes}, {"avg", s.avg_nodes}, {"max", s.max_nodes}}},
                {"edges", {{"min", s.min_edges}, {"avg", s.avg_edges}, {"max", s.max_edges}}},
                {"class_counts", classes}};
}

// ---------------------------------------------------------------------------
// Registers
// ---------------------------------------------------------------------------

inline json to_json(const Register& r) {
    json pos = json::array();
    for (const auto& p : r.positions) pos.push_back({p.x, p.y});
    return json{{"graph_id", r.graph_id}, {"r_b_um", r.r_b}, {"positions", pos}};
}

inline Register register_from_json(const json& j, const std::string& origin = "register") {
    Register r;
    r.graph_id = get_field<GraphId>(j, "graph_id", origin);
    r.r_b = get_field<double>(j, "r_b_um", origin);
    const auto pos = get_field<std::vector<std::array<double, 2>>>(j, "positions", origin);
    for (const auto& p : pos) r.positions.push_back({p[0], p[1]});
    if (!(r.r_b > 0)) throw ParseError(origin, 0, "r_b_um must be positive");
    return r;
}

inline void save_register(const Register& r, const std::filesystem::path& p) { write_file(p, to_json(r).dump(2) + "\n"); }

inline Register load_register(const std::filesystem::path& p) {
    return register_from_json(parse_json(read_file(p), p.string()), p.string());
}

// ---------------------------------------------------------------------------
// Task document (SI units)
// ---------------------------------------------------------------------------

inline constexpr const char* kTaskSchema = "qek-task/1";

struct TaskDocument {
    std::string schema_version = kTaskSchema;
    std::size_t n_shots = 0;
    std::vector<std::array<double, 2>> positions_m;
    struct Segment {
        double duration_s = 0, omega_rad_per_s = 0, phase_rad = 0, detuning_rad_per_s = 0;
        bool operator==(const Segment&) const = default;
    };
    std::vector<Segment> segments;

    PulseSchedule schedule() const {
        PulseSchedule s;
        for (const auto& g : segments)
            s.segments.push_back({scale_decimal(g.duration_s, 6), scale_decimal(g.omega_rad_per_s, -6), g.phase_rad,
                                  scale_decimal(g.detuning_rad_per_s, -6)});
        return s;
    }
    std::vector<Vec2> positions_um() const {
        std::vector<Vec2> out;
        for (const auto& p : positions_m) out.push_back({scale_decimal(p[0], 6), scale_decimal(p[1], 6)});
        return out;
    }
    bool operator==(const TaskDocument&) const = default;
};

inline TaskDocument make_task_document(const PulseSchedule& s, const std::vector<Vec2>& positions, std::size_t n_shots) {
    TaskDocument d;
    d.n_shots = n_shots;
    for (const auto& p : positions) d.positions_m.push_back({scale_decimal(p.x, -6), scale_decimal(p.y, -6)});
    for (const auto& g : s.segments)
        d.segments.push_back({scale_decimal(g.duration_us, -6), scale_decimal(g.omega, 6), g.phase,
                              scale_decimal(g.detuning, 6)});
    return d;
}

/// Canonical text: sorted keys, two-space indent, shortest round-trip numbers.
inline std::string serialize(const TaskDocument& d) {
    json segs = json::array();
    for (const auto& g : d.segments)
        segs.push_back({{"duration_s", g.duration_s},
                        {"omega_rad_per_s", g.omega_rad_per_s},
                        {"phase_rad", g.phase_rad},
                        {"detuning_rad_per_s", g.detuning_rad_per_s}});
    json pos = json::array();
    for (const auto& p : d.positions_m) pos.push_back({p[0], p[1]});
    json j{{"schema_version", d.schema_version},
           {"n_shots", d.n_shots},
           {"register", {{"positions_m", pos}}},
           {"schedule", {{"segments", segs}}}};
    return j.dump(2) + "\n";
}

inline TaskDocument parse_task_document(const std::string& text, const std::string& origin = "task") {
    const auto j = parse_json(text, origin);
    TaskDocument d;
    d.schema_version = get_field<std::string>(j, "schema_version", origin);
    if (d.schema_version != kTaskSchema)
        throw ParseError(origin, 0, "unsupported schema_version '" + d.schema_version + "'");
    d.n_shots = get_field<std::size_t>(j, "n_shots", origin);
    const auto reg = get_field<json>(j, "register", origin);
    d.positions_m = get_field<std::vector<std::array<double, 2>>>(reg, "positions_m", origin);
    const auto sch = get_field<json>(j, "schedule", origin);
    for (const auto& g : get_field<json>(sch, "segments", origin)) {
        d.segments.push_back({get_field<double>(g, "duration_s", origin), get_field<double>(g, "omega_rad_per_s", origin),
                              get_field<double>(g, "phase_rad", origin),
                              get_field<double>(g, "detuning_rad_per_s", origin)});
    }
    return d;
}

/// Validates, then renders the hardware task. Refuses invalid tasks.
inline std::string emit_task_document(const PulseSchedule& s, const std::vector<Vec2>& positions, std::size_t n_shots,
                                      const HardwareLimits& lim = {}) {
    if (n_shots < 1) throw ValidationError("task: n_shots must be >= 1");
    const auto rep = validate_task(s, positions, lim);
    if (!rep.valid()) {
        std::string msg = "task is invalid:";
        for (const auto& v : rep.violations) msg += "\n  " + v.message;
        throw ValidationError(msg);
    }
    return serialize(make_task_document(s, positions, n_shots));
}

inline std::string emit_task_document(const PulseSchedule& s, const Register& r, std::size_t n_shots,
                                      const HardwareLimits& lim = {}) {
    return emit_task_document(s, r.positions, n_shots, lim);
}

// ---------------------------------------------------------------------------
// Measurements (JSON lines)
// ---------------------------------------------------------------------------

struct MeasurementRecord {
    GraphId graph_id = 0;
    MeasurementSet set;
};

inline json to_json(const MeasurementRecord& r) {
    json shots = json::array();
    for (auto s : r.set.shots) shots.push_back(to_bitstring(s, r.set.atoms));
    return json{{"graph_id", r.graph_id}, {"requested", r.set.requested}, {"kept", r.set.kept()}, {"shots", shots}};
}

/// `atoms` is needed only when the record holds no shots.
inline MeasurementRecord measurement_from_json(const json& j, const std::string& origin, int atoms = 0) {
    MeasurementRecord r;
    r.graph_id = get_field<GraphId>(j, "graph_id", origin);
    r.set.requested = get_field<std::size_t>(j, "requested", origin);
    const auto kept = get_field<std::size_t>(j, "kept", origin);
    const auto shots = get_field<std::vector<std::string>>(j, "shots", origin);
    if (shots.size() != kept) throw ParseError(origin, 0, "kept does not match the number of shots");
    if (kept > r.set.requested) throw ParseError(origin, 0, "kept exceeds requested");
    r.set.atoms = shots.empty() ? atoms : static_cast<int>(shots.front().size());
    for (const auto& s : shots) {
        if (static_cast<int>(s.size()) != r.set.atoms) throw ParseError(origin, 0, "bitstrings differ in length");
        try {
            r.set.shots.push_back(from_bitstring(s));
        } catch (const ValidationError& e) {
            throw ParseError(origin, 0, e.what());
        }
    }
    return r;
}

inline void save_measurements(const std::vector<MeasurementRecord>& recs, const std::filesystem::path& p) {
    std::string out;
    for (const auto& r : recs) out += to_json(r).dump() + "\n";
    write_file(p, out);
}

inline std::vector<MeasurementRecord> load_measurements(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::vector<MeasurementRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string origin = p.string() + ":" + std::to_string(lineno);
        out.push_back(measurement_from_json(parse_json(line, origin), origin));
    }
    return out;
}

// Registers in one JSON-lines file, as stored next to measurements.
inline void save_registers(const std::vector<Register>& regs, const std::filesystem::path& p) {
    std::string out;
    for (const auto& r : regs) out += to_json(r).dump() + "\n";
    write_file(p, out);
}

inline std::vector<Register> load_registers(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::vector<Register> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string origin = p.string() + ":" + std::to_string(lineno);
        out.push_back(register_from_json(parse_json(line, origin), origin));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

inline json to_json(const EnergyDistribution& d) {
    return json{{"graph_id", d.graph_id}, {"e1", d.e1}, {"e2", d.e2}, {"probabilities", d.probabilities}};
}

inline EnergyDistribution distribution_from_json(const json& j, const std::string& origin) {
    EnergyDistribution d;
    d.graph_id = get_field<GraphId>(j, "graph_id", origin);
    d.e1 = get_field<double>(j, "e1", origin);
    d.e2 = get_field<double>(j, "e2", origin);
    d.probabilities = get_field<std::vector<double>>(j, "probabilities", origin);
    if (d.probabilities.size() != kEnergyBins)
        throw ParseError(origin, 0, "expected " + std::to_string(kEnergyBins) + " probabilities");
    double s = 0;
    for (double p : d.probabilities) {
        if (!(p >= 0)) throw ParseError(origin, 0, "negative probability");
        s += p;
    }
    if (std::abs(s - 1) > 1e-9) throw ParseError(origin, 0, "probabilities do not sum to 1");
    return d;
}

inline void save_distributions(const std::vector<EnergyDistribution>& ds, const std::filesystem::path& p) {
    std::string out;
    for (const auto& d : ds) out += to_json(d).dump() + "\n";
    write_file(p, out);
}

inline std::vector<EnergyDistribution> load_distributions(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::vector<EnergyDistribution> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string origin = p.string() + ":" + std::to_string(lineno);
        out.push_back(distribution_from_json(parse_json(line, origin), origin));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV: kernels, labels, metrics, traces
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(detail::trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& origin, std::size_t line) {
    double v = 0;
    const auto* b = s.data();
    const auto* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) throw ParseError(origin, line, "expected number, got '" + s + "'");
    return v;
}

/// Header row of graph ids, then one row of values per graph.
inline std::string kernel_to_csv(const KernelMatrix& K) {
    std::string out;
    for (std::size_t i = 0; i < K.size(); ++i) out += (i ? "," : "") + std::to_string(K.ids[i]);
    out += "\n";
    for (std::size_t i = 0; i < K.size(); ++i) {
        for (std::size_t j = 0; j < K.size(); ++j) out += (j ? "," : "") + fmt_double(K(i, j));
        out += "\n";
    }
    return out;
}

inline KernelMatrix kernel_from_csv(const std::string& text, const std::string& origin = "kernel") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    KernelMatrix K;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = split_csv(detail::trim(line));
        if (K.ids.empty()) {
            for (const auto& c : cells) K.ids.push_back(detail::parse_int(c, origin, lineno));
            continue;
        }
        if (cells.size() != K.ids.size()) throw ParseError(origin, lineno, "row length differs from header");
        for (const auto& c : cells) K.values.push_back(parse_double(c, origin, lineno));
    }
    if (K.ids.empty()) throw ParseError(origin, 0, "empty kernel file");
    if (K.values.size() != K.ids.size() * K.ids.size()) throw ParseError(origin, 0, "kernel is not square");
    for (std::size_t i = 0; i < K.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (K(i, j) != K(j, i)) throw ParseError(origin, 0, "kernel is not symmetric");
    return K;
}

inline void save_kernel(const KernelMatrix& K, const std::filesystem::path& p) { write_file(p, kernel_to_csv(K)); }
inline KernelMatrix load_kernel(const std::filesystem::path& p) { return kernel_from_csv(read_file(p), p.string()); }

inline std::string labels_to_csv(const std::vector<GraphId>& ids, const std::vector<int>& labels) {
    std::string out = "graph_id,label\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += std::to_string(ids[i]) + "," + std::to_string(labels[i]) + "\n";
    return out;
}

inline std::vector<std::pair<GraphId, int>> labels_from_csv(const std::string& text, const std::string& origin = "labels") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<GraphId, int>> out;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || (lineno == 1 && t.rfind("graph_id", 0) == 0)) continue;
        const auto cells = split_csv(t);
        if (cells.size() != 2) throw ParseError(origin, lineno, "expected 'graph_id,label'");
        const auto label = static_cast<int>(detail::parse_int(cells[1], origin, lineno));
        if (label != 1 && label != 2) throw ParseError(origin, lineno, "label must be 1 or 2");
        out.emplace_back(detail::parse_int(cells[0], origin, lineno), label);
    }
    return out;
}

inline json to_json(const Metrics& m) {
    return json{{"f1", m.f1}, {"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}};
}

inline json to_json(const CvResult& r) {
    json folds = json::array();
    for (const auto& f : r.folds) folds.push_back(to_json(f));
    return json{{"best", {{"C", r.best.C}, {"w", {r.best.w1, r.best.w2}}}}, {"folds", folds}, {"mean", to_json(r.mean)}};
}

inline std::string metrics_csv(const CvResult& r) {
    std::string out = "fold,f1,accuracy,precision,recall\n";
    auto row = [&](const std::string& name, const Metrics& m) {
        out += name + "," + fmt_double(m.f1) + "," + fmt_double(m.accuracy) + "," + fmt_double(m.precision) + "," +
               fmt_double(m.recall) + "\n";
    };
    for (std::size_t i = 0; i < r.folds.size(); ++i) row(std::to_string(i), r.folds[i]);
    row("mean", r.mean);
    return out;
}

inline std::string trace_csv(const BoResult& r) {
    std::string out = "iter,tau0,t0,tau1,t1,tau2,f1_mean,incumbent\n";
    for (const auto& e : r.trace) {
        out += std::to_string(e.iteration);
        for (double v : e.x) out += "," + fmt_double(v);
        out += "," + (e.value ? fmt_double(*e.value) : std::string("nan"));
        out += "," + fmt_double(e.incumbent) + "\n";
    }
    return out;
}

}  // namespace qek::io
