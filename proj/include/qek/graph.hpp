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

// Graph containers and the multi-file TU text format.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qek/common.hpp"

namespace qek {

using GraphId = std::int64_t;
using Edge = std::pair<int, int>;

/// Undirected simple graph with a binary class label (1 = enzyme, 2 = non-enzyme).
struct Graph {
    GraphId id = 0;
    int nodes = 0;
    std::vector<Edge> edges;  // sorted, each stored as (u, v) with u < v
    int label = 1;

    bool edgeless() const { return edges.empty(); }

    bool operator==(const Graph&) const = default;
};

struct GraphSet {
    std::string name;
    std::vector<Graph> graphs;

    std::size_t size() const { return graphs.size(); }
    bool empty() const { return graphs.empty(); }

    /// Ids of graphs without any edge; the parser keeps them, embedding rejects them.
    std::vector<GraphId> edgeless_ids() const {
        std::vector<GraphId> out;
        for (const auto& g : graphs)
            if (g.edgeless()) out.push_back(g.id);
        return out;
    }

    bool operator==(const GraphSet&) const = default;
};

struct CorpusStats {
    std::size_t graph_count = 0;
    int min_nodes = 0;
    double avg_nodes = 0.0;
    int max_nodes = 0;
    std::size_t min_edges = 0;
    double avg_edges = 0.0;
    std::size_t max_edges = 0;
    std::map<int, std::size_t> class_counts;
};

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

/// Normalizes an edge list: drops self-loops and duplicates, orients u < v, sorts.
inline std::vector<Edge> normalize_edges(std::vector<Edge> edges) {
    for (auto& e : edges)
        if (e.first > e.second) std::swap(e.first, e.second);
    std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Builds a graph, validating node indices.
inline Graph make_graph(GraphId id, int nodes, std::vector<Edge> edges, int label = 1) {
    if (nodes < 0) throw ValidationError("graph " + std::to_string(id) + ": negative node count");
    if (label != 1 && label != 2) throw ValidationError("graph " + std::to_string(id) + ": label must be 1 or 2");
    for (const auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= nodes || v >= nodes)
            throw ValidationError("graph " + std::to_string(id) + ": edge (" + std::to_string(u) + ", " +
                                  std::to_string(v) + ") outside [0, " + std::to_string(nodes) + ")");
    }
    return Graph{id, nodes, normalize_edges(std::move(edges)), label};
}

inline Graph make_path(GraphId id, int n, int label = 1) {
    std::vector<Edge> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return make_graph(id, n, std::move(e), label);
}

inline Graph make_cycle(GraphId id, int n, int label = 1) {
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
    return make_graph(id, n, std::move(e), label);
}

/// Star K_{1,leaves}: node 0 is the center.
inline Graph make_star(GraphId id, int leaves, int label = 1) {
    std::vector<Edge> e;
    for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
    return make_graph(id, leaves + 1, std::move(e), label);
}

inline Graph make_complete(GraphId id, int n, int label = 1) {
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return make_graph(id, n, std::move(e), label);
}

inline std::vector<std::vector<int>> adjacency(const Graph& g) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.nodes));
    for (const auto& [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    return adj;
}

/// Hop distances from src; -1 marks unreachable nodes.
inline std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int src) {
    std::vector<int> dist(adj.size(), -1);
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
    }
    return dist;
}

inline bool is_connected(const Graph& g) {
    if (g.nodes <= 1) return true;
    const auto d = bfs_distances(adjacency(g), 0);
    return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

inline bool has_edge(const Graph& g, int u, int v) {
    if (u > v) std::swap(u, v);
    return std::binary_search(g.edges.begin(), g.edges.end(), Edge{u, v});
}

// ---------------------------------------------------------------------------
// TU dataset format
// ---------------------------------------------------------------------------

namespace detail {

inline std::filesystem::path tu_file(const std::filesystem::path& root, const std::string& name,
                                     const std::string& suffix) {
    return root / (name + "_" + suffix + ".txt");
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline long long parse_int(const std::string& text, const std::string& file, std::size_t line) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected integer, got '" + text + "'");
    }
    if (trim(text.substr(used)).size() != 0) throw ParseError(file, line, "trailing characters in '" + text + "'");
    return v;
}

/// One integer per non-blank line.
inline std::vector<std::pair<long long, std::size_t>> read_int_column(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::vector<std::pair<long long, std::size_t>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty()) continue;
        out.emplace_back(parse_int(t, path.string(), lineno), lineno);
    }
    return out;
}

}  // namespace detail

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt` and `<name>_graph_labels.txt`
/// from `root`. Node-label and attribute files are ignored. If the optional
/// `<name>_graph_ids.txt` is present (written by write_tu_dataset), its values
/// replace the positional graph ids.
inline GraphSet parse_tu_dataset(const std::filesystem::path& root, const std::string& name) {
    const auto indicator_path = detail::tu_file(root, name, "graph_indicator");
    const auto labels_path = detail::tu_file(root, name, "graph_labels");
    const auto edges_path = detail::tu_file(root, name, "A");
    for (const auto& p : {edges_path, indicator_path, labels_path})
        if (!std::filesystem::exists(p)) throw ParseError(p.string(), 0, "missing required TU file");

    const auto indicator = detail::read_int_column(indicator_path);
    const auto raw_labels = detail::read_int_column(labels_path);

    // Graph order follows first appearance in the indicator file.
    std::unordered_map<long long, std::size_t> slot_of_tu_id;
    std::vector<long long> tu_ids;
    std::vector<int> local_index(indicator.size());
    std::vector<std::size_t> slot_of_node(indicator.size());
    std::vector<int> node_count;
    for (std::size_t i = 0; i < indicator.size(); ++i) {
        const auto [gid, lineno] = indicator[i];
        if (gid < 1 || static_cast<std::size_t>(gid) > raw_labels.size())
            throw ParseError(indicator_path.string(), lineno,
                             "graph id " + std::to_string(gid) + " has no entry in the labels file");
        auto [it, inserted] = slot_of_tu_id.try_emplace(gid, tu_ids.size());
        if (inserted) {
            tu_ids.push_back(gid);
            node_count.push_back(0);
        }
        slot_of_node[i] = it->second;
        local_index[i] = node_count[it->second]++;
    }

    // Labels: the distinct raw values map to {1, 2} in ascending order.
    std::set<long long> distinct;
    for (auto id : tu_ids) distinct.insert(raw_labels[static_cast<std::size_t>(id - 1)].first);
    if (distinct.size() > 2)
        throw ParseError(labels_path.string(), 0,
                         "expected a binary task, found " + std::to_string(distinct.size()) + " distinct labels");
    std::map<long long, int> label_map;
    int next_label = 1;
    for (auto v : distinct) label_map[v] = next_label++;

    std::vector<std::vector<Edge>> edges(tu_ids.size());
    {
        std::ifstream in(edges_path);
        if (!in) throw ParseError(edges_path.string(), 0, "cannot open file");
        std::string line;
        std::size_t lineno = 0;
        const auto n_nodes = static_cast<long long>(indicator.size());
        while (std::getline(in, line)) {
            ++lineno;
            const auto t = detail::trim(line);
            if (t.empty()) continue;
            const auto comma = t.find(',');
            if (comma == std::string::npos) throw ParseError(edges_path.string(), lineno, "expected 'u, v'");
            const auto a = detail::parse_int(detail::trim(t.substr(0, comma)), edges_path.string(), lineno);
            const auto b = detail::parse_int(detail::trim(t.substr(comma + 1)), edges_path.string(), lineno);
            if (a < 1 || b < 1 || a > n_nodes || b > n_nodes)
                throw ParseError(edges_path.string(), lineno, "node id out of range [1, " + std::to_string(n_nodes) + "]");
            const auto ia = static_cast<std::size_t>(a - 1);
            const auto ib = static_cast<std::size_t>(b - 1);
            if (slot_of_node[ia] != slot_of_node[ib])
                throw ParseError(edges_path.string(), lineno,
                                 "edge (" + std::to_string(a) + ", " + std::to_string(b) + ") crosses graphs " +
                                     std::to_string(tu_ids[slot_of_node[ia]]) + " and " +
                                     std::to_string(tu_ids[slot_of_node[ib]]));
            edges[slot_of_node[ia]].emplace_back(local_index[ia], local_index[ib]);
        }
    }

    std::vector<GraphId> ids(tu_ids.begin(), tu_ids.end());
    const auto ids_path = detail::tu_file(root, name, "graph_ids");
    if (std::filesystem::exists(ids_path)) {
        const auto col = detail::read_int_column(ids_path);
        if (col.size() != tu_ids.size())
            throw ParseError(ids_path.string(), 0, "expected " + std::to_string(tu_ids.size()) + " ids");
        for (std::size_t s = 0; s < tu_ids.size(); ++s)
            ids[s] = col[static_cast<std::size_t>(tu_ids[s] - 1)].first;
    }

    GraphSet gs;
    gs.name = name;
    gs.graphs.reserve(tu_ids.size());
    for (std::size_t s = 0; s < tu_ids.size(); ++s) {
        Graph g;
        g.id = ids[s];
        g.nodes = node_count[s];
        g.edges = normalize_edges(std::move(edges[s]));
        g.label = label_map.at(raw_labels[static_cast<std::size_t>(tu_ids[s] - 1)].first);
        gs.graphs.push_back(std::move(g));
    }
    std::set<GraphId> seen;
    for (const auto& g : gs.graphs)
        if (!seen.insert(g.id).second) throw ParseError(ids_path.string(), 0, "duplicate graph id " + std::to_string(g.id));
    return gs;
}

/// Writes `gs` in TU format under `root` (both edge directions, as the public
/// datasets do). Graph ids go to `<name>_graph_ids.txt` so that parsing the
/// output reproduces `gs` exactly.
inline void write_tu_dataset(const GraphSet& gs, const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    const std::string name = gs.name.empty() ? "DATA" : gs.name;
    std::ofstream a(detail::tu_file(root, name, "A"));
    std::ofstream ind(detail::tu_file(root, name, "graph_indicator"));
    std::ofstream lab(detail::tu_file(root, name, "graph_labels"));
    std::ofstream ids(detail::tu_file(root, name, "graph_ids"));
    if (!a || !ind || !lab || !ids) throw Error("cannot write TU dataset under " + root.string());
    long long offset = 0;
    for (std::size_t s = 0; s < gs.graphs.size(); ++s) {
        const auto& g = gs.graphs[s];
        for (int v = 0; v < g.nodes; ++v) ind << (s + 1) << '\n';
        for (const auto& [u, v] : g.edges) {
            a << (offset + u + 1) << ", " << (offset + v + 1) << '\n';
            a << (offset + v + 1) << ", " << (offset + u + 1) << '\n';
        }
        lab << g.label << '\n';
        ids << g.id << '\n';
        offset += g.nodes;
    }
}

/// Keeps graphs with at most `max_nodes` nodes, in order.
inline GraphSet filter_by_node_count(const GraphSet& gs, int max_nodes) {
    if (max_nodes < 1) throw ValidationError("max_nodes must be >= 1");
    GraphSet out;
    out.name = gs.name;
    for (const auto& g : gs.graphs)
        if (g.nodes <= max_nodes) out.graphs.push_back(g);
    return out;
}

inline CorpusStats corpus_stats(const GraphSet& gs) {
    if (gs.empty()) throw ValidationError("corpus_stats: empty graph set");
    CorpusStats s;
    s.graph_count = gs.size();
    s.min_nodes = std::numeric_limits<int>::max();
    s.min_edges = std::numeric_limits<std::size_t>::max();
    long double node_sum = 0, edge_sum = 0;
    for (const auto& g : gs.graphs) {
        s.min_nodes = std::min(s.min_nodes, g.nodes);
        s.max_nodes = std::max(s.max_nodes, g.nodes);
        s.min_edges = std::min(s.min_edges, g.edges.size());
        s.max_edges = std::max(s.max_edges, g.edges.size());
        node_sum += g.nodes;
        edge_sum += static_cast<long double>(g.edges.size());
        ++s.class_counts[g.label];
    }
    s.avg_nodes = static_cast<double>(node_sum / static_cast<long double>(gs.size()));
    s.avg_edges = static_cast<double>(edge_sum / static_cast<long double>(gs.size()));
    return s;
}

}  // namespace qek
