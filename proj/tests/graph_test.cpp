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

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qek {
namespace {

using testing::TempDir;
using testing::write_text;

void write_tu(const std::filesystem::path& dir, const std::string& name, const std::string& a,
              const std::string& indicator, const std::string& labels) {
    write_text(dir / (name + "_A.txt"), a);
    write_text(dir / (name + "_graph_indicator.txt"), indicator);
    write_text(dir / (name + "_graph_labels.txt"), labels);
}

TEST(ParseTu, MinimalSingleEdgeGraph) {
    TempDir d("tu");
    write_tu(d.path(), "MINI", "1, 2\n", "1\n1\n", "1\n");
    const auto gs = parse_tu_dataset(d.path(), "MINI");
    ASSERT_EQ(gs.size(), 1u);
    EXPECT_EQ(gs.graphs[0].nodes, 2);
    ASSERT_EQ(gs.graphs[0].edges.size(), 1u);
    EXPECT_EQ(gs.graphs[0].edges[0], (Edge{0, 1}));
    EXPECT_EQ(gs.graphs[0].label, 1);
}

TEST(ParseTu, DeduplicatesBothDirectionsAndMapsLabelsAscending) {
    TempDir d("tu");
    // Graph 1: triangle listed in both directions; graph 2: one edge; raw labels -1 / 1.
    write_tu(d.path(), "T", "1,2\n2,1\n2,3\n3,2\n1,3\n3,1\n4,5\n5,4\n", "1\n1\n1\n2\n2\n", "1\n-1\n");
    const auto gs = parse_tu_dataset(d.path(), "T");
    ASSERT_EQ(gs.size(), 2u);
    EXPECT_EQ(gs.graphs[0].edges, (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}}));
    EXPECT_EQ(gs.graphs[1].edges, (std::vector<Edge>{{0, 1}}));
    EXPECT_EQ(gs.graphs[0].label, 2);  // raw 1 is the larger value
    EXPECT_EQ(gs.graphs[1].label, 1);  // raw -1 maps to class 1
    EXPECT_EQ(gs.graphs[0].id, 1);
    EXPECT_EQ(gs.graphs[1].id, 2);
}

TEST(ParseTu, KeepsEdgelessGraphsAndFlagsThem) {
    TempDir d("tu");
    write_tu(d.path(), "E", "1,2\n", "1\n1\n2\n", "1\n2\n");
    const auto gs = parse_tu_dataset(d.path(), "E");
    ASSERT_EQ(gs.size(), 2u);
    EXPECT_EQ(gs.graphs[1].nodes, 1);
    EXPECT_EQ(gs.edgeless_ids(), std::vector<GraphId>{2});
}

TEST(ParseTu, MissingFileNamesTheFile) {
    TempDir d("tu");
    write_text(d / "X_A.txt", "1,2\n");
    write_text(d / "X_graph_indicator.txt", "1\n1\n");
    try {
        parse_tu_dataset(d.path(), "X");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(e.file().find("X_graph_labels.txt"), std::string::npos);
    }
}

TEST(ParseTu, CrossGraphEdgeReportsLineNumber) {
    TempDir d("tu");
    write_tu(d.path(), "C", "1,2\n\n2,3\n", "1\n1\n2\n", "1\n2\n");
    try {
        parse_tu_dataset(d.path(), "C");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(e.file().find("C_A.txt"), std::string::npos);
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ParseTu, DropsSelfLoopsAndRejectsMoreThanTwoLabels) {
    TempDir d("tu");
    write_tu(d.path(), "S", "1,1\n1,2\n", "1\n1\n", "1\n");
    const auto gs = parse_tu_dataset(d.path(), "S");
    ASSERT_EQ(gs.size(), 1u);
    EXPECT_EQ(gs.graphs[0].edges, (std::vector<Edge>{{0, 1}}));
    TempDir e("tu");
    write_tu(e.path(), "L", "1,2\n", "1\n1\n2\n3\n", "1\n2\n3\n");
    EXPECT_THROW(parse_tu_dataset(e.path(), "L"), ParseError);
}

TEST(ParseTu, RejectsMalformedIntegers) {
    TempDir d("tu");
    write_tu(d.path(), "M", "1,x\n", "1\n1\n", "1\n");
    EXPECT_THROW(parse_tu_dataset(d.path(), "M"), ParseError);
}

TEST(GraphSet, WriteParseRoundTripIsIdentical) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        GraphSet gs;
        gs.name = "RT";
        const int count = 1 + static_cast<int>(uniform_index(rng, 8));
        for (int i = 0; i < count; ++i) {
            const int n = 1 + static_cast<int>(uniform_index(rng, 9));
            gs.graphs.push_back(testing::random_graph(rng, 100 + 7 * i, n, 0.4, 1 + static_cast<int>(uniform_index(rng, 2))));
        }
        // Labels only survive as {1, 2} if both classes appear or class 1 is the sole value.
        bool has1 = false;
        for (const auto& g : gs.graphs) has1 = has1 || g.label == 1;
        if (!has1)
            for (auto& g : gs.graphs) g.label = 1;
        TempDir d("rt");
        write_tu_dataset(gs, d.path());
        EXPECT_EQ(parse_tu_dataset(d.path(), "RT"), gs) << "trial " << trial;
    }
}

TEST(Filter, KeepsExactlyGraphsWithinBoundInOrder) {
    GraphSet gs{"F", {make_path(1, 5), make_path(2, 3), make_cycle(3, 7), make_path(4, 2)}};
    const auto f = filter_by_node_count(gs, 5);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f.graphs[0].id, 1);
    EXPECT_EQ(f.graphs[1].id, 2);
    EXPECT_EQ(f.graphs[2].id, 4);
    EXPECT_TRUE(filter_by_node_count(gs, 1).empty());
    EXPECT_THROW(filter_by_node_count(gs, 0), ValidationError);
}

TEST(Filter, IdempotentAndMonotone) {
    std::mt19937_64 rng(5);
    GraphSet gs{"P", {}};
    for (int i = 0; i < 60; ++i) gs.graphs.push_back(testing::random_graph(rng, i + 1, 1 + static_cast<int>(uniform_index(rng, 20)), 0.2, 1));
    for (int m = 1; m <= 21; ++m) {
        const auto f = filter_by_node_count(gs, m);
        EXPECT_EQ(filter_by_node_count(f, m), f);
        const auto g = filter_by_node_count(gs, m + 1);
        EXPECT_GE(g.size(), f.size());
        for (const auto& x : f.graphs) {
            bool found = false;
            for (const auto& y : g.graphs) found = found || y.id == x.id;
            EXPECT_TRUE(found);
        }
    }
}

TEST(Stats, TriangleAndHandComputedMeans) {
    const auto t = corpus_stats(GraphSet{"T", {make_complete(1, 3)}});
    EXPECT_EQ(t.min_nodes, 3);
    EXPECT_EQ(t.max_nodes, 3);
    EXPECT_DOUBLE_EQ(t.avg_nodes, 3.0);
    EXPECT_EQ(t.min_edges, 3u);
    EXPECT_EQ(t.max_edges, 3u);
    EXPECT_DOUBLE_EQ(t.avg_edges, 3.0);

    // P2 (1 edge), C4 (4 edges), star with 3 leaves (3 edges): nodes 2,4,4 / edges 1,4,3.
    const auto s = corpus_stats(GraphSet{"M", {make_path(1, 2, 1), make_cycle(2, 4, 2), make_star(3, 3, 2)}});
    EXPECT_EQ(s.min_nodes, 2);
    EXPECT_EQ(s.max_nodes, 4);
    EXPECT_DOUBLE_EQ(s.avg_nodes, 10.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.avg_edges, 8.0 / 3.0);
    EXPECT_EQ(s.class_counts.at(1), 1u);
    EXPECT_EQ(s.class_counts.at(2), 2u);
    EXPECT_THROW(corpus_stats(GraphSet{}), ValidationError);
}

TEST(Stats, InvariantsOnRandomSets) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        GraphSet gs{"R", {}};
        const int count = 1 + static_cast<int>(uniform_index(rng, 30));
        for (int i = 0; i < count; ++i)
            gs.graphs.push_back(testing::random_graph(rng, i, 1 + static_cast<int>(uniform_index(rng, 15)), 0.3,
                                                      1 + static_cast<int>(uniform_index(rng, 2))));
        const auto s = corpus_stats(gs);
        EXPECT_LE(s.min_nodes, s.avg_nodes);
        EXPECT_LE(s.avg_nodes, s.max_nodes);
        EXPECT_LE(static_cast<double>(s.min_edges), s.avg_edges);
        EXPECT_LE(s.avg_edges, static_cast<double>(s.max_edges));
        std::size_t total = 0;
        for (const auto& [k, v] : s.class_counts) total += v;
        EXPECT_EQ(total, gs.size());
    }
}

TEST(Graph, ConstructorsValidate) {
    EXPECT_TRUE(make_graph(1, 3, {{0, 0}}).edges.empty());
    EXPECT_THROW(make_graph(1, 3, {{0, 3}}), ValidationError);
    EXPECT_THROW(make_graph(1, 3, {{0, 1}}, 3), ValidationError);
    const auto g = make_graph(1, 3, {{1, 0}, {0, 1}, {2, 1}});
    EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
    EXPECT_TRUE(is_connected(g));
    EXPECT_FALSE(is_connected(make_graph(2, 3, {{0, 1}})));
    const auto d = bfs_distances(adjacency(make_path(3, 5)), 0);
    EXPECT_EQ(d, (std::vector<int>{0, 1, 2, 3, 4}));
}

// Dataset-scale checks need the PROTEINS files; set QEK_PROTEINS_DIR to run them.
class Proteins : public ::testing::Test {
  protected:
    void SetUp() override {
        const char* dir = std::getenv("QEK_PROTEINS_DIR");
        if (!dir || !*dir) GTEST_SKIP() << "QEK_PROTEINS_DIR not set";
        gs_ = parse_tu_dataset(dir, "PROTEINS");
    }
    GraphSet gs_;
};

TEST_F(Proteins, CountsAndTableOneStatistics) {
    ASSERT_EQ(gs_.size(), 1113u);
    const auto s = corpus_stats(gs_);
    EXPECT_EQ(s.class_counts.at(1), 663u);
    EXPECT_EQ(s.class_counts.at(2), 450u);
    EXPECT_EQ(s.min_nodes, 4);
    EXPECT_EQ(s.max_nodes, 620);
    EXPECT_NEAR(s.avg_nodes, 39.5, 0.06);
    EXPECT_NEAR(s.avg_edges, 72.81, 0.01);
    EXPECT_EQ(s.max_edges, 1049u);
}

TEST_F(Proteins, FilterBounds) {
    EXPECT_EQ(filter_by_node_count(gs_, 620).size(), 1113u);
    EXPECT_EQ(filter_by_node_count(gs_, 3).size(), 0u);
    std::size_t scan = 0;
    for (const auto& g : gs_.graphs) scan += g.nodes <= 12;
    EXPECT_EQ(filter_by_node_count(gs_, 12).size(), scan);
    EXPECT_GE(scan, 143u);
}

}  // namespace
}  // namespace qek
