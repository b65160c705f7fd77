#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "otcloak/datagen.hpp"
#include "otcloak/dataset_io.hpp"
#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

class DatasetFiles : public ::testing::Test {
 protected:
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("otcloak_io_" + std::to_string(::getpid()));
  std::filesystem::path nodes = dir / "nodes.jsonl";
  std::filesystem::path edges = dir / "edges.csv";

  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }

  void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

  std::size_t parse_error_line() {
    try {
      load_dataset(nodes, edges);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  }
};

constexpr const char* kThreeNodes =
    "{\"id\": \"a\", \"label\": \"human\", \"age_norm\": 0.5, \"content\": [1, 2]}\n"
    "{\"id\": 7, \"label\": 1, \"age_norm\": 0.1, \"content\": [0, 0]}\n"
    "\n"
    "{\"id\": \"c\", \"label\": \"bot\", \"age_norm\": 1.0, \"content\": [3, 4]}\n";

TEST_F(DatasetFiles, EmptyEdgeFile) {
  write(nodes, kThreeNodes);
  write(edges, "");
  const auto g = load_dataset(nodes, edges);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 0u);
  EXPECT_EQ(g.content_dim(), 2u);
  EXPECT_EQ(g.label(node_id(1)), Label::Bot);
  EXPECT_TRUE(g.has_baseline());
}

TEST_F(DatasetFiles, EdgesFollowFileOrderHandles) {
  write(nodes, kThreeNodes);
  write(edges, "src,dst,relation\na,7\n7,c,2\na,7,0\n");
  const auto g = load_dataset(nodes, edges);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(g.has_edge(node_id(0), node_id(1)));
  EXPECT_TRUE(g.has_edge(node_id(1), node_id(2), 2));
}

TEST_F(DatasetFiles, DanglingEdgeNamesLine) {
  write(nodes, kThreeNodes);
  write(edges, "src,dst\na,7\na,zz\n");
  try {
    load_dataset(nodes, edges);
    FAIL() << "expected DanglingEdge";
  } catch (const DanglingEdge& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST_F(DatasetFiles, CreatedAtIsMinMaxNormalized) {
  write(nodes,
        "{\"id\": 1, \"label\": \"human\", \"created_at\": 100, \"content\": []}\n"
        "{\"id\": 2, \"label\": \"bot\", \"created_at\": 300, \"content\": []}\n"
        "{\"id\": 3, \"label\": \"bot\", \"created_at\": 150, \"content\": []}\n");
  write(edges, "src,dst\n");
  const auto g = load_dataset(nodes, edges);
  EXPECT_EQ(g.node(node_id(0)).age_norm, 0.0);
  EXPECT_EQ(g.node(node_id(1)).age_norm, 1.0);
  EXPECT_DOUBLE_EQ(g.node(node_id(2)).age_norm, 0.25);
}

TEST_F(DatasetFiles, ParseErrorsCarryLineNumbers) {
  write(edges, "src,dst\n");
  write(nodes, "{\"id\": 1, \"label\": \"human\", \"age_norm\": 0.5}\n{not json\n");
  EXPECT_EQ(parse_error_line(), 2u);
  write(nodes, "{\"id\": 1, \"label\": \"alien\", \"age_norm\": 0.5}\n");
  EXPECT_EQ(parse_error_line(), 1u);
  write(nodes,
        "{\"id\": 1, \"label\": \"human\", \"age_norm\": 0.5}\n"
        "{\"id\": 1, \"label\": \"bot\", \"age_norm\": 0.5}\n");
  EXPECT_EQ(parse_error_line(), 2u);
  write(nodes, "{\"id\": 1, \"label\": \"human\", \"age_norm\": 1.5}\n");
  EXPECT_EQ(parse_error_line(), 1u);
  write(nodes,
        "{\"id\": 1, \"label\": \"human\", \"age_norm\": 0.5, \"content\": [1]}\n"
        "{\"id\": 2, \"label\": \"bot\", \"age_norm\": 0.5, \"content\": [1, 2]}\n");
  EXPECT_EQ(parse_error_line(), 2u);

  write(nodes, kThreeNodes);
  write(edges, "from,to\na,7\n");
  EXPECT_EQ(parse_error_line(), 1u);
  write(edges, "src,dst\na,7\n7,7\n");
  EXPECT_EQ(parse_error_line(), 3u);
  write(edges, "src,dst,relation\na,7,300\n");
  EXPECT_EQ(parse_error_line(), 2u);
}

TEST_F(DatasetFiles, RoundTripPreservesGraph) {
  GenParams p = preset("cresci-like");
  p.n_humans = 40;
  p.n_bots = 30;
  p.seed = 6;
  const auto gen = generate(p);
  save_dataset(gen.graph, nodes, edges);
  const auto back = load_dataset(nodes, edges);
  EXPECT_TRUE(same_graph(gen.graph, back));

  DirectedSocialGraph other = back;
  if (!other.remove_edge(node_id(0), node_id(69))) other.add_edge(node_id(0), node_id(69));
  EXPECT_FALSE(same_graph(gen.graph, other));
}

}  // namespace
}  // namespace otcloak
