#pragma once

#include <filesystem>

#include "otcloak/graph.hpp"

namespace otcloak {

/// Reads a JSON Lines node file and a CSV edge file.
///
/// Node lines: {"id": int|string, "label": "human"|"bot"|0|1,
/// "age_norm": x | "created_at": t, "content": [...]}. Node handles follow
/// file order. When any node gives only `created_at`, those timestamps are
/// min-max normalized over the file. Edge file: header `src,dst[,relation]`,
/// then one edge per line; duplicate edges are ignored.
///
/// Throws ParseError (with the line number) on malformed input and
/// DanglingEdge when an edge names an unknown node. The returned graph
/// carries a baseline snapshot.
DirectedSocialGraph load_dataset(const std::filesystem::path& node_path,
                                 const std::filesystem::path& edge_path);

/// Writes the graph in the format read by `load_dataset`, ids = handles.
void save_dataset(const DirectedSocialGraph& g, const std::filesystem::path& node_path,
                  const std::filesystem::path& edge_path);

/// Same nodes (records) and same edges.
bool same_graph(const DirectedSocialGraph& a, const DirectedSocialGraph& b);

}  // namespace otcloak
