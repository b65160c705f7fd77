#include "otcloak/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

using json = nlohmann::json;

std::string id_key(const json& id, std::size_t line) {
  if (id.is_number_integer()) return "#" + std::to_string(id.get<std::int64_t>());
  if (id.is_string()) return "s" + id.get<std::string>();
  throw ParseError(line, "node id must be an integer or a string");
}

// Edge endpoints are untyped text: integers match integer ids first.
std::optional<NodeId> lookup(const std::map<std::string, NodeId>& ids, const std::string& token) {
  std::int64_t value = 0;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec == std::errc() && ptr == end) {
    if (auto it = ids.find("#" + std::to_string(value)); it != ids.end()) return it->second;
  }
  if (auto it = ids.find("s" + token); it != ids.end()) return it->second;
  return std::nullopt;
}

Label parse_label(const json& v, std::size_t line) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "human") return Label::Human;
    if (s == "bot") return Label::Bot;
  } else if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i == 0) return Label::Human;
    if (i == 1) return Label::Bot;
  }
  throw ParseError(line, "label must be \"human\", \"bot\", 0 or 1");
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct PendingNode {
  Label label;
  std::optional<double> age_norm;
  std::optional<double> created_at;
  Vector content;
};

}  // namespace

DirectedSocialGraph load_dataset(const std::filesystem::path& node_path,
                                 const std::filesystem::path& edge_path) {
  std::ifstream nodes_in(node_path);
  if (!nodes_in) throw ParseError(0, "cannot open node file " + node_path.string());
  std::ifstream edges_in(edge_path);
  if (!edges_in) throw ParseError(0, "cannot open edge file " + edge_path.string());

  std::map<std::string, NodeId> ids;
  std::vector<PendingNode> pending;
  std::optional<std::size_t> content_dim;
  std::string text;
  std::size_t line = 0;
  while (std::getline(nodes_in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("label")) {
      throw ParseError(line, "node object needs \"id\" and \"label\"");
    }
    const std::string key = id_key(obj["id"], line);
    if (ids.contains(key)) throw ParseError(line, "duplicate node id");

    PendingNode node{parse_label(obj["label"], line), std::nullopt, std::nullopt, {}};
    if (obj.contains("age_norm")) {
      if (!obj["age_norm"].is_number()) throw ParseError(line, "age_norm must be a number");
      const double a = obj["age_norm"].get<double>();
      if (!(a >= 0.0 && a <= 1.0)) throw ParseError(line, "age_norm must lie in [0,1]");
      node.age_norm = a;
    } else if (obj.contains("created_at")) {
      if (!obj["created_at"].is_number()) throw ParseError(line, "created_at must be a number");
      node.created_at = obj["created_at"].get<double>();
    } else {
      throw ParseError(line, "node needs \"age_norm\" or \"created_at\"");
    }
    if (obj.contains("content")) {
      const auto& c = obj["content"];
      if (!c.is_array()) throw ParseError(line, "content must be an array");
      for (const auto& x : c) {
        if (!x.is_number()) throw ParseError(line, "content entries must be numbers");
        node.content.push_back(x.get<double>());
      }
    }
    if (!content_dim) content_dim = node.content.size();
    if (node.content.size() != *content_dim) {
      throw ParseError(line, "content length " + std::to_string(node.content.size()) +
                                 " differs from " + std::to_string(*content_dim));
    }
    ids.emplace(key, node_id(pending.size()));
    pending.push_back(std::move(node));
  }

  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  for (const auto& n : pending) {
    if (n.created_at) {
      t_min = std::min(t_min, *n.created_at);
      t_max = std::max(t_max, *n.created_at);
    }
  }

  DirectedSocialGraph g(content_dim.value_or(0));
  for (auto& n : pending) {
    NodeRecord rec;
    rec.label = n.label;
    if (n.age_norm) {
      rec.age_norm = *n.age_norm;
    } else {
      rec.age_norm = t_max > t_min ? (*n.created_at - t_min) / (t_max - t_min) : 0.0;
    }
    rec.content = std::move(n.content);
    g.add_node(std::move(rec));
  }

  line = 0;
  bool header = false;
  while (std::getline(edges_in, text)) {
    ++line;
    const std::string row = trim(text);
    if (row.empty()) continue;
    const auto fields = split_csv(row);
    if (!header) {
      const bool ok = (fields.size() == 2 || fields.size() == 3) && fields[0] == "src" &&
                      fields[1] == "dst" && (fields.size() == 2 || fields[2] == "relation");
      if (!ok) throw ParseError(line, "expected header src,dst,relation");
      header = true;
      continue;
    }
    if (fields.size() < 2 || fields.size() > 3) throw ParseError(line, "expected src,dst[,relation]");
    Relation rel = kFollow;
    if (fields.size() == 3 && !fields[2].empty()) {
      unsigned value = 0;
      const char* end = fields[2].data() + fields[2].size();
      const auto [ptr, ec] = std::from_chars(fields[2].data(), end, value);
      if (ec != std::errc() || ptr != end || value > std::numeric_limits<Relation>::max()) {
        throw ParseError(line, "relation must be an integer in [0,255]");
      }
      rel = static_cast<Relation>(value);
    }
    const auto src = lookup(ids, fields[0]);
    const auto dst = lookup(ids, fields[1]);
    if (!src || !dst) {
      throw DanglingEdge("line " + std::to_string(line) + ": edge " + fields[0] + " -> " +
                         fields[1] + " names an unknown node");
    }
    if (*src == *dst) throw ParseError(line, "self-loop");
    g.add_edge(*src, *dst, rel);
  }

  g.snapshot_baseline();
  return g;
}

void save_dataset(const DirectedSocialGraph& g, const std::filesystem::path& node_path,
                  const std::filesystem::path& edge_path) {
  std::ofstream nodes_out(node_path);
  std::ofstream edges_out(edge_path);
  if (!nodes_out || !edges_out) throw FormatError("cannot open dataset files for writing");
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& rec = g.node(node_id(i));
    nlohmann::ordered_json obj;
    obj["id"] = i;
    obj["label"] = to_string(rec.label);
    obj["age_norm"] = rec.age_norm;
    obj["content"] = rec.content;
    nodes_out << obj.dump() << '\n';
  }
  edges_out << "src,dst,relation\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (const auto& nb : g.out_neighbors(node_id(i))) {
      edges_out << i << ',' << index_of(nb.node) << ',' << static_cast<unsigned>(nb.relation)
                << '\n';
    }
  }
}

bool same_graph(const DirectedSocialGraph& a, const DirectedSocialGraph& b) {
  if (a.node_count() != b.node_count() || a.edge_count() != b.edge_count()) return false;
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    const NodeId v = node_id(i);
    const auto& ra = a.node(v);
    const auto& rb = b.node(v);
    if (ra.label != rb.label || ra.age_norm != rb.age_norm || ra.content != rb.content) return false;
    const auto oa = a.out_neighbors(v);
    const auto ob = b.out_neighbors(v);
    if (!std::equal(oa.begin(), oa.end(), ob.begin(), ob.end())) return false;
  }
  return true;
}

}  // namespace otcloak
