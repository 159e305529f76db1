#include "cgnn/graph.hpp"

#include <algorithm>
#include <set>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kEdgeNames[kNumEdgeTypes] = {
    "ast", "ast_rev", "semantic", "semantic_rev", "call_msg"};

}  // namespace

std::string_view edge_type_name(EdgeType t) {
  return kEdgeNames[static_cast<int>(t)];
}

std::optional<EdgeType> parse_edge_type(std::string_view s) {
  for (int i = 0; i < kNumEdgeTypes; ++i) {
    if (kEdgeNames[i] == s) return static_cast<EdgeType>(i);
  }
  return std::nullopt;
}

void ProgramGraph::reindex() {
  std::sort(nodes.begin(), nodes.end(),
            [](const SyntaxNode& a, const SyntaxNode& b) { return a.id < b.id; });
  lookup_.assign(nodes.empty() ? 0 : nodes.back().id + 1, -1);
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (lookup_[nodes[i].id] != -1)
      throw_data("duplicate node id " + std::to_string(nodes[i].id));
    lookup_[nodes[i].id] = static_cast<int64_t>(i);
  }
}

bool ProgramGraph::has(NodeId id) const {
  return id < lookup_.size() && lookup_[id] >= 0;
}

size_t ProgramGraph::index_of(NodeId id) const {
  if (!has(id)) throw_not_found("no node with id " + std::to_string(id));
  return static_cast<size_t>(lookup_[id]);
}

const SyntaxNode& ProgramGraph::node(NodeId id) const {
  return nodes[index_of(id)];
}

SyntaxNode& ProgramGraph::node(NodeId id) { return nodes[index_of(id)]; }

NodeId ProgramGraph::max_id() const {
  return nodes.empty() ? 0 : nodes.back().id;
}

std::optional<std::string> ProgramGraph::file_of(NodeId id) const {
  const SyntaxNode& n = node(id);
  if (n.file < 0) return std::nullopt;
  return files[n.file];
}

std::optional<std::string> ProgramGraph::feature_name(NodeId id) const {
  const SyntaxNode& n = node(id);
  if (n.name) return n.name;
  return n.ref_name;
}

std::map<NodeId, std::vector<NodeId>> ProgramGraph::children_map() const {
  std::map<NodeId, std::vector<NodeId>> out;
  for (const Edge& e : edges) {
    if (e.type == EdgeType::kAst) out[e.src].push_back(e.dst);
  }
  return out;
}

std::map<NodeId, NodeId> ProgramGraph::parent_map() const {
  std::map<NodeId, NodeId> out;
  for (const Edge& e : edges) {
    if (e.type == EdgeType::kAst) out[e.dst] = e.src;
  }
  return out;
}

size_t ProgramGraph::count_edges(EdgeType t) const {
  return static_cast<size_t>(std::count_if(
      edges.begin(), edges.end(), [t](const Edge& e) { return e.type == t; }));
}

namespace {

ojson node_record(const ProgramGraph& g, const SyntaxNode& n) {
  ojson r;
  r["id"] = n.id;
  r["kind"] = n.kind;
  r["name"] = n.name ? ojson(*n.name) : ojson(nullptr);
  r["file"] = n.file >= 0 ? ojson(g.files[n.file]) : ojson(nullptr);
  r["start"] = n.start;
  r["end"] = n.end;
  r["semantic"] = n.semantic;
  r["ref_name"] = n.ref_name ? ojson(*n.ref_name) : ojson(nullptr);
  r["arity"] = n.arity;
  r["computed"] = n.computed;
  return r;
}

ojson meta_record(const GraphMeta& m) {
  ojson r;
  r["tool_version"] = kToolVersion;
  r["prune_kinds"] = m.prune_kinds;
  r["seed"] = m.seed;
  ojson digests = ojson::object();
  for (const auto& [file, d] : m.input_digests) digests[file] = d;
  r["input_digests"] = digests;
  r["project_dir"] = m.project_dir;
  return r;
}

}  // namespace

std::string graph_to_json(const ProgramGraph& g) {
  std::string out = "{\"nodes\":[";
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += node_record(g, g.nodes[i]).dump();
  }
  out += "\n],\"edges\":[";
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    out += i ? ",\n" : "\n";
    out += "{\"src\":" + std::to_string(e.src) + ",\"dst\":" +
           std::to_string(e.dst) + ",\"type\":\"" +
           std::string(edge_type_name(e.type)) + "\"}";
  }
  out += "\n],\"root\":" + std::to_string(g.root);
  out += ",\n\"files\":" + ojson(g.files).dump();
  out += ",\n\"meta\":" + meta_record(g.meta).dump() + "}\n";
  return out;
}

ProgramGraph graph_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("graph file is not valid JSON: ") + e.what());
  }
  ProgramGraph g;
  try {
    g.files = j.at("files").get<std::vector<std::string>>();
    std::map<std::string, int> file_index;
    for (size_t i = 0; i < g.files.size(); ++i)
      file_index[g.files[i]] = static_cast<int>(i);
    for (const auto& r : j.at("nodes")) {
      SyntaxNode n;
      n.id = r.at("id").get<NodeId>();
      n.kind = r.at("kind").get<std::string>();
      if (!r.at("name").is_null()) n.name = r["name"].get<std::string>();
      if (!r.at("file").is_null()) {
        auto it = file_index.find(r["file"].get<std::string>());
        if (it == file_index.end())
          throw_data("node " + std::to_string(n.id) + " names unknown file");
        n.file = it->second;
      }
      n.start = r.at("start").get<uint32_t>();
      n.end = r.at("end").get<uint32_t>();
      n.semantic = r.at("semantic").get<bool>();
      if (r.contains("ref_name") && !r["ref_name"].is_null())
        n.ref_name = r["ref_name"].get<std::string>();
      n.arity = r.value("arity", 0);
      n.computed = r.value("computed", false);
      g.nodes.push_back(std::move(n));
    }
    for (const auto& r : j.at("edges")) {
      Edge e;
      e.src = r.at("src").get<NodeId>();
      e.dst = r.at("dst").get<NodeId>();
      auto t = parse_edge_type(r.at("type").get<std::string>());
      if (!t) throw_data("unknown edge type " + r["type"].dump());
      e.type = *t;
      g.edges.push_back(e);
    }
    g.root = j.at("root").get<NodeId>();
    const auto& m = j.at("meta");
    g.meta.prune_kinds = m.at("prune_kinds").get<std::vector<std::string>>();
    g.meta.seed = m.at("seed").get<uint64_t>();
    g.meta.project_dir = m.value("project_dir", "");
    if (m.contains("input_digests")) {
      for (const auto& [k, v] : m["input_digests"].items())
        g.meta.input_digests[k] = v.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed graph file: ") + e.what());
  }
  g.reindex();
  auto problems = validate_graph(g);
  if (!problems.empty()) throw_data("invalid graph: " + problems.front());
  return g;
}

void save_graph(const ProgramGraph& g, const std::string& path) {
  write_file(path, graph_to_json(g));
}

ProgramGraph load_graph(const std::string& path) {
  return graph_from_json(read_file(path));
}

std::vector<std::string> validate_graph(const ProgramGraph& g) {
  std::vector<std::string> out;
  auto bad = [&](const std::string& s) { out.push_back(s); };
  for (size_t i = 1; i < g.nodes.size(); ++i) {
    if (g.nodes[i].id == g.nodes[i - 1].id)
      bad("duplicate id " + std::to_string(g.nodes[i].id));
  }
  if (!g.has(g.root)) {
    bad("root missing");
    return out;
  }
  std::multiset<std::tuple<NodeId, NodeId, int>> fwd, rev;
  std::map<NodeId, int> ast_parents;
  for (const Edge& e : g.edges) {
    if (!g.has(e.src) || !g.has(e.dst)) {
      bad("edge endpoint missing: " + std::to_string(e.src) + "->" +
          std::to_string(e.dst));
      continue;
    }
    switch (e.type) {
      case EdgeType::kAst:
        ast_parents[e.dst]++;
        fwd.insert({e.src, e.dst, 0});
        break;
      case EdgeType::kAstRev:
        rev.insert({e.dst, e.src, 0});
        break;
      case EdgeType::kSemantic:
        fwd.insert({e.src, e.dst, 1});
        break;
      case EdgeType::kSemanticRev:
        rev.insert({e.dst, e.src, 1});
        break;
      case EdgeType::kCallMsg:
        if (!js::is_call_site_kind(g.node(e.src).kind) ||
            !js::is_function_kind(g.node(e.dst).kind))
          bad("call_msg edge between non-endpoints");
        break;
    }
  }
  if (fwd != rev) bad("forward and reverse edges are not paired");
  for (const SyntaxNode& n : g.nodes) {
    if (n.semantic) continue;
    const int parents = ast_parents.count(n.id) ? ast_parents[n.id] : 0;
    if (n.id == g.root) {
      if (parents != 0) bad("root has an ast parent");
    } else if (parents != 1) {
      bad("node " + std::to_string(n.id) + " has " + std::to_string(parents) +
          " ast parents");
    }
  }
  return out;
}

}  // namespace cgnn
