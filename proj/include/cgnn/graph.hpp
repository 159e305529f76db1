#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cgnn {

using NodeId = uint32_t;

enum class EdgeType : uint8_t {
  kAst = 0,
  kAstRev = 1,
  kSemantic = 2,
  kSemanticRev = 3,
  kCallMsg = 4,
};
inline constexpr int kNumEdgeTypes = 5;

std::string_view edge_type_name(EdgeType t);
std::optional<EdgeType> parse_edge_type(std::string_view s);

struct SyntaxNode {
  NodeId id = 0;
  std::string kind;
  std::optional<std::string> name;      // identifier text (Identifier nodes)
  std::optional<std::string> ref_name;  // declared or called name
  int file = -1;                        // index into ProgramGraph::files
  uint32_t start = 0;
  uint32_t end = 0;
  int arity = 0;
  bool computed = false;
  bool semantic = false;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  EdgeType type = EdgeType::kAst;

  bool operator==(const Edge&) const = default;
};

struct GraphMeta {
  std::vector<std::string> prune_kinds;  // sorted
  uint64_t seed = 0;
  std::string project_dir;
  std::map<std::string, std::string> input_digests;  // file -> digest
};

// Nodes are kept sorted by id. Ids need not be dense: pruning removes nodes
// but never renumbers the survivors.
class ProgramGraph {
 public:
  std::vector<SyntaxNode> nodes;
  std::vector<Edge> edges;
  NodeId root = 0;
  std::vector<std::string> files;
  GraphMeta meta;

  // Rebuilds the id lookup; call after mutating `nodes`.
  void reindex();

  bool has(NodeId id) const;
  const SyntaxNode& node(NodeId id) const;
  SyntaxNode& node(NodeId id);
  size_t index_of(NodeId id) const;  // position in `nodes`
  NodeId max_id() const;

  std::optional<std::string> file_of(NodeId id) const;

  // Feature name: identifier text if present, else the declared/called name.
  std::optional<std::string> feature_name(NodeId id) const;

  // Ordered children along ast edges, and the unique ast parent.
  std::map<NodeId, std::vector<NodeId>> children_map() const;
  std::map<NodeId, NodeId> parent_map() const;

  size_t count_edges(EdgeType t) const;

 private:
  std::vector<int64_t> lookup_;  // id -> index, -1 when absent
};

// Canonical text form: fixed key order, one node or edge record per line.
std::string graph_to_json(const ProgramGraph& g);
ProgramGraph graph_from_json(std::string_view text);

void save_graph(const ProgramGraph& g, const std::string& path);
ProgramGraph load_graph(const std::string& path);

// Checks the structural invariants (unique ids, edge endpoints exist,
// reverse twins, single ast parent, call_msg endpoint kinds). Returns a list
// of violations, empty when the graph is well formed.
std::vector<std::string> validate_graph(const ProgramGraph& g);

}  // namespace cgnn
