#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/graph.hpp"

namespace cgnn {

struct Diagnostic {
  std::string where;  // file path, record number, or similar locator
  std::string message;
};

struct ParseOptions {
  std::vector<std::string> include_globs = {"**/*.js", "**/*.mjs",
                                            "**/*.cjs"};
  std::vector<std::string> exclude_globs = {"**/node_modules/**"};
  uint64_t seed = 0;
};

struct ParseResult {
  ProgramGraph graph;
  std::vector<Diagnostic> diagnostics;
};

// Parses every matching file under project_dir (lexicographic order) and
// hangs each Program under a synthetic Project root. Files that fail to
// parse are skipped with a diagnostic; an empty match set is an error.
ParseResult parse_project(const std::string& project_dir,
                          const ParseOptions& options = {});

// Same as parse_project over in-memory (path, source) pairs. Paths are
// sorted before id assignment.
ParseResult parse_sources(std::vector<std::pair<std::string, std::string>> files,
                          uint64_t seed = 0);

const std::vector<std::string>& default_prune_kinds();
bool is_protected_kind(std::string_view kind);

struct PruneState {
  std::map<NodeId, std::vector<NodeId>> parent_child_map;
  std::set<std::string> prune_kinds;
};

// Removes every node whose kind is in prune_kinds; children move up to the
// nearest surviving ancestor at the removed node's position. Throws a usage
// error, before touching anything, when a protected kind is requested.
ProgramGraph prune(const ProgramGraph& graph,
                   const std::set<std::string>& prune_kinds);

// Adds one SemanticName node per distinct identifier text, connected to each
// named syntax node by a semantic edge (syntax -> semantic) and its reverse.
// Existing semantic nodes are dropped first, so the operation is idempotent.
ProgramGraph link_identifiers(const ProgramGraph& graph);

struct FeatureRow {
  std::string node_type;
  std::optional<std::string> name;
  int number_of_parameter = 0;
  int number_of_argument = 0;
};

// One row per node, aligned with graph.nodes.
using FeatureTable = std::vector<FeatureRow>;
FeatureTable compute_features(const ProgramGraph& graph);

struct Endpoints {
  std::vector<NodeId> call_sites;
  std::vector<NodeId> function_defs;
};
Endpoints enumerate_endpoints(const ProgramGraph& graph);

// Sorts edges into the canonical (type, src, dst) order.
void sort_edges(ProgramGraph& graph);

}  // namespace cgnn
